// bench: virtual-time point-cloud streaming scenarios.
//
//   bench run --config configs/grid.toml --out results/
//   bench run --bandwidth-mbps 8 --timeout-ms 50,500 --tracks 10 --fpg 30
//   bench synth --points 10000 --frames 20 --out frames/

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "pcstream/bench.hpp"
#include "pcstream/errors.hpp"
#include "pcstream/ply.hpp"
#include "pcstream/publisher.hpp"

namespace fs = std::filesystem;
using namespace pcstream;

namespace {

struct RunOptions {
  std::vector<double> bandwidth_mbps{300.0};
  double bandwidth_scale = 1.0;
  std::vector<std::uint32_t> timeouts_ms{50, 100, 500, 1500};
  std::vector<std::uint32_t> tracks{5};
  std::vector<std::uint32_t> fpg{5};
  double fps = 20.0;
  std::size_t frames = 100;
  std::uint64_t seed = 1;
  std::string dataset;
  std::size_t synthetic_points = 10'000;
  double point_jitter = 0.1;
  std::uint32_t resolution = kDefaultResolution;
  std::size_t chunk_size = 64 * 1024;
  double delay_ms = 1.0;
  std::string out = "bench-out";
  unsigned jobs = 1;
  bool multi_subscriber = false;
  bool netsim_log = false;
  bool save_ply = false;
};

struct SynthOptions {
  std::size_t points = 10'000;
  double point_jitter = 0.0;
  std::size_t frames = 10;
  std::uint32_t resolution = kDefaultResolution;
  std::uint64_t seed = 1;
  std::string out = "frames";
  bool ascii = false;
};

std::uint64_t to_bps(double mbps, double scale) {
  const double bps = std::round(mbps * scale * 1e6);
  if (!(bps >= 1)) throw ConfigError(fmt::format("bandwidth {} Mbps x {} rounds to zero", mbps, scale));
  return static_cast<std::uint64_t>(bps);
}

bench::Scenario base_scenario(const RunOptions& o) {
  bench::Scenario s;
  s.egress.propagation_delay_us = std::llround(o.delay_ms * 1000.0);
  s.uplink.propagation_delay_us = s.egress.propagation_delay_us;
  s.publisher.fps = o.fps;
  s.publisher.seed = o.seed;
  s.publisher.chunk_size = o.chunk_size;
  s.n_frames = o.frames;
  s.synthetic_points = o.synthetic_points;
  s.point_jitter = o.point_jitter;
  s.resolution = o.resolution;
  if (!o.dataset.empty()) s.dataset_dir = fs::path(o.dataset);
  s.keep_results = o.save_ply;
  return s;
}

void save_reconstructions(const fs::path& dir, const std::string& name, const bench::ScenarioResult& result) {
  for (const bench::SubscriberRun& run : result.subscribers) {
    const fs::path sub_dir = dir / "ply" / fmt::format("{}_s{}", name, run.id);
    fs::create_directories(sub_dir);
    for (const FrameResult& r : run.results) save_ply(r.cloud, sub_dir / fmt::format("frame_{:05}.ply", r.frame_id));
  }
}

void print_cell(const bench::GridCell& c) {
  const RunAggregates& a = c.report.aggregates;
  std::cerr << fmt::format("bw={} T={} K={} fpg={}: throughput={:.0f} bps stall_rate={:.3f} received={:.3f}\n",
                           c.bandwidth_bps, c.timeout_ms, c.tracks, c.frames_per_group, a.mean_throughput_bps,
                           a.stall_rate, a.mean_received);
}

int do_run(const RunOptions& o) {
  const bench::Scenario base = base_scenario(o);
  bench::GridSpec grid;
  for (double mbps : o.bandwidth_mbps) grid.bandwidths_bps.push_back(to_bps(mbps, o.bandwidth_scale));
  grid.timeouts_ms = o.timeouts_ms;
  grid.tracks = o.tracks;
  grid.frames_per_group = o.fpg;
  bench::validate(grid);

  const fs::path out_dir(o.out);
  fs::create_directories(out_dir);

  bench::GridSummary summary;
  if (o.multi_subscriber) {
    // One relay per (bandwidth, tracks, fpg) with a subscriber per timeout.
    for (std::uint64_t bw : grid.bandwidths_bps) {
      for (std::uint32_t k : grid.tracks) {
        for (std::uint32_t fpg : grid.frames_per_group) {
          bench::Scenario s = bench::cell_scenario(base, bw, grid.timeouts_ms.front(), k, fpg);
          s.timeouts_ms = grid.timeouts_ms;
          const bench::ScenarioResult result = bench::run_scenario(s);
          const std::string name = fmt::format("{}_multi_{}_{}", bw, k, fpg);
          bench::write_scenario_outputs(out_dir, name, s, result, o.netsim_log);
          if (o.save_ply) save_reconstructions(out_dir, name, result);
          for (const bench::SubscriberRun& run : result.subscribers) {
            bench::GridCell cell;
            cell.bandwidth_bps = bw;
            cell.timeout_ms = run.timeout_ms;
            cell.tracks = k;
            cell.frames_per_group = fpg;
            cell.report = run.report;
            print_cell(cell);
            summary.cells.push_back(std::move(cell));
          }
        }
      }
    }
    bench::apply_baseline_deltas(summary);
  } else {
    summary = bench::run_grid(grid, base, o.jobs, [&](const bench::GridCell& cell, const bench::ScenarioResult& result) {
      const std::string name = bench::cell_name(cell.bandwidth_bps, cell.timeout_ms, cell.tracks, cell.frames_per_group);
      bench::write_scenario_outputs(out_dir, name,
                                    bench::cell_scenario(base, cell.bandwidth_bps, cell.timeout_ms, cell.tracks,
                                                         cell.frames_per_group),
                                    result, o.netsim_log);
      if (o.save_ply) save_reconstructions(out_dir, name, result);
      print_cell(cell);
    });
  }

  std::ofstream out(out_dir / "summary.csv", std::ios::binary);
  if (!out) throw Error("cannot write " + (out_dir / "summary.csv").string());
  bench::write_summary_csv(out, summary);
  if (!summary.warnings.empty()) {
    std::ofstream warn(out_dir / "warnings.txt", std::ios::binary);
    for (const std::string& w : summary.warnings) {
      std::cerr << "warning: " << w << '\n';
      warn << w << '\n';
    }
  }
  return 0;
}

int do_synth(const SynthOptions& o) {
  const fs::path dir(o.out);
  fs::create_directories(dir);
  SyntheticSource source(o.points, o.resolution, o.seed, o.frames, o.point_jitter);
  while (auto cloud = source.next()) {
    save_ply(*cloud, dir / fmt::format("frame_{:05}.ply", cloud->frame_id()),
             o.ascii ? PlyFormat::ascii : PlyFormat::binary_little_endian);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Point-cloud streaming scenarios in virtual time"};
  app.require_subcommand(1);
  // Subcommand options live under a [run] or [synth] section.
  app.set_config("--config", "", "Key-value config file (TOML or INI)");

  RunOptions run;
  CLI::App* run_cmd = app.add_subcommand("run", "Run a scenario grid and write CSV reports");
  run_cmd->fallthrough();
  run_cmd->add_option("--bandwidth-mbps", run.bandwidth_mbps, "Egress bandwidth list")->delimiter(',');
  run_cmd->add_option("--bandwidth-scale", run.bandwidth_scale, "Multiplier applied to every bandwidth")
      ->check(CLI::PositiveNumber);
  run_cmd->add_option("--timeout-ms", run.timeouts_ms, "Delivery timeout list")->delimiter(',');
  run_cmd->add_option("--tracks", run.tracks, "Track count list")->delimiter(',');
  run_cmd->add_option("--fpg", run.fpg, "Frames-per-group list")->delimiter(',');
  run_cmd->add_option("--fps", run.fps, "Capture rate")->check(CLI::PositiveNumber);
  run_cmd->add_option("--frames", run.frames, "Frames per run")->check(CLI::PositiveNumber);
  run_cmd->add_option("--seed", run.seed, "Sampling and synthesis seed");
  auto* dataset = run_cmd->add_option("--dataset", run.dataset, "Directory of PLY frames")->check(CLI::ExistingDirectory);
  run_cmd->add_option("--synthetic-points", run.synthetic_points, "Points per synthetic frame")
      ->check(CLI::PositiveNumber)
      ->excludes(dataset);
  run_cmd->add_option("--point-jitter", run.point_jitter, "Relative spread of synthetic frame sizes")
      ->check(CLI::Range(0.0, 0.99));
  run_cmd->add_option("--resolution", run.resolution, "Voxel grid side length")->check(CLI::Range(1, 65535));
  run_cmd->add_option("--chunk-size", run.chunk_size, "Transport chunk size in bytes");
  run_cmd->add_option("--delay-ms", run.delay_ms, "Egress propagation delay")->check(CLI::NonNegativeNumber);
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_option("--jobs", run.jobs, "Cells run in parallel")->check(CLI::PositiveNumber);
  run_cmd->add_flag("--multi-subscriber", run.multi_subscriber, "One relay serving a subscriber per timeout");
  run_cmd->add_flag("--netsim-log", run.netsim_log, "Also write per-connection transport logs");
  run_cmd->add_flag("--save-ply", run.save_ply, "Write reconstructed frames as PLY");

  SynthOptions synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "Write synthetic frames as a PLY directory");
  synth_cmd->fallthrough();
  synth_cmd->add_option("--points", synth.points, "Points per frame");
  synth_cmd->add_option("--frames", synth.frames, "Frame count");
  synth_cmd->add_option("--point-jitter", synth.point_jitter, "Relative spread of frame sizes")
      ->check(CLI::Range(0.0, 0.99));
  synth_cmd->add_option("--resolution", synth.resolution, "Voxel grid side length")->check(CLI::Range(1, 65535));
  synth_cmd->add_option("--seed", synth.seed, "Seed");
  synth_cmd->add_option("--out", synth.out, "Output directory");
  synth_cmd->add_flag("--ascii", synth.ascii, "Write ascii PLY");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return do_run(run);
    if (*synth_cmd) return do_synth(synth);
  } catch (const pcstream::Error& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "bench: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
