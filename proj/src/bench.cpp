#include "pcstream/bench.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

#include "pcstream/codec.hpp"
#include "pcstream/errors.hpp"

namespace pcstream::bench {
namespace {

class RecordingSource final : public FrameSource {
 public:
  explicit RecordingSource(FrameSource& inner) : inner_(inner) {}

  std::optional<PointCloud> next() override {
    std::optional<PointCloud> cloud = inner_.next();
    if (cloud) frames_.push_back(*cloud);
    return cloud;
  }

  const std::vector<PointCloud>& frames() const noexcept { return frames_; }

 private:
  FrameSource& inner_;
  std::vector<PointCloud> frames_;
};

template <typename T>
void require_positive(const std::vector<T>& values, const char* what) {
  if (values.empty()) throw ConfigError(fmt::format("grid: {} list is empty", what));
  for (const T& v : values) {
    if (v == 0) throw ConfigError(fmt::format("grid: {} values must be positive", what));
  }
}

}  // namespace

void validate(const Scenario& scenario) {
  netsim::validate(scenario.egress);
  netsim::validate(scenario.ingress);
  netsim::validate(scenario.uplink);
  validate(scenario.publisher);
  if (scenario.timeouts_ms.empty()) throw ConfigError("scenario needs at least one subscriber");
  for (std::uint32_t t : scenario.timeouts_ms) {
    if (t == 0) throw ConfigError("delivery timeout must be positive");
  }
  if (scenario.n_frames == 0) throw ConfigError("frame count must be positive");
  if (scenario.resolution == 0 || scenario.resolution > 65535) throw ConfigError("resolution must be in [1, 65535]");
  if (!scenario.dataset_dir && scenario.synthetic_points == 0) throw ConfigError("synthetic point count must be positive");
  if (!(scenario.point_jitter >= 0.0 && scenario.point_jitter < 1.0)) throw ConfigError("point jitter must be in [0, 1)");
  if (scenario.dataset_dir && !std::filesystem::is_directory(*scenario.dataset_dir)) {
    throw ConfigError("dataset directory not found: " + scenario.dataset_dir->string());
  }
}

double offered_load_bps(const PublisherConfig& config, double points_per_frame) {
  const double per_frame = static_cast<double>(config.track_count) *
                               static_cast<double>(moq::kObjectHeaderSize + kPartitionHeaderSize) +
                           static_cast<double>(kPointRecordSize) * points_per_frame;
  return config.fps * 8.0 * per_frame;
}

ScenarioResult run_scenario(const Scenario& scenario) {
  validate(scenario);

  std::unique_ptr<FrameSource> base_source;
  std::size_t expected = scenario.n_frames;
  if (scenario.dataset_dir) {
    auto dataset = std::make_unique<DatasetSource>(*scenario.dataset_dir, scenario.resolution);
    expected = std::min(expected, dataset->size());
    base_source = std::move(dataset);
  } else {
    base_source = std::make_unique<SyntheticSource>(scenario.synthetic_points, scenario.resolution,
                                                    scenario.publisher.seed, std::nullopt, scenario.point_jitter);
  }
  RecordingSource source(*base_source);

  netsim::Simulator sim;
  Relay relay(sim);
  netsim::Connection& ingress =
      sim.add_connection("ingress", scenario.ingress, [&relay](const netsim::Delivery& d) { relay.on_publisher_delivery(d); });
  Publisher publisher(sim, ingress, scenario.publisher);

  LatencyTaps taps;
  taps.encode_latency_us = [&publisher](std::uint8_t track, std::uint64_t frame) {
    return publisher.encode_latency_us(track, frame);
  };
  taps.relay_arrival_us = [&relay](std::uint8_t track, std::uint64_t frame) { return relay.arrival_us(track, frame); };

  std::vector<std::unique_ptr<Subscriber>> subscribers;
  std::vector<netsim::Connection*> egress;
  std::vector<netsim::Connection*> uplinks;
  for (std::size_t i = 0; i < scenario.timeouts_ms.size(); ++i) {
    const auto id = static_cast<std::uint32_t>(i);
    subscribers.push_back(std::make_unique<Subscriber>(id, scenario.timeouts_ms[i], taps, expected));
    Subscriber* sub = subscribers.back().get();
    egress.push_back(&sim.add_connection(fmt::format("egress{}", id), scenario.egress,
                                         [sub](const netsim::Delivery& d) { sub->on_delivery(d); }));
    relay.attach_subscriber(id, *egress.back());
    uplinks.push_back(&sim.add_connection(fmt::format("uplink{}", id), scenario.uplink,
                                          [&relay, id](const netsim::Delivery& d) { relay.on_subscriber_delivery(id, d); }));
  }

  publisher.send_setup(static_cast<std::uint16_t>(scenario.resolution));
  sim.run_until_idle();
  for (std::size_t i = 0; i < subscribers.size(); ++i) subscribers[i]->send_subscribe(*uplinks[i]);
  sim.run_until_idle();
  for (const auto& sub : subscribers) {
    if (!sub->session()) {
      std::string why = relay.session_errors().empty() ? "no SUBSCRIBE_OK" : relay.session_errors().back();
      throw SessionError(fmt::format("subscriber {} not established: {}", sub->id(), why));
    }
  }

  publisher.run(source, scenario.n_frames, sim.now());
  sim.run_until_idle();

  ScenarioResult result;
  result.frames_published = source.frames().size();
  result.truncated_final_group = publisher.log().truncated_final_group;
  double total_points = 0;
  for (const PointCloud& f : source.frames()) total_points += static_cast<double>(f.size());
  if (!source.frames().empty()) result.mean_source_points = total_points / static_cast<double>(source.frames().size());
  result.offered_load_bps = offered_load_bps(scenario.publisher, result.mean_source_points);

  const double duration_s = static_cast<double>(result.frames_published) / scenario.publisher.fps;
  for (std::size_t i = 0; i < subscribers.size(); ++i) {
    Subscriber& sub = *subscribers[i];
    SubscriberRun run;
    run.id = sub.id();
    run.timeout_ms = sub.timeout_ms();
    run.unresolved_frames = sub.unresolved_frames();
    run.diagnostics = sub.diagnostics();
    run.egress_log = egress[i]->log();
    run.egress_closures = egress[i]->closures();

    std::vector<FrameResult> results = sub.take_results();
    std::vector<FrameReport> frames;
    frames.reserve(results.size());
    for (const FrameResult& r : results) {
      if (r.frame_id >= source.frames().size()) {
        run.diagnostics.push_back(fmt::format("result for unpublished frame {}", r.frame_id));
        continue;
      }
      frames.push_back(score_frame(r, source.frames()[r.frame_id]));
    }
    RunConfigEcho echo{scenario.egress.bandwidth_bps, run.timeout_ms, scenario.publisher.track_count,
                       scenario.publisher.frames_per_group};
    run.report = make_run_report(echo, std::move(frames), duration_s);
    if (scenario.keep_results) run.results = std::move(results);
    result.subscribers.push_back(std::move(run));
  }

  result.relay_log = relay.log();
  result.ingress_log = ingress.log();
  result.publish_log = publisher.log();
  result.session_errors = relay.session_errors();
  if (scenario.keep_results) result.source_frames = source.frames();
  std::ostringstream relay_csv;
  relay.write_log_csv(relay_csv);
  result.relay_csv = relay_csv.str();
  return result;
}

void validate(const GridSpec& grid) {
  require_positive(grid.bandwidths_bps, "bandwidth");
  require_positive(grid.timeouts_ms, "timeout");
  require_positive(grid.tracks, "tracks");
  require_positive(grid.frames_per_group, "fpg");
}

Scenario cell_scenario(const Scenario& base, std::uint64_t bandwidth_bps, std::uint32_t timeout_ms,
                       std::uint32_t tracks, std::uint32_t frames_per_group) {
  Scenario s = base;
  s.egress.bandwidth_bps = bandwidth_bps;
  s.timeouts_ms = {timeout_ms};
  s.publisher.track_count = tracks;
  s.publisher.frames_per_group = frames_per_group;
  return s;
}

GridSummary run_grid(const GridSpec& grid, const Scenario& base, unsigned jobs,
                     const std::function<void(const GridCell&, const ScenarioResult&)>& on_cell) {
  validate(grid);

  GridSummary summary;
  for (std::uint64_t bw : grid.bandwidths_bps) {
    for (std::uint32_t k : grid.tracks) {
      for (std::uint32_t fpg : grid.frames_per_group) {
        for (std::uint32_t t : grid.timeouts_ms) {
          GridCell cell;
          cell.bandwidth_bps = bw;
          cell.timeout_ms = t;
          cell.tracks = k;
          cell.frames_per_group = fpg;
          summary.cells.push_back(std::move(cell));
        }
      }
    }
  }
  for (const GridCell& c : summary.cells) {
    validate(cell_scenario(base, c.bandwidth_bps, c.timeout_ms, c.tracks, c.frames_per_group));
  }

  std::atomic<std::size_t> next{0};
  std::mutex mu;
  std::exception_ptr failure;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= summary.cells.size()) return;
      {
        std::lock_guard lock(mu);
        if (failure) return;
      }
      GridCell& cell = summary.cells[i];
      try {
        ScenarioResult result =
            run_scenario(cell_scenario(base, cell.bandwidth_bps, cell.timeout_ms, cell.tracks, cell.frames_per_group));
        cell.report = result.subscribers.front().report;
        if (on_cell) {
          std::lock_guard lock(mu);
          on_cell(cell, result);
        }
      } catch (...) {
        std::lock_guard lock(mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const unsigned n_workers = std::max(1U, std::min<unsigned>(jobs, static_cast<unsigned>(summary.cells.size())));
  if (n_workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  apply_baseline_deltas(summary);
  return summary;
}

void apply_baseline_deltas(GridSummary& summary) {
  summary.has_deltas = summary.cells.size() > 1;
  if (!summary.has_deltas) return;

  using Axis = std::tuple<std::uint64_t, std::uint32_t, std::uint32_t>;
  std::map<Axis, const GridCell*> baselines;
  for (const GridCell& c : summary.cells) {
    if (c.timeout_ms == kBaselineTimeoutMs) baselines[{c.bandwidth_bps, c.tracks, c.frames_per_group}] = &c;
  }
  std::map<Axis, bool> warned;
  for (GridCell& c : summary.cells) {
    const Axis axis{c.bandwidth_bps, c.tracks, c.frames_per_group};
    auto it = baselines.find(axis);
    if (it == baselines.end()) {
      if (!warned[axis]) {
        summary.warnings.push_back(fmt::format("no {} ms baseline for bandwidth={} tracks={} fpg={}; deltas omitted",
                                               kBaselineTimeoutMs, c.bandwidth_bps, c.tracks, c.frames_per_group));
        warned[axis] = true;
      }
      continue;
    }
    const RunAggregates& base_agg = it->second->report.aggregates;
    const RunAggregates& agg = c.report.aggregates;
    c.throughput_delta_pct = percent_change(agg.mean_throughput_bps, base_agg.mean_throughput_bps);
    if (agg.mean_quality_excluding_stalls && base_agg.mean_quality_excluding_stalls) {
      c.quality_delta_pct = percent_change(*agg.mean_quality_excluding_stalls, *base_agg.mean_quality_excluding_stalls);
    }
  }
}

void write_summary_csv(std::ostream& out, const GridSummary& summary) {
  out << "bandwidth_bps,timeout_ms,tracks,fpg,frames,mean_throughput_bps,stall_rate,mean_received,mean_completeness,"
         "mean_quality_excluding_stalls,mean_quality_including_stalls";
  if (summary.has_deltas) out << ",throughput_delta_pct,quality_delta_pct";
  out << '\n';
  for (const GridCell& c : summary.cells) {
    const RunAggregates& a = c.report.aggregates;
    out << c.bandwidth_bps << ',' << c.timeout_ms << ',' << c.tracks << ',' << c.frames_per_group << ','
        << c.report.frames.size() << ',' << format_number(a.mean_throughput_bps, 3) << ','
        << format_number(a.stall_rate) << ',' << format_number(a.mean_received) << ','
        << format_number(a.mean_completeness) << ',' << format_number(a.mean_quality_excluding_stalls) << ','
        << format_number(a.mean_quality_including_stalls);
    if (summary.has_deltas) {
      out << ',' << format_number(c.throughput_delta_pct, 3) << ',' << format_number(c.quality_delta_pct, 3);
    }
    out << '\n';
  }
}

std::string cell_name(std::uint64_t bandwidth_bps, std::uint32_t timeout_ms, std::uint32_t tracks,
                      std::uint32_t frames_per_group) {
  return fmt::format("{}_{}_{}_{}", bandwidth_bps, timeout_ms, tracks, frames_per_group);
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void write_scenario_outputs(const std::filesystem::path& dir, const std::string& name, const Scenario& scenario,
                            const ScenarioResult& result, bool netsim_logs) {
  std::filesystem::create_directories(dir);

  for (const SubscriberRun& run : result.subscribers) {
    auto out = open_output(dir / fmt::format("frames_{}_s{}.csv", name, run.id));
    write_frame_csv(out, run.report.frames);
  }
  {
    auto out = open_output(dir / fmt::format("relay_{}.csv", name));
    out << result.relay_csv;
  }
  if (netsim_logs) {
    auto out = open_output(dir / fmt::format("netsim_{}_ingress.csv", name));
    netsim::Connection::write_log_csv(out, result.ingress_log);
    for (const SubscriberRun& run : result.subscribers) {
      auto sout = open_output(dir / fmt::format("netsim_{}_egress{}.csv", name, run.id));
      netsim::Connection::write_log_csv(sout, run.egress_log);
    }
  }

  nlohmann::ordered_json report;
  report["egress_bandwidth_bps"] = scenario.egress.bandwidth_bps;
  report["egress_delay_us"] = scenario.egress.propagation_delay_us;
  report["tracks"] = scenario.publisher.track_count;
  report["fpg"] = scenario.publisher.frames_per_group;
  report["fps"] = scenario.publisher.fps;
  report["seed"] = scenario.publisher.seed;
  report["chunk_size"] = scenario.publisher.chunk_size;
  report["source"] = scenario.dataset_dir ? "dataset" : "synthetic";
  if (!scenario.dataset_dir) {
    report["synthetic_points"] = scenario.synthetic_points;
    report["point_jitter"] = scenario.point_jitter;
  }
  report["resolution"] = scenario.resolution;
  report["frames_requested"] = scenario.n_frames;
  report["frames_published"] = result.frames_published;
  report["frame_policy"] = "truncate";
  report["truncated_final_group"] = result.truncated_final_group;
  report["offered_load_bps"] = result.offered_load_bps;
  nlohmann::ordered_json subs = nlohmann::ordered_json::array();
  for (const SubscriberRun& run : result.subscribers) {
    const RunAggregates& a = run.report.aggregates;
    nlohmann::ordered_json s;
    s["id"] = run.id;
    s["timeout_ms"] = run.timeout_ms;
    s["frames"] = run.report.frames.size();
    s["mean_throughput_bps"] = a.mean_throughput_bps;
    s["stall_rate"] = a.stall_rate;
    s["mean_received"] = a.mean_received;
    s["mean_completeness"] = a.mean_completeness;
    s["mean_quality_excluding_stalls"] = optional_json(a.mean_quality_excluding_stalls);
    s["mean_quality_including_stalls"] = a.mean_quality_including_stalls;
    s["unresolved_frames"] = run.unresolved_frames;
    s["connection_closures"] = run.egress_closures;
    s["diagnostics"] = run.diagnostics;
    subs.push_back(std::move(s));
  }
  report["subscribers"] = std::move(subs);
  report["session_errors"] = result.session_errors;

  auto out = open_output(dir / fmt::format("report_{}.json", name));
  out << report.dump(2) << '\n';
}

}  // namespace pcstream::bench
