#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pcstream/metrics.hpp"
#include "pcstream/netsim.hpp"
#include "pcstream/publisher.hpp"
#include "pcstream/relay.hpp"
#include "pcstream/subscriber.hpp"

namespace pcstream::bench {

struct Scenario {
  /// Relay -> subscriber link, one per subscriber.
  netsim::NetworkProfile egress{300'000'000, 1000};
  /// Publisher -> relay link.
  netsim::NetworkProfile ingress{10'000'000'000, 0};
  /// Subscriber -> relay link (control only).
  netsim::NetworkProfile uplink{10'000'000'000, 1000};
  PublisherConfig publisher;
  std::vector<std::uint32_t> timeouts_ms{1500};
  std::size_t n_frames = 100;
  std::size_t synthetic_points = 10'000;
  /// Relative spread of synthetic frame sizes around synthetic_points.
  double point_jitter = 0.1;
  std::uint32_t resolution = kDefaultResolution;
  std::optional<std::filesystem::path> dataset_dir;
  /// Keep the published frames and the subscribers' FrameResults in the result.
  bool keep_results = false;
};

/// Throws ConfigError.
void validate(const Scenario& scenario);

/// Bits per second the publisher emits for `points`-point frames, counting
/// object headers and codec headers.
double offered_load_bps(const PublisherConfig& config, double points_per_frame);

struct SubscriberRun {
  std::uint32_t id = 0;
  std::uint32_t timeout_ms = 0;
  RunReport report;
  std::vector<FrameResult> results;  // empty unless keep_results
  std::vector<netsim::LogRecord> egress_log;
  std::size_t egress_closures = 0;
  std::size_t unresolved_frames = 0;
  std::vector<std::string> diagnostics;
};

struct ScenarioResult {
  std::size_t frames_published = 0;
  double mean_source_points = 0;
  double offered_load_bps = 0;
  bool truncated_final_group = false;
  std::vector<PointCloud> source_frames;  // empty unless keep_results
  std::vector<SubscriberRun> subscribers;
  std::vector<RelayLogRecord> relay_log;
  std::vector<netsim::LogRecord> ingress_log;
  PublishLog publish_log;
  std::vector<std::string> session_errors;
  std::string relay_csv;
};

/// Deterministic: identical scenarios give identical results.
ScenarioResult run_scenario(const Scenario& scenario);

struct GridSpec {
  std::vector<std::uint64_t> bandwidths_bps;
  std::vector<std::uint32_t> timeouts_ms;
  std::vector<std::uint32_t> tracks;
  std::vector<std::uint32_t> frames_per_group;
};

void validate(const GridSpec& grid);

inline constexpr std::uint32_t kBaselineTimeoutMs = 50;

struct GridCell {
  std::uint64_t bandwidth_bps = 0;
  std::uint32_t timeout_ms = 0;
  std::uint32_t tracks = 0;
  std::uint32_t frames_per_group = 0;
  RunReport report;
  std::optional<double> throughput_delta_pct;
  std::optional<double> quality_delta_pct;
};

struct GridSummary {
  bool has_deltas = false;
  std::vector<GridCell> cells;
  std::vector<std::string> warnings;
};

/// Builds the cell's single-subscriber scenario from `base`.
Scenario cell_scenario(const Scenario& base, std::uint64_t bandwidth_bps, std::uint32_t timeout_ms,
                       std::uint32_t tracks, std::uint32_t frames_per_group);

/// Cells are run independently, `jobs` at a time, and reported in grid
/// order. Deltas are against the 50 ms cell of the same bandwidth, tracks and
/// fpg; a single-cell grid has no delta columns.
GridSummary run_grid(const GridSpec& grid, const Scenario& base, unsigned jobs = 1,
                     const std::function<void(const GridCell&, const ScenarioResult&)>& on_cell = {});

/// Fills the delta columns from each axis's 50 ms cell; warns when it is missing.
void apply_baseline_deltas(GridSummary& summary);

void write_summary_csv(std::ostream& out, const GridSummary& summary);

/// `<bw>_<T>_<K>_<fpg>` with bandwidth in bps.
std::string cell_name(std::uint64_t bandwidth_bps, std::uint32_t timeout_ms, std::uint32_t tracks,
                      std::uint32_t frames_per_group);

/// Writes frames_<name>_s<id>.csv, relay_<name>.csv and report_<name>.json
/// (plus netsim logs when `netsim_logs`) into `dir`.
void write_scenario_outputs(const std::filesystem::path& dir, const std::string& name, const Scenario& scenario,
                            const ScenarioResult& result, bool netsim_logs);

}  // namespace pcstream::bench
