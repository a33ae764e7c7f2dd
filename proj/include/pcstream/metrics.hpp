#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pcstream/pointcloud.hpp"

namespace pcstream {

struct FrameResult;

/// PSNR reported when the reconstruction is geometrically identical to the source.
inline constexpr double kIdenticalPsnrDb = 100.0;

/// |recon| / |source|. Throws ValidationError for an empty source.
double completeness(const PointCloud& recon, const PointCloud& source);

struct GeometryQuality {
  std::optional<double> rms;  // voxel units; nullopt for an empty reconstruction
  double psnr_db = 0;         // 0 for an empty reconstruction
  double mse = 0;
};

/// Mean over `from` of the squared distance to the nearest point of `to`.
double directional_mse(std::span<const Point> from, std::span<const Point> to);

/// Symmetric point-to-point error: mse = max of the two directional means,
/// psnr = 10 log10(3 (R-1)^2 / mse) with R the source resolution.
GeometryQuality geometry_quality(const PointCloud& recon, const PointCloud& source);

/// Completed-object payload bytes * 8 / duration. Throws for duration <= 0.
double throughput_bps(std::uint64_t delivered_payload_bytes, double duration_s);

/// 100 (value - baseline) / baseline; nullopt when baseline is 0.
std::optional<double> percent_change(double value, double baseline);

struct FrameReport {
  std::uint64_t frame_id = 0;
  std::size_t received_count = 0;
  std::uint64_t bytes = 0;
  std::optional<double> latency_ms;
  std::optional<double> measured_latency_ms;
  bool stalled = false;
  double completeness = 0;
  std::optional<double> rms;
  double psnr_db = 0;
  /// Generic quality column; currently psnr_db, 0 for stalls.
  double quality = 0;
};

FrameReport score_frame(const FrameResult& result, const PointCloud& source);

struct RunConfigEcho {
  std::uint64_t bandwidth_bps = 0;
  std::uint32_t timeout_ms = 0;
  std::uint32_t tracks = 0;
  std::uint32_t frames_per_group = 0;
};

struct RunAggregates {
  double mean_throughput_bps = 0;
  double stall_rate = 0;
  double mean_received = 0;
  double mean_completeness = 0;
  std::optional<double> mean_quality_excluding_stalls;
  double mean_quality_including_stalls = 0;
};

struct RunReport {
  RunConfigEcho config;
  double duration_s = 0;
  std::vector<FrameReport> frames;
  RunAggregates aggregates;
};

/// Pure function of the frame table.
RunAggregates aggregate(std::span<const FrameReport> frames, double duration_s);
RunReport make_run_report(RunConfigEcho config, std::vector<FrameReport> frames, double duration_s);

/// CSV: frame_id,received_count,bytes,L_ms,stalled,completeness,rms,psnr_db
void write_frame_csv(std::ostream& out, std::span<const FrameReport> frames);

/// Fixed-point text used for every floating value in CSV output; "NA" for nullopt.
std::string format_number(double value, int decimals = 6);
std::string format_number(const std::optional<double>& value, int decimals = 6);

}  // namespace pcstream
