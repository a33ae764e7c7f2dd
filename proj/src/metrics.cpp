#include "pcstream/metrics.hpp"

#include <cmath>
#include <ostream>

#include <fmt/format.h>

#include "pcstream/errors.hpp"
#include "pcstream/kdtree.hpp"
#include "pcstream/subscriber.hpp"

namespace pcstream {

double completeness(const PointCloud& recon, const PointCloud& source) {
  if (source.empty()) throw ValidationError("completeness needs a non-empty source");
  return static_cast<double>(recon.size()) / static_cast<double>(source.size());
}

double directional_mse(std::span<const Point> from, std::span<const Point> to) {
  if (from.empty()) return 0.0;
  const KdTree index(to);
  double sum = 0;
  for (const Point& p : from) sum += index.nearest_sq_distance(p);
  return sum / static_cast<double>(from.size());
}

GeometryQuality geometry_quality(const PointCloud& recon, const PointCloud& source) {
  if (source.empty()) throw ValidationError("geometry quality needs a non-empty source");
  GeometryQuality q;
  if (recon.empty()) return q;

  q.mse = std::max(directional_mse(recon.points(), source.points()), directional_mse(source.points(), recon.points()));
  q.rms = std::sqrt(q.mse);
  if (q.mse == 0) {
    q.psnr_db = kIdenticalPsnrDb;
  } else {
    const double peak = static_cast<double>(source.resolution()) - 1.0;
    q.psnr_db = 10.0 * std::log10(3.0 * peak * peak / q.mse);
  }
  return q;
}

double throughput_bps(std::uint64_t delivered_payload_bytes, double duration_s) {
  if (!(duration_s > 0)) throw ValidationError("throughput needs a positive duration");
  return static_cast<double>(delivered_payload_bytes) * 8.0 / duration_s;
}

std::optional<double> percent_change(double value, double baseline) {
  if (baseline == 0) return std::nullopt;
  return 100.0 * (value - baseline) / baseline;
}

FrameReport score_frame(const FrameResult& result, const PointCloud& source) {
  FrameReport report;
  report.frame_id = result.frame_id;
  report.received_count = result.received_tracks.size();
  report.bytes = result.payload_bytes;
  report.latency_ms = result.latency_ms;
  report.measured_latency_ms = result.measured_latency_ms;
  report.stalled = result.stalled;
  report.completeness = completeness(result.cloud, source);
  const GeometryQuality q = geometry_quality(result.cloud, source);
  report.rms = q.rms;
  report.psnr_db = q.psnr_db;
  report.quality = result.stalled ? 0.0 : q.psnr_db;
  return report;
}

RunAggregates aggregate(std::span<const FrameReport> frames, double duration_s) {
  RunAggregates agg;
  std::uint64_t bytes = 0;
  std::size_t stalls = 0;
  double received = 0;
  double complete = 0;
  double quality_all = 0;
  double quality_live = 0;
  for (const FrameReport& f : frames) {
    bytes += f.bytes;
    received += static_cast<double>(f.received_count);
    complete += f.completeness;
    quality_all += f.quality;
    if (f.stalled) {
      ++stalls;
    } else {
      quality_live += f.quality;
    }
  }
  agg.mean_throughput_bps = throughput_bps(bytes, duration_s);
  if (frames.empty()) return agg;
  const auto n = static_cast<double>(frames.size());
  agg.stall_rate = static_cast<double>(stalls) / n;
  agg.mean_received = received / n;
  agg.mean_completeness = complete / n;
  agg.mean_quality_including_stalls = quality_all / n;
  if (stalls < frames.size()) agg.mean_quality_excluding_stalls = quality_live / static_cast<double>(frames.size() - stalls);
  return agg;
}

RunReport make_run_report(RunConfigEcho config, std::vector<FrameReport> frames, double duration_s) {
  RunReport report;
  report.config = config;
  report.duration_s = duration_s;
  report.frames = std::move(frames);
  report.aggregates = aggregate(report.frames, duration_s);
  return report;
}

std::string format_number(double value, int decimals) { return fmt::format("{:.{}f}", value, decimals); }

std::string format_number(const std::optional<double>& value, int decimals) {
  return value ? format_number(*value, decimals) : std::string("NA");
}

void write_frame_csv(std::ostream& out, std::span<const FrameReport> frames) {
  out << "frame_id,received_count,bytes,L_ms,stalled,completeness,rms,psnr_db\n";
  for (const FrameReport& f : frames) {
    out << f.frame_id << ',' << f.received_count << ',' << f.bytes << ',' << format_number(f.latency_ms, 3) << ','
        << (f.stalled ? 1 : 0) << ',' << format_number(f.completeness) << ',' << format_number(f.rms) << ','
        << format_number(f.psnr_db) << '\n';
  }
}

}  // namespace pcstream
