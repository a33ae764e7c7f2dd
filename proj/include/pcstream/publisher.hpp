#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcstream/moq.hpp"
#include "pcstream/netsim.hpp"
#include "pcstream/pointcloud.hpp"

namespace pcstream {

/// Virtual-time stand-in for measured encoder latency:
/// base_us + per_point_ns * points / 1000, rounded down to whole microseconds.
struct EncodeCostModel {
  netsim::SimTime base_us = 2000;
  std::int64_t per_point_ns = 500;

  netsim::SimTime latency_us(std::size_t points) const {
    return base_us + static_cast<netsim::SimTime>(per_point_ns * static_cast<std::int64_t>(points) / 1000);
  }
};

struct PublisherConfig {
  std::uint32_t track_count = 5;
  std::uint32_t frames_per_group = 5;
  double fps = 20.0;
  std::uint64_t seed = 1;
  std::size_t chunk_size = 64 * 1024;
  EncodeCostModel encode_cost;
};

/// Throws ConfigError.
void validate(const PublisherConfig& config);

/// Capture time of frame `index` relative to the first frame.
netsim::SimTime capture_offset_us(std::size_t index, double fps);

struct EncodeRecord {
  std::uint64_t frame_id = 0;
  std::uint8_t track_id = 0;
  netsim::SimTime encode_latency_us = 0;
  std::size_t payload_bytes = 0;
};

struct StreamLifecycle {
  moq::GroupStreamKey key;
  netsim::SimTime opened_us = 0;
  std::optional<netsim::SimTime> closed_us;
  std::uint32_t objects = 0;
  bool truncated = false;
};

struct TransportFailure {
  std::uint64_t frame_id = 0;
  std::uint8_t track_id = 0;
  std::string what;
};

struct PublishLog {
  std::vector<netsim::SimTime> capture_times_us;
  std::vector<EncodeRecord> encodes;
  std::vector<moq::ObjectHeader> headers;
  std::vector<StreamLifecycle> streams;
  std::vector<TransportFailure> failures;
  bool truncated_final_group = false;
};

class FrameSource {
 public:
  virtual ~FrameSource() = default;
  /// Next frame, or nullopt once exhausted.
  virtual std::optional<PointCloud> next() = 0;
};

/// Frame f is generate_synthetic(n_f, resolution, mix_seed(seed, f), f).
/// With jitter j, n_f is drawn uniformly from [points - round(j points),
/// points + round(j points)], mimicking the size variation of a captured
/// sequence; n_f = points when j = 0.
class SyntheticSource final : public FrameSource {
 public:
  SyntheticSource(std::size_t points, std::uint32_t resolution, std::uint64_t seed,
                  std::optional<std::size_t> limit = std::nullopt, double point_jitter = 0.0);
  std::optional<PointCloud> next() override;

  static PointCloud frame(std::size_t points, std::uint32_t resolution, std::uint64_t seed, std::uint64_t frame_id);
  static std::size_t frame_points(std::size_t points, double point_jitter, std::uint64_t seed, std::uint64_t frame_id);

 private:
  std::size_t points_;
  std::uint32_t resolution_;
  std::uint64_t seed_;
  std::optional<std::size_t> limit_;
  double point_jitter_;
  std::uint64_t next_frame_ = 0;
};

/// *.ply files in lexicographic order; frame ids are assigned 0, 1, 2, ...
class DatasetSource final : public FrameSource {
 public:
  DatasetSource(const std::filesystem::path& dir, std::uint32_t resolution);
  std::optional<PointCloud> next() override;
  std::size_t size() const noexcept { return files_.size(); }

 private:
  std::vector<std::filesystem::path> files_;
  std::uint32_t resolution_;
  std::size_t next_ = 0;
};

class VectorSource final : public FrameSource {
 public:
  explicit VectorSource(std::vector<PointCloud> frames) : frames_(std::move(frames)) {}
  std::optional<PointCloud> next() override;

 private:
  std::vector<PointCloud> frames_;
  std::size_t next_ = 0;
};

/// Partitions, encodes, timestamps and publishes each frame's K
/// representations on per-(track, group) streams of the ingress connection.
class Publisher {
 public:
  Publisher(netsim::Simulator& sim, netsim::Connection& ingress, PublisherConfig config);

  const PublisherConfig& config() const noexcept { return config_; }

  void send_setup(std::uint16_t resolution);

  /// Encodes now; object i is submitted at capture_us + E_i. Objects of one
  /// frame submitted at the same instant go out in ascending track order.
  void publish_frame(const PointCloud& cloud, netsim::SimTime capture_us);

  /// Schedules captures at start_us + i / fps for i in [0, n_frames). Source
  /// exhaustion ends the run early. Open groups of the final frame are closed
  /// after its last submission and flagged as truncated.
  void run(FrameSource& source, std::size_t n_frames, netsim::SimTime start_us);

  const PublishLog& log() const noexcept { return log_; }
  std::optional<netsim::SimTime> encode_latency_us(std::uint8_t track, std::uint64_t frame) const;

 private:
  void capture(std::size_t index);
  void submit(std::uint8_t track, const moq::ObjectHeader& header, const Bytes& payload);
  void maybe_finish();

  netsim::Simulator& sim_;
  netsim::Connection& ingress_;
  PublisherConfig config_;
  PublishLog log_;
  std::map<std::uint8_t, netsim::StreamId> open_groups_;
  std::map<std::uint8_t, std::size_t> open_lifecycle_;
  std::map<std::pair<std::uint8_t, std::uint64_t>, netsim::SimTime> encode_latency_;

  FrameSource* source_ = nullptr;
  std::size_t n_frames_ = 0;
  netsim::SimTime start_us_ = 0;
  std::size_t pending_submissions_ = 0;
  bool source_done_ = false;
  bool finished_ = false;
};

}  // namespace pcstream
