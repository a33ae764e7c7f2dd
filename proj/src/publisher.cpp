#include "pcstream/publisher.hpp"

#include <algorithm>
#include <cmath>

#include "pcstream/codec.hpp"
#include "pcstream/errors.hpp"
#include "pcstream/ply.hpp"
#include "pcstream/random.hpp"
#include "pcstream/sampler.hpp"

namespace pcstream {

void validate(const PublisherConfig& config) {
  if (config.track_count < 1 || config.track_count > 255) throw ConfigError("track count must be in [1, 255]");
  if (config.frames_per_group < 1 || config.frames_per_group > 65535) {
    throw ConfigError("frames per group must be in [1, 65535]");
  }
  if (!(config.fps > 0) || !std::isfinite(config.fps)) throw ConfigError("fps must be positive");
  if (config.chunk_size < moq::kObjectHeaderSize) {
    throw ConfigError("chunk size must hold at least one object header (28 bytes)");
  }
  if (config.encode_cost.base_us < 0 || config.encode_cost.per_point_ns < 0) {
    throw ConfigError("encode cost model must be non-negative");
  }
}

netsim::SimTime capture_offset_us(std::size_t index, double fps) {
  return static_cast<netsim::SimTime>(std::llround(static_cast<double>(index) * 1e6 / fps));
}

SyntheticSource::SyntheticSource(std::size_t points, std::uint32_t resolution, std::uint64_t seed,
                                 std::optional<std::size_t> limit, double point_jitter)
    : points_(points), resolution_(resolution), seed_(seed), limit_(limit), point_jitter_(point_jitter) {
  if (!(point_jitter >= 0.0 && point_jitter < 1.0)) throw ConfigError("point jitter must be in [0, 1)");
}

std::size_t SyntheticSource::frame_points(std::size_t points, double point_jitter, std::uint64_t seed,
                                          std::uint64_t frame_id) {
  const auto spread = static_cast<std::uint64_t>(std::llround(point_jitter * static_cast<double>(points)));
  if (spread == 0) return points;
  std::mt19937_64 rng(mix_seed(~seed, frame_id));
  return points - spread + uniform_below(rng, 2 * spread + 1);
}

PointCloud SyntheticSource::frame(std::size_t points, std::uint32_t resolution, std::uint64_t seed,
                                  std::uint64_t frame_id) {
  return generate_synthetic(points, resolution, mix_seed(seed, frame_id), frame_id);
}

std::optional<PointCloud> SyntheticSource::next() {
  if (limit_ && next_frame_ >= *limit_) return std::nullopt;
  const std::uint64_t f = next_frame_++;
  return frame(frame_points(points_, point_jitter_, seed_, f), resolution_, seed_, f);
}

DatasetSource::DatasetSource(const std::filesystem::path& dir, std::uint32_t resolution) : resolution_(resolution) {
  if (!std::filesystem::is_directory(dir)) throw ConfigError("dataset directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ply") files_.push_back(entry.path());
  }
  std::sort(files_.begin(), files_.end());
  if (files_.empty()) throw ConfigError("dataset directory has no .ply files: " + dir.string());
}

std::optional<PointCloud> DatasetSource::next() {
  if (next_ >= files_.size()) return std::nullopt;
  PlyLoadOptions options;
  options.resolution = resolution_;
  options.frame_id = next_;
  return load_ply(files_[next_++], options);
}

std::optional<PointCloud> VectorSource::next() {
  if (next_ >= frames_.size()) return std::nullopt;
  return frames_[next_++];
}

Publisher::Publisher(netsim::Simulator& sim, netsim::Connection& ingress, PublisherConfig config)
    : sim_(sim), ingress_(ingress), config_(config) {
  validate(config_);
}

void Publisher::send_setup(std::uint16_t resolution) {
  const netsim::StreamId control = ingress_.open_stream(netsim::ControlStream{}, 0);
  moq::SetupMessage setup;
  setup.track_count = static_cast<std::uint8_t>(config_.track_count);
  setup.frames_per_group = static_cast<std::uint16_t>(config_.frames_per_group);
  setup.resolution = resolution;
  ingress_.write_chunk(control, moq::encode_message(setup));
}

std::optional<netsim::SimTime> Publisher::encode_latency_us(std::uint8_t track, std::uint64_t frame) const {
  auto it = encode_latency_.find({track, frame});
  if (it == encode_latency_.end()) return std::nullopt;
  return it->second;
}

void Publisher::publish_frame(const PointCloud& cloud, netsim::SimTime capture_us) {
  const auto fpg = static_cast<std::uint16_t>(config_.frames_per_group);
  const moq::GroupPosition pos = moq::frame_to_position(cloud.frame_id(), fpg);
  const PartitionSet parts = partition(cloud, config_.track_count, config_.seed);
  log_.capture_times_us.push_back(capture_us);

  for (std::uint32_t i = 0; i < config_.track_count; ++i) {
    const auto track = static_cast<std::uint8_t>(i);
    Bytes payload = encode_partition(parts.partitions[i]);
    const netsim::SimTime encode_us = config_.encode_cost.latency_us(parts.partitions[i].size());
    log_.encodes.push_back({cloud.frame_id(), track, encode_us, payload.size()});
    encode_latency_[{track, cloud.frame_id()}] = encode_us;

    moq::ObjectHeader header;
    header.track_id = track;
    header.group_id = pos.group_id;
    header.object_id = pos.object_id;
    header.frame_id = cloud.frame_id();
    header.publisher_timestamp_us = static_cast<std::uint64_t>(capture_us);
    header.payload_len = static_cast<std::uint32_t>(payload.size());

    ++pending_submissions_;
    sim_.schedule_at(std::max(capture_us + encode_us, sim_.now()),
                     [this, track, header, payload = std::move(payload)] {
                       --pending_submissions_;
                       submit(track, header, payload);
                       maybe_finish();
                     });
  }
}

void Publisher::submit(std::uint8_t track, const moq::ObjectHeader& header, const Bytes& payload) {
  try {
    if (header.object_id == 0) {
      const moq::GroupStreamKey key{track, header.group_id};
      open_groups_[track] = ingress_.open_stream(key, moq::track_priority(track));
      log_.streams.push_back({key, sim_.now(), std::nullopt, 0, false});
      open_lifecycle_[track] = log_.streams.size() - 1;
    }
    auto stream = open_groups_.find(track);
    if (stream == open_groups_.end()) throw TransportError("no open group stream for track " + std::to_string(track));

    Bytes record = moq::encode_message(header);
    record.insert(record.end(), payload.begin(), payload.end());
    for (std::size_t offset = 0; offset < record.size(); offset += config_.chunk_size) {
      const std::size_t end = std::min(record.size(), offset + config_.chunk_size);
      ingress_.write_chunk(stream->second, Bytes(record.begin() + static_cast<std::ptrdiff_t>(offset),
                                                 record.begin() + static_cast<std::ptrdiff_t>(end)));
    }
    log_.headers.push_back(header);
    ++log_.streams[open_lifecycle_[track]].objects;

    if (header.object_id + 1U == config_.frames_per_group) {
      ingress_.close_stream(stream->second);
      log_.streams[open_lifecycle_[track]].closed_us = sim_.now();
      open_groups_.erase(stream);
      open_lifecycle_.erase(track);
    }
  } catch (const TransportError& e) {
    log_.failures.push_back({header.frame_id, track, e.what()});
  }
}

void Publisher::run(FrameSource& source, std::size_t n_frames, netsim::SimTime start_us) {
  source_ = &source;
  n_frames_ = n_frames;
  start_us_ = start_us;
  source_done_ = n_frames == 0;
  finished_ = n_frames == 0;
  if (n_frames == 0) return;
  sim_.schedule_at(start_us, [this] { capture(0); });
}

void Publisher::capture(std::size_t index) {
  std::optional<PointCloud> cloud = source_->next();
  if (!cloud) {
    source_done_ = true;
    maybe_finish();
    return;
  }
  publish_frame(*cloud, sim_.now());
  if (index + 1 < n_frames_) {
    sim_.schedule_at(start_us_ + capture_offset_us(index + 1, config_.fps), [this, index] { capture(index + 1); });
  } else {
    source_done_ = true;
  }
}

void Publisher::maybe_finish() {
  if (finished_ || !source_done_ || pending_submissions_ > 0) return;
  finished_ = true;
  for (auto& [track, stream] : open_groups_) {
    ingress_.close_stream(stream);
    StreamLifecycle& lifecycle = log_.streams[open_lifecycle_[track]];
    lifecycle.closed_us = sim_.now();
    lifecycle.truncated = true;
    log_.truncated_final_group = true;
  }
  open_groups_.clear();
  open_lifecycle_.clear();
}

}  // namespace pcstream
