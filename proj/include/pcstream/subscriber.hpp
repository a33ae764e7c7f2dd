#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "pcstream/moq.hpp"
#include "pcstream/netsim.hpp"
#include "pcstream/pointcloud.hpp"

namespace pcstream {

/// Operands of L = max_i E_i + min(max_i D_i, T) over the received objects I.
struct LatencyInputs {
  std::vector<double> encode_ms;   // E_i
  std::vector<double> transit_ms;  // D_i, same length as encode_ms
  double timeout_ms = 0;           // T
};

/// nullopt when I is empty (a stall has no latency).
std::optional<double> compute_latency(const LatencyInputs& inputs);

struct TrackLatency {
  std::uint8_t track = 0;
  double encode_ms = 0;
  double transit_ms = 0;
};

struct FrameResult {
  std::uint64_t frame_id = 0;
  std::vector<std::uint8_t> received_tracks;  // ascending
  PointCloud cloud;
  std::size_t payload_bytes = 0;              // encoded partition bytes of received objects
  std::optional<double> latency_ms;           // compute_latency over received objects
  std::optional<double> measured_latency_ms;  // max E_i + max D_i, unclamped
  bool stalled = false;
  std::vector<TrackLatency> per_track;
};

struct Notification {
  enum class Kind { received, dropped };
  Kind kind = Kind::dropped;
  std::uint8_t track = 0;
  std::uint64_t frame_id = 0;
  std::optional<PointCloud> cloud;
  std::size_t payload_bytes = 0;
  netsim::SimTime completed_us = 0;
};

/// Turns the group-stream events of one track into per-frame notifications.
/// A clean close before the group's last object marks every remaining object
/// of the group as dropped.
class TrackReader {
 public:
  TrackReader(std::uint8_t track, std::uint16_t frames_per_group);

  std::vector<Notification> on_chunk(std::uint32_t group, ByteView data, netsim::SimTime now);
  std::vector<Notification> on_close(std::uint32_t group, netsim::SimTime now);

  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  struct GroupReader {
    moq::ObjectStreamParser parser;
    std::uint16_t next_object = 0;
    bool broken = false;
  };

  std::uint8_t track_;
  std::uint16_t fpg_;
  std::map<std::uint32_t, GroupReader> groups_;
  std::vector<std::string> diagnostics_;
};

/// Where the subscriber obtains E_i and a relay arrival time for an object.
struct LatencyTaps {
  std::function<std::optional<netsim::SimTime>(std::uint8_t track, std::uint64_t frame)> encode_latency_us;
  std::function<std::optional<netsim::SimTime>(std::uint8_t track, std::uint64_t frame)> relay_arrival_us;
};

/// Reconstruction consumer. Collects exactly one notification per (frame,
/// track) and emits FrameResults in frame order once a frame is resolved on
/// every track.
class FrameAssembler {
 public:
  FrameAssembler(std::uint32_t track_count, std::uint32_t timeout_ms, LatencyTaps taps,
                 std::optional<std::uint64_t> expected_frames = std::nullopt);

  void push(Notification note);
  std::vector<FrameResult> take_ready();
  std::size_t buffered_frames() const noexcept { return pending_.size(); }
  std::uint64_t next_frame() const noexcept { return next_frame_; }
  const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

 private:
  FrameResult assemble(std::uint64_t frame_id, std::vector<std::optional<Notification>>& slots);

  std::uint32_t track_count_;
  std::uint32_t timeout_ms_;
  LatencyTaps taps_;
  std::optional<std::uint64_t> expected_frames_;
  std::uint64_t next_frame_ = 0;
  std::map<std::uint64_t, std::vector<std::optional<Notification>>> pending_;
  std::vector<FrameResult> ready_;
  std::vector<std::string> diagnostics_;
};

class Subscriber {
 public:
  Subscriber(std::uint32_t id, std::uint32_t timeout_ms, LatencyTaps taps,
             std::optional<std::uint64_t> expected_frames = std::nullopt);

  std::uint32_t id() const noexcept { return id_; }
  std::uint32_t timeout_ms() const noexcept { return timeout_ms_; }

  void send_subscribe(netsim::Connection& uplink);
  /// Handler for the relay->subscriber connection.
  void on_delivery(const netsim::Delivery& delivery);

  const std::optional<moq::SubscribeOkMessage>& session() const noexcept { return session_; }
  const std::vector<FrameResult>& results() const noexcept { return results_; }
  std::vector<FrameResult> take_results() { return std::move(results_); }
  std::size_t unresolved_frames() const noexcept;
  std::vector<std::string> diagnostics() const;

 private:
  std::uint32_t id_;
  std::uint32_t timeout_ms_;
  LatencyTaps taps_;
  std::optional<std::uint64_t> expected_frames_;
  std::optional<moq::SubscribeOkMessage> session_;
  Bytes control_buffer_;
  std::vector<TrackReader> readers_;
  std::optional<FrameAssembler> assembler_;
  std::vector<FrameResult> results_;
  std::vector<std::string> diagnostics_;
};

}  // namespace pcstream
