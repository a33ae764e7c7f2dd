#include "pcstream/subscriber.hpp"

#include <algorithm>

#include "pcstream/codec.hpp"
#include "pcstream/errors.hpp"
#include "pcstream/sampler.hpp"

namespace pcstream {

std::optional<double> compute_latency(const LatencyInputs& inputs) {
  if (inputs.encode_ms.empty()) return std::nullopt;
  if (inputs.encode_ms.size() != inputs.transit_ms.size()) {
    throw ValidationError("latency inputs need one transit latency per encode latency");
  }
  const double max_encode = *std::max_element(inputs.encode_ms.begin(), inputs.encode_ms.end());
  const double max_transit = *std::max_element(inputs.transit_ms.begin(), inputs.transit_ms.end());
  return max_encode + std::min(max_transit, inputs.timeout_ms);
}

TrackReader::TrackReader(std::uint8_t track, std::uint16_t frames_per_group) : track_(track), fpg_(frames_per_group) {
  if (fpg_ == 0) throw ValidationError("frames_per_group must be at least 1");
}

std::vector<Notification> TrackReader::on_chunk(std::uint32_t group, ByteView data, netsim::SimTime now) {
  std::vector<Notification> out;
  GroupReader& reader = groups_[group];
  if (reader.broken) return out;

  moq::ObjectStreamParser::FeedResult fed;
  try {
    fed = reader.parser.feed(data);
  } catch (const DecodeError& e) {
    // The rest of this group is unreadable; the close will account for it.
    diagnostics_.push_back("track " + std::to_string(track_) + " group " + std::to_string(group) + ": " + e.what());
    reader.broken = true;
    return out;
  }

  for (moq::ObjectStreamParser::Completed& object : fed.completed) {
    const moq::ObjectHeader& h = object.header;
    const std::uint64_t frame = moq::position_to_frame({group, reader.next_object}, fpg_);
    Notification note;
    note.track = track_;
    note.frame_id = frame;
    note.completed_us = now;

    const bool consistent = h.track_id == track_ && h.group_id == group && h.object_id == reader.next_object &&
                            h.frame_id == frame && reader.next_object < fpg_;
    if (!consistent) {
      diagnostics_.push_back("track " + std::to_string(track_) + " group " + std::to_string(group) +
                             ": object header out of sequence (object " + std::to_string(h.object_id) + ", frame " +
                             std::to_string(h.frame_id) + ")");
      note.kind = Notification::Kind::dropped;
    } else {
      try {
        PointCloud cloud = decode_partition(object.payload);
        if (cloud.frame_id() != frame) throw DecodeError(DecodeErrc::invalid_field, "partition frame id mismatch");
        note.kind = Notification::Kind::received;
        note.payload_bytes = object.payload.size();
        note.cloud = std::move(cloud);
      } catch (const DecodeError& e) {
        diagnostics_.push_back("track " + std::to_string(track_) + " frame " + std::to_string(frame) + ": " + e.what());
        note.kind = Notification::Kind::dropped;
      }
    }
    if (reader.next_object < fpg_) {
      ++reader.next_object;
      out.push_back(std::move(note));
    }
  }
  return out;
}

std::vector<Notification> TrackReader::on_close(std::uint32_t group, netsim::SimTime now) {
  std::vector<Notification> out;
  auto it = groups_.find(group);
  const std::uint16_t first_missing = it == groups_.end() ? 0 : it->second.next_object;
  for (std::uint16_t object = first_missing; object < fpg_; ++object) {
    Notification note;
    note.kind = Notification::Kind::dropped;
    note.track = track_;
    note.frame_id = moq::position_to_frame({group, object}, fpg_);
    note.completed_us = now;
    out.push_back(std::move(note));
  }
  if (it != groups_.end()) groups_.erase(it);
  return out;
}

FrameAssembler::FrameAssembler(std::uint32_t track_count, std::uint32_t timeout_ms, LatencyTaps taps,
                               std::optional<std::uint64_t> expected_frames)
    : track_count_(track_count), timeout_ms_(timeout_ms), taps_(std::move(taps)), expected_frames_(expected_frames) {
  if (track_count_ == 0) throw ValidationError("track count must be at least 1");
}

void FrameAssembler::push(Notification note) {
  if (expected_frames_ && note.frame_id >= *expected_frames_) return;
  if (note.track >= track_count_) {
    diagnostics_.push_back("notification for unknown track " + std::to_string(note.track));
    return;
  }
  if (note.frame_id < next_frame_) {
    diagnostics_.push_back("late notification for emitted frame " + std::to_string(note.frame_id));
    return;
  }
  auto& slots = pending_[note.frame_id];
  if (slots.empty()) slots.resize(track_count_);
  if (slots[note.track]) {
    diagnostics_.push_back("duplicate notification for frame " + std::to_string(note.frame_id) + " track " +
                           std::to_string(note.track));
    return;
  }
  slots[note.track] = std::move(note);

  for (auto it = pending_.begin(); it != pending_.end() && it->first == next_frame_;) {
    const bool complete =
        std::all_of(it->second.begin(), it->second.end(), [](const auto& slot) { return slot.has_value(); });
    if (!complete) break;
    ready_.push_back(assemble(it->first, it->second));
    it = pending_.erase(it);
    ++next_frame_;
  }
}

std::vector<FrameResult> FrameAssembler::take_ready() { return std::exchange(ready_, {}); }

FrameResult FrameAssembler::assemble(std::uint64_t frame_id, std::vector<std::optional<Notification>>& slots) {
  FrameResult result;
  result.frame_id = frame_id;

  std::vector<PointCloud> parts;
  LatencyInputs inputs;
  inputs.timeout_ms = timeout_ms_;
  bool latency_known = true;
  for (std::uint32_t track = 0; track < track_count_; ++track) {
    Notification& note = *slots[track];
    if (note.kind != Notification::Kind::received) continue;
    result.received_tracks.push_back(note.track);
    result.payload_bytes += note.payload_bytes;
    parts.push_back(std::move(*note.cloud));

    const auto encode = taps_.encode_latency_us ? taps_.encode_latency_us(note.track, frame_id) : std::nullopt;
    const auto arrival = taps_.relay_arrival_us ? taps_.relay_arrival_us(note.track, frame_id) : std::nullopt;
    if (!encode || !arrival) {
      latency_known = false;
      continue;
    }
    TrackLatency lat;
    lat.track = note.track;
    lat.encode_ms = static_cast<double>(*encode) / netsim::kMicrosPerMs;
    lat.transit_ms = static_cast<double>(note.completed_us - *arrival) / netsim::kMicrosPerMs;
    inputs.encode_ms.push_back(lat.encode_ms);
    inputs.transit_ms.push_back(lat.transit_ms);
    result.per_track.push_back(lat);
  }

  result.stalled = result.received_tracks.empty();
  result.cloud = result.stalled ? PointCloud(kDefaultResolution, frame_id, {}) : merge(parts);
  if (!result.stalled && latency_known) {
    result.latency_ms = compute_latency(inputs);
    result.measured_latency_ms = *std::max_element(inputs.encode_ms.begin(), inputs.encode_ms.end()) +
                                 *std::max_element(inputs.transit_ms.begin(), inputs.transit_ms.end());
  }
  return result;
}

Subscriber::Subscriber(std::uint32_t id, std::uint32_t timeout_ms, LatencyTaps taps,
                       std::optional<std::uint64_t> expected_frames)
    : id_(id), timeout_ms_(timeout_ms), taps_(std::move(taps)), expected_frames_(expected_frames) {}

void Subscriber::send_subscribe(netsim::Connection& uplink) {
  const netsim::StreamId control = uplink.open_stream(netsim::ControlStream{}, 0);
  uplink.write_chunk(control, moq::encode_message(moq::SubscribeMessage{timeout_ms_}));
}

void Subscriber::on_delivery(const netsim::Delivery& delivery) {
  if (std::holds_alternative<netsim::ControlStream>(delivery.key)) {
    if (delivery.kind != netsim::DeliveryKind::chunk) return;
    control_buffer_.insert(control_buffer_.end(), delivery.data.begin(), delivery.data.end());
    try {
      const moq::DecodedMessage decoded = moq::decode_message(control_buffer_);
      control_buffer_.erase(control_buffer_.begin(),
                            control_buffer_.begin() + static_cast<std::ptrdiff_t>(decoded.consumed));
      const auto* ok = std::get_if<moq::SubscribeOkMessage>(&decoded.message);
      if (ok == nullptr || ok->track_count == 0 || ok->frames_per_group == 0) {
        diagnostics_.push_back("unexpected control message from relay");
        return;
      }
      if (session_) return;
      session_ = *ok;
      for (std::uint8_t t = 0; t < ok->track_count; ++t) readers_.emplace_back(t, ok->frames_per_group);
      assembler_.emplace(ok->track_count, timeout_ms_, taps_, expected_frames_);
    } catch (const DecodeError& e) {
      if (e.code() != DecodeErrc::short_buffer) {
        diagnostics_.push_back(std::string("control stream: ") + e.what());
        control_buffer_.clear();
      }
    }
    return;
  }

  const auto& key = std::get<moq::GroupStreamKey>(delivery.key);
  if (!session_ || key.track_id >= readers_.size()) {
    diagnostics_.push_back("group stream " + netsim::to_string(delivery.key) + " outside the session");
    return;
  }
  TrackReader& reader = readers_[key.track_id];
  std::vector<Notification> notes = delivery.kind == netsim::DeliveryKind::chunk
                                        ? reader.on_chunk(key.group_id, delivery.data, delivery.time_us)
                                        : reader.on_close(key.group_id, delivery.time_us);
  for (Notification& note : notes) assembler_->push(std::move(note));
  for (FrameResult& result : assembler_->take_ready()) results_.push_back(std::move(result));
}

std::size_t Subscriber::unresolved_frames() const noexcept { return assembler_ ? assembler_->buffered_frames() : 0; }

std::vector<std::string> Subscriber::diagnostics() const {
  std::vector<std::string> all = diagnostics_;
  for (const TrackReader& r : readers_) all.insert(all.end(), r.diagnostics().begin(), r.diagnostics().end());
  if (assembler_) all.insert(all.end(), assembler_->diagnostics().begin(), assembler_->diagnostics().end());
  return all;
}

}  // namespace pcstream
