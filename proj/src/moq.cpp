#include "pcstream/moq.hpp"

#include <string>

#include "pcstream/errors.hpp"

namespace pcstream::moq {
namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

void require(ByteView bytes, std::size_t need, const char* what) {
  if (bytes.size() < need) {
    throw DecodeError(DecodeErrc::short_buffer, std::string(what) + " needs " + std::to_string(need) +
                                                    " bytes, got " + std::to_string(bytes.size()));
  }
}

}  // namespace

Bytes encode_message(const Message& msg) {
  Bytes out;
  std::visit(Overloaded{
                 [&](const SetupMessage& m) {
                   out.push_back(static_cast<std::uint8_t>(MessageType::setup));
                   out.push_back(m.track_count);
                   put_le(out, m.frames_per_group);
                   put_le(out, m.resolution);
                 },
                 [&](const SubscribeMessage& m) {
                   out.push_back(static_cast<std::uint8_t>(MessageType::subscribe));
                   put_le(out, m.delivery_timeout_ms);
                 },
                 [&](const SubscribeOkMessage& m) {
                   out.push_back(static_cast<std::uint8_t>(MessageType::subscribe_ok));
                   out.push_back(m.track_count);
                   put_le(out, m.frames_per_group);
                 },
                 [&](const ObjectHeader& m) {
                   out.push_back(static_cast<std::uint8_t>(MessageType::object_header));
                   out.push_back(m.track_id);
                   put_le(out, m.group_id);
                   put_le(out, m.object_id);
                   put_le(out, m.frame_id);
                   put_le(out, m.publisher_timestamp_us);
                   put_le(out, m.payload_len);
                 },
             },
             msg);
  return out;
}

DecodedMessage decode_message(ByteView bytes) {
  require(bytes, 1, "message tag");
  switch (static_cast<MessageType>(bytes[0])) {
    case MessageType::setup: {
      require(bytes, kSetupSize, "SETUP");
      SetupMessage m;
      m.track_count = bytes[1];
      m.frames_per_group = get_le<std::uint16_t>(bytes, 2);
      m.resolution = get_le<std::uint16_t>(bytes, 4);
      return {m, kSetupSize};
    }
    case MessageType::subscribe: {
      require(bytes, kSubscribeSize, "SUBSCRIBE");
      SubscribeMessage m;
      m.delivery_timeout_ms = get_le<std::uint32_t>(bytes, 1);
      return {m, kSubscribeSize};
    }
    case MessageType::subscribe_ok: {
      require(bytes, kSubscribeOkSize, "SUBSCRIBE_OK");
      SubscribeOkMessage m;
      m.track_count = bytes[1];
      m.frames_per_group = get_le<std::uint16_t>(bytes, 2);
      return {m, kSubscribeOkSize};
    }
    case MessageType::object_header: {
      require(bytes, kObjectHeaderSize, "OBJECT_HEADER");
      ObjectHeader m;
      m.track_id = bytes[1];
      m.group_id = get_le<std::uint32_t>(bytes, 2);
      m.object_id = get_le<std::uint16_t>(bytes, 6);
      m.frame_id = get_le<std::uint64_t>(bytes, 8);
      m.publisher_timestamp_us = get_le<std::uint64_t>(bytes, 16);
      m.payload_len = get_le<std::uint32_t>(bytes, 24);
      return {m, kObjectHeaderSize};
    }
  }
  throw DecodeError(DecodeErrc::unknown_message_type, "tag " + std::to_string(bytes[0]));
}

GroupPosition frame_to_position(std::uint64_t frame_id, std::uint16_t frames_per_group) {
  if (frames_per_group == 0) throw ValidationError("frames_per_group must be at least 1");
  const std::uint64_t group = frame_id / frames_per_group;
  if (group > UINT32_MAX) throw ValidationError("frame " + std::to_string(frame_id) + " overflows 32-bit group id");
  return {static_cast<std::uint32_t>(group), static_cast<std::uint16_t>(frame_id % frames_per_group)};
}

std::uint64_t position_to_frame(GroupPosition pos, std::uint16_t frames_per_group) {
  return std::uint64_t{pos.group_id} * frames_per_group + pos.object_id;
}

std::size_t ObjectStreamParser::offset_in_object() const noexcept {
  return current_ ? kObjectHeaderSize + payload_.size() : header_buf_.size();
}

ObjectStreamParser::FeedResult ObjectStreamParser::feed(ByteView chunk) {
  FeedResult result;
  std::size_t pos = 0;
  while (pos < chunk.size()) {
    if (!current_) {
      const std::size_t take = std::min(kObjectHeaderSize - header_buf_.size(), chunk.size() - pos);
      header_buf_.insert(header_buf_.end(), chunk.begin() + pos, chunk.begin() + pos + take);
      pos += take;
      if (header_buf_.size() < kObjectHeaderSize) break;
      const DecodedMessage decoded = decode_message(header_buf_);
      const auto* header = std::get_if<ObjectHeader>(&decoded.message);
      if (header == nullptr) throw DecodeError(DecodeErrc::invalid_field, "group stream carries a control message");
      current_ = *header;
      header_buf_.clear();
      payload_.clear();
      payload_.reserve(header->payload_len);
      result.started.push_back(*header);
    }
    const std::size_t take = std::min<std::size_t>(current_->payload_len - payload_.size(), chunk.size() - pos);
    payload_.insert(payload_.end(), chunk.begin() + pos, chunk.begin() + pos + take);
    pos += take;
    if (payload_.size() == current_->payload_len) {
      result.completed.push_back({*current_, std::move(payload_)});
      payload_ = Bytes{};
      current_.reset();
    }
  }
  return result;
}

}  // namespace pcstream::moq
