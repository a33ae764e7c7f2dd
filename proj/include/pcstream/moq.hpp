#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "pcstream/bytes.hpp"

namespace pcstream::moq {

enum class MessageType : std::uint8_t {
  setup = 1,
  subscribe = 2,
  subscribe_ok = 3,
  object_header = 4,
};

// Fixed little-endian layouts; the leading byte is the MessageType tag.
inline constexpr std::size_t kSetupSize = 6;         // tag, track_count u8, fpg u16, resolution u16
inline constexpr std::size_t kSubscribeSize = 5;     // tag, delivery_timeout_ms u32
inline constexpr std::size_t kSubscribeOkSize = 4;   // tag, track_count u8, fpg u16
inline constexpr std::size_t kObjectHeaderSize = 28; // tag, track u8, group u32, object u16, frame u64, ts u64, len u32

struct SetupMessage {
  std::uint8_t track_count = 0;
  std::uint16_t frames_per_group = 0;
  std::uint16_t resolution = 0;
  friend bool operator==(const SetupMessage&, const SetupMessage&) = default;
};

/// Always addresses every announced track.
struct SubscribeMessage {
  std::uint32_t delivery_timeout_ms = 0;
  friend bool operator==(const SubscribeMessage&, const SubscribeMessage&) = default;
};

struct SubscribeOkMessage {
  std::uint8_t track_count = 0;
  std::uint16_t frames_per_group = 0;
  friend bool operator==(const SubscribeOkMessage&, const SubscribeOkMessage&) = default;
};

struct ObjectHeader {
  std::uint8_t track_id = 0;
  std::uint32_t group_id = 0;
  std::uint16_t object_id = 0;
  std::uint64_t frame_id = 0;
  std::uint64_t publisher_timestamp_us = 0;
  std::uint32_t payload_len = 0;
  friend bool operator==(const ObjectHeader&, const ObjectHeader&) = default;
};

using Message = std::variant<SetupMessage, SubscribeMessage, SubscribeOkMessage, ObjectHeader>;

Bytes encode_message(const Message& msg);

struct DecodedMessage {
  Message message;
  std::size_t consumed = 0;
};

/// Decodes one message from the front of `bytes`. Purely structural: field
/// values are not range-checked here. Throws DecodeError on an unknown tag or
/// a short buffer.
DecodedMessage decode_message(ByteView bytes);

struct GroupPosition {
  std::uint32_t group_id = 0;
  std::uint16_t object_id = 0;
  friend bool operator==(const GroupPosition&, const GroupPosition&) = default;
};

GroupPosition frame_to_position(std::uint64_t frame_id, std::uint16_t frames_per_group);
std::uint64_t position_to_frame(GroupPosition pos, std::uint16_t frames_per_group);

struct GroupStreamKey {
  std::uint8_t track_id = 0;
  std::uint32_t group_id = 0;
  friend auto operator<=>(const GroupStreamKey&, const GroupStreamKey&) = default;
};

/// Lower track id is served first.
constexpr std::uint32_t track_priority(std::uint8_t track_id) { return track_id; }

/// Incremental parser for a group stream: a concatenation of
/// (OBJECT_HEADER message, payload) records split at arbitrary byte offsets.
class ObjectStreamParser {
 public:
  struct Completed {
    ObjectHeader header;
    Bytes payload;
  };

  struct FeedResult {
    std::vector<ObjectHeader> started;
    std::vector<Completed> completed;
  };

  /// Throws DecodeError if the stream carries something other than object records.
  FeedResult feed(ByteView chunk);

  /// True when the next byte fed starts a new object record.
  bool at_object_boundary() const noexcept { return header_buf_.empty() && !current_; }
  const std::optional<ObjectHeader>& current() const noexcept { return current_; }
  /// Bytes of the current record (header included) consumed so far.
  std::size_t offset_in_object() const noexcept;

 private:
  Bytes header_buf_;
  std::optional<ObjectHeader> current_;
  Bytes payload_;
};

}  // namespace pcstream::moq
