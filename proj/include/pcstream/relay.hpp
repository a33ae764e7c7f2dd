#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "pcstream/moq.hpp"
#include "pcstream/netsim.hpp"

namespace pcstream {

enum class RelayEvent { forwarded, timeout_close };

const char* to_string(RelayEvent event) noexcept;

struct RelayLogRecord {
  netsim::SimTime time_us = 0;
  std::uint32_t subscriber = 0;
  std::uint8_t track = 0;
  std::uint32_t group = 0;
  std::uint16_t object = 0;
  /// Byte offset within the object record where the chunk (or the abandoned remainder) starts.
  std::size_t offset = 0;
  std::size_t bytes = 0;
  /// now - relay arrival of the object's first chunk.
  netsim::SimTime elapsed_us = 0;
  RelayEvent event = RelayEvent::forwarded;
};

/// Fans publisher objects out to every subscriber and polices each
/// subscriber's delivery timeout on its own egress connection. When the
/// object at the head of a group's egress queue has been at the relay for
/// longer than the timeout at a chunk boundary, that group's egress stream is
/// closed cleanly and the rest of the group is discarded for that subscriber;
/// forwarding resumes with the track's next group.
class Relay {
 public:
  explicit Relay(netsim::Simulator& sim);
  ~Relay();
  Relay(const Relay&) = delete;
  Relay& operator=(const Relay&) = delete;

  /// Handler for the publisher->relay connection.
  void on_publisher_delivery(const netsim::Delivery& delivery);

  /// Declares the relay->subscriber connection for `subscriber`.
  void attach_subscriber(std::uint32_t subscriber, netsim::Connection& egress);
  /// Handler for the subscriber->relay connection; answers SUBSCRIBE with
  /// SUBSCRIBE_OK on the egress control stream. Protocol errors are recorded
  /// in session_errors() and never close a connection.
  void on_subscriber_delivery(std::uint32_t subscriber, const netsim::Delivery& delivery);

  void on_setup(const moq::SetupMessage& setup);
  /// Throws SessionError before SETUP, for an unattached subscriber, a
  /// duplicate subscription, or a zero timeout.
  moq::SubscribeOkMessage on_subscribe(std::uint32_t subscriber, const moq::SubscribeMessage& msg);

  const std::optional<moq::SetupMessage>& setup() const noexcept { return setup_; }
  bool subscribed(std::uint32_t subscriber) const;
  std::optional<std::uint32_t> delivery_timeout_ms(std::uint32_t subscriber) const;

  /// First-chunk arrival of an object at the relay.
  std::optional<netsim::SimTime> arrival_us(std::uint8_t track, std::uint64_t frame) const;

  const std::vector<RelayLogRecord>& log() const noexcept { return log_; }
  /// CSV: time_us,subscriber,track,group,event,object,offset,bytes,elapsed_us
  void write_log_csv(std::ostream& out, std::optional<std::uint32_t> subscriber = std::nullopt) const;
  const std::vector<std::string>& session_errors() const noexcept { return session_errors_; }

 private:
  struct PendingChunk {
    Bytes data;
    std::uint16_t object = 0;
    std::size_t offset = 0;
    netsim::SimTime arrival_us = 0;
  };

  enum class GroupStatus { forwarding, timed_out, finished };

  struct EgressGroup {
    moq::GroupStreamKey key;
    netsim::StreamId stream = 0;
    GroupStatus status = GroupStatus::forwarding;
    std::deque<PendingChunk> pending;
    bool ingress_closed = false;
    std::optional<std::uint16_t> highest_object_forwarded;
  };

  class Session;

  struct IngressGroup {
    moq::ObjectStreamParser parser;
    netsim::SimTime started_us = 0;
    std::vector<netsim::SimTime> record_arrivals;
    std::size_t headers_seen = 0;
  };

  void handle_ingress_chunk(const moq::GroupStreamKey& key, const netsim::Delivery& delivery);
  void handle_ingress_close(const moq::GroupStreamKey& key);

  netsim::Simulator& sim_;
  std::optional<moq::SetupMessage> setup_;
  std::map<std::uint32_t, std::unique_ptr<Session>> sessions_;
  std::map<std::uint32_t, netsim::Connection*> egress_;
  std::map<moq::GroupStreamKey, IngressGroup> ingress_;
  std::map<std::pair<std::uint8_t, std::uint64_t>, netsim::SimTime> arrivals_;
  std::map<std::uint32_t, Bytes> control_buffers_;
  Bytes publisher_control_;
  std::vector<RelayLogRecord> log_;
  std::vector<std::string> session_errors_;
};

}  // namespace pcstream
