#pragma once

#include <compare>
#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "pcstream/bytes.hpp"
#include "pcstream/moq.hpp"

namespace pcstream::netsim {

/// Virtual time in microseconds.
using SimTime = std::int64_t;

inline constexpr SimTime kMicrosPerMs = 1000;
inline constexpr SimTime kMicrosPerSecond = 1'000'000;

struct NetworkProfile {
  std::uint64_t bandwidth_bps = 0;
  SimTime propagation_delay_us = 0;
};

void validate(const NetworkProfile& profile);

/// Time to put `bytes` on a link, rounded up to whole microseconds.
SimTime serialization_time_us(std::size_t bytes, std::uint64_t bandwidth_bps);

struct ControlStream {
  friend auto operator<=>(const ControlStream&, const ControlStream&) = default;
};

using StreamKey = std::variant<ControlStream, moq::GroupStreamKey>;

/// "ctl" or "t<track>g<group>".
std::string to_string(const StreamKey& key);

using StreamId = std::uint32_t;

enum class DeliveryKind { chunk, close };

struct Delivery {
  SimTime time_us = 0;
  StreamId stream = 0;
  StreamKey key;
  DeliveryKind kind = DeliveryKind::chunk;
  Bytes data;
};

enum class LogEvent { send, deliver, close, connection_close };

const char* to_string(LogEvent event) noexcept;

struct LogRecord {
  SimTime time_us = 0;
  StreamKey key;
  LogEvent event = LogEvent::send;
  std::size_t bytes = 0;
};

class Connection;

/// Pull-mode data source for a stream. The scheduler consults `has_pending`
/// when choosing the next stream to serve and calls `pull` at the service
/// instant if the stream's own queue is empty; `pull` writes at most one
/// chunk or closes the stream.
class StreamFeeder {
 public:
  virtual ~StreamFeeder() = default;
  virtual bool has_pending(StreamId stream) const = 0;
  virtual void pull(Connection& conn, StreamId stream) = 0;
};

struct Candidate {
  StreamId stream;
  std::uint32_t priority;
};

class SchedulingPolicy {
 public:
  virtual ~SchedulingPolicy() = default;
  /// `ready` is non-empty and ordered by ascending stream id.
  virtual StreamId pick(std::span<const Candidate> ready) = 0;
};

/// Lowest priority value wins; round-robin among equal priorities.
class StrictPriorityPolicy final : public SchedulingPolicy {
 public:
  StreamId pick(std::span<const Candidate> ready) override;

 private:
  std::map<std::uint32_t, StreamId> last_served_;
};

class Simulator;

using DeliveryHandler = std::function<void(const Delivery&)>;

/// One direction of a link: a rate-limited egress shared by prioritized,
/// reliable, FIFO streams, followed by a fixed propagation delay.
class Connection {
 public:
  Connection(Simulator& sim, std::string name, NetworkProfile profile, DeliveryHandler handler,
             std::unique_ptr<SchedulingPolicy> policy);

  Connection(const Connection&) = delete;
  Connection& operator=(const Connection&) = delete;

  /// Throws TransportError on a key already used on this connection.
  StreamId open_stream(const StreamKey& key, std::uint32_t priority, StreamFeeder* feeder = nullptr);
  /// Throws TransportError after close_stream.
  void write_chunk(StreamId stream, Bytes chunk);
  /// Clean close, delivered after every chunk already written.
  void close_stream(StreamId stream);
  /// Tells the scheduler a feeder has new data.
  void wake();

  /// Tears down the whole connection. Counted in `closures()`.
  void close();
  std::size_t closures() const noexcept { return closures_; }

  bool stream_open(StreamId stream) const;
  std::uint64_t bytes_written(StreamId stream) const;
  std::uint64_t bytes_delivered(StreamId stream) const;
  const StreamKey& key(StreamId stream) const;

  const std::string& name() const noexcept { return name_; }
  const NetworkProfile& profile() const noexcept { return profile_; }
  const std::vector<LogRecord>& log() const noexcept { return log_; }
  /// CSV: time_us,stream_key,event,bytes
  void write_log_csv(std::ostream& out) const;
  static void write_log_csv(std::ostream& out, const std::vector<LogRecord>& log);

 private:
  friend class Simulator;

  struct Item {
    Bytes data;
    bool is_close = false;
  };

  struct Stream {
    StreamKey key;
    std::uint32_t priority = 0;
    StreamFeeder* feeder = nullptr;
    std::deque<Item> queue;
    bool close_requested = false;
    bool close_served = false;
    bool receiver_closed = false;
    std::uint64_t written = 0;
    std::uint64_t delivered = 0;
  };

  Stream& stream_ref(StreamId stream);
  const Stream& stream_ref(StreamId stream) const;
  void kick();
  void serve();
  void deliver(StreamId stream, Item item);

  Simulator& sim_;
  std::string name_;
  NetworkProfile profile_;
  DeliveryHandler handler_;
  std::unique_ptr<SchedulingPolicy> policy_;
  std::vector<Stream> streams_;
  std::vector<StreamId> active_;
  std::map<StreamKey, StreamId> keys_;
  bool busy_ = false;
  bool serve_scheduled_ = false;
  bool closed_ = false;
  std::size_t closures_ = 0;
  std::vector<LogRecord> log_;
};

/// Single-threaded discrete-event loop owning every connection.
class Simulator {
 public:
  Simulator() = default;
  Simulator(const Simulator&) = delete;
  Simulator& operator=(const Simulator&) = delete;

  SimTime now() const noexcept { return now_; }

  /// Events at equal times run in scheduling order.
  void schedule_at(SimTime time, std::function<void()> fn);
  void schedule_after(SimTime delay, std::function<void()> fn) { schedule_at(now_ + delay, std::move(fn)); }

  /// Deliveries on a connection without a handler are returned from run_until.
  Connection& add_connection(std::string name, NetworkProfile profile, DeliveryHandler handler = nullptr,
                             std::unique_ptr<SchedulingPolicy> policy = nullptr);

  /// Runs every event with time <= `until`, then advances the clock to `until`.
  std::vector<Delivery> run_until(SimTime until);
  /// Runs until the event queue is empty.
  std::vector<Delivery> run_until_idle();
  bool idle() const noexcept { return events_.empty(); }

  const std::vector<std::unique_ptr<Connection>>& connections() const noexcept { return connections_; }

 private:
  friend class Connection;

  struct Event {
    SimTime time;
    std::uint64_t seq;
    std::function<void()> fn;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void step(std::vector<Delivery>& out);

  SimTime now_ = 0;
  std::uint64_t next_seq_ = 0;
  std::vector<Event> events_;  // min-heap under Later
  std::vector<std::unique_ptr<Connection>> connections_;
  std::vector<Delivery>* sink_ = nullptr;
};

}  // namespace pcstream::netsim
