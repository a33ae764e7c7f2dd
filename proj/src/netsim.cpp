#include "pcstream/netsim.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include "pcstream/errors.hpp"

namespace pcstream::netsim {

void validate(const NetworkProfile& profile) {
  if (profile.bandwidth_bps == 0) throw ConfigError("bandwidth must be positive");
  if (profile.propagation_delay_us < 0) throw ConfigError("propagation delay must be non-negative");
}

SimTime serialization_time_us(std::size_t bytes, std::uint64_t bandwidth_bps) {
  // Exact for chunks below ~2 TB.
  const std::uint64_t bit_micros = static_cast<std::uint64_t>(bytes) * 8U * kMicrosPerSecond;
  return static_cast<SimTime>(bit_micros / bandwidth_bps + (bit_micros % bandwidth_bps != 0 ? 1 : 0));
}

std::string to_string(const StreamKey& key) {
  if (const auto* group = std::get_if<moq::GroupStreamKey>(&key)) {
    return "t" + std::to_string(group->track_id) + "g" + std::to_string(group->group_id);
  }
  return "ctl";
}

const char* to_string(LogEvent event) noexcept {
  switch (event) {
    case LogEvent::send:
      return "send";
    case LogEvent::deliver:
      return "deliver";
    case LogEvent::close:
      return "close";
    case LogEvent::connection_close:
      return "connection_close";
  }
  return "?";
}

StreamId StrictPriorityPolicy::pick(std::span<const Candidate> ready) {
  std::uint32_t best = ready.front().priority;
  for (const Candidate& c : ready) best = std::min(best, c.priority);

  auto last = last_served_.find(best);
  std::optional<StreamId> first;
  std::optional<StreamId> after_last;
  for (const Candidate& c : ready) {
    if (c.priority != best) continue;
    if (!first) first = c.stream;
    if (last != last_served_.end() && c.stream > last->second && !after_last) after_last = c.stream;
  }
  const StreamId chosen = after_last ? *after_last : *first;
  last_served_[best] = chosen;
  return chosen;
}

Connection::Connection(Simulator& sim, std::string name, NetworkProfile profile, DeliveryHandler handler,
                       std::unique_ptr<SchedulingPolicy> policy)
    : sim_(sim),
      name_(std::move(name)),
      profile_(profile),
      handler_(std::move(handler)),
      policy_(policy ? std::move(policy) : std::make_unique<StrictPriorityPolicy>()) {
  validate(profile_);
}

Connection::Stream& Connection::stream_ref(StreamId stream) {
  if (stream >= streams_.size()) throw TransportError(name_ + ": unknown stream " + std::to_string(stream));
  return streams_[stream];
}

const Connection::Stream& Connection::stream_ref(StreamId stream) const {
  if (stream >= streams_.size()) throw TransportError(name_ + ": unknown stream " + std::to_string(stream));
  return streams_[stream];
}

StreamId Connection::open_stream(const StreamKey& key, std::uint32_t priority, StreamFeeder* feeder) {
  if (closed_) throw TransportError(name_ + ": connection closed");
  if (keys_.contains(key)) throw TransportError(name_ + ": stream " + to_string(key) + " already opened");
  const auto id = static_cast<StreamId>(streams_.size());
  Stream s;
  s.key = key;
  s.priority = priority;
  s.feeder = feeder;
  streams_.push_back(std::move(s));
  keys_.emplace(key, id);
  active_.push_back(id);
  if (feeder) kick();
  return id;
}

void Connection::write_chunk(StreamId stream, Bytes chunk) {
  Stream& s = stream_ref(stream);
  if (s.close_requested) throw TransportError(name_ + ": write after close on " + to_string(s.key));
  if (closed_) throw TransportError(name_ + ": connection closed");
  s.written += chunk.size();
  s.queue.push_back({std::move(chunk), false});
  kick();
}

void Connection::close_stream(StreamId stream) {
  Stream& s = stream_ref(stream);
  if (s.close_requested) throw TransportError(name_ + ": stream " + to_string(s.key) + " already closed");
  s.close_requested = true;
  s.queue.push_back({{}, true});
  kick();
}

void Connection::wake() { kick(); }

void Connection::close() {
  if (closed_) return;
  closed_ = true;
  ++closures_;
  log_.push_back({sim_.now(), ControlStream{}, LogEvent::connection_close, 0});
}

bool Connection::stream_open(StreamId stream) const { return !stream_ref(stream).close_requested; }
std::uint64_t Connection::bytes_written(StreamId stream) const { return stream_ref(stream).written; }
std::uint64_t Connection::bytes_delivered(StreamId stream) const { return stream_ref(stream).delivered; }
const StreamKey& Connection::key(StreamId stream) const { return stream_ref(stream).key; }

void Connection::kick() {
  if (busy_ || serve_scheduled_ || closed_) return;
  serve_scheduled_ = true;
  sim_.schedule_at(sim_.now(), [this] {
    serve_scheduled_ = false;
    serve();
  });
}

void Connection::serve() {
  if (busy_ || closed_) return;

  std::vector<StreamId> exhausted;  // feeders that produced nothing this round
  std::vector<Candidate> ready;
  for (;;) {
    ready.clear();
    for (StreamId id : active_) {
      const Stream& s = streams_[id];
      const bool has_data = !s.queue.empty() ||
                            (s.feeder && !s.close_requested && s.feeder->has_pending(id) &&
                             std::find(exhausted.begin(), exhausted.end(), id) == exhausted.end());
      if (has_data) ready.push_back({id, s.priority});
    }
    if (ready.empty()) return;

    const StreamId id = policy_->pick(ready);
    if (streams_[id].queue.empty()) {
      streams_[id].feeder->pull(*this, id);
      if (streams_[id].queue.empty()) {
        exhausted.push_back(id);
        continue;
      }
    }

    Stream& s = streams_[id];
    Item item = std::move(s.queue.front());
    s.queue.pop_front();

    if (item.is_close) {
      s.close_served = true;
      active_.erase(std::find(active_.begin(), active_.end(), id));
      sim_.schedule_at(sim_.now() + profile_.propagation_delay_us,
                       [this, id, item = std::move(item)]() mutable { deliver(id, std::move(item)); });
      continue;
    }

    const SimTime service = serialization_time_us(item.data.size(), profile_.bandwidth_bps);
    log_.push_back({sim_.now(), s.key, LogEvent::send, item.data.size()});
    busy_ = true;
    const SimTime done = sim_.now() + service;
    sim_.schedule_at(done, [this] {
      busy_ = false;
      serve();
    });
    sim_.schedule_at(done + profile_.propagation_delay_us,
                     [this, id, item = std::move(item)]() mutable { deliver(id, std::move(item)); });
    return;
  }
}

void Connection::deliver(StreamId stream, Item item) {
  Stream& s = streams_[stream];
  if (s.receiver_closed) throw std::logic_error(name_ + ": delivery on " + to_string(s.key) + " after close");

  Delivery d;
  d.time_us = sim_.now();
  d.stream = stream;
  d.key = s.key;
  if (item.is_close) {
    s.receiver_closed = true;
    d.kind = DeliveryKind::close;
    log_.push_back({d.time_us, s.key, LogEvent::close, 0});
  } else {
    s.delivered += item.data.size();
    d.kind = DeliveryKind::chunk;
    d.data = std::move(item.data);
    log_.push_back({d.time_us, s.key, LogEvent::deliver, d.data.size()});
  }

  if (handler_) {
    handler_(d);
  } else if (sim_.sink_) {
    sim_.sink_->push_back(std::move(d));
  }
}

void Connection::write_log_csv(std::ostream& out) const { write_log_csv(out, log_); }

void Connection::write_log_csv(std::ostream& out, const std::vector<LogRecord>& log) {
  out << "time_us,stream_key,event,bytes\n";
  for (const LogRecord& r : log) {
    out << r.time_us << ',' << to_string(r.key) << ',' << to_string(r.event) << ',' << r.bytes << '\n';
  }
}

void Simulator::schedule_at(SimTime time, std::function<void()> fn) {
  if (time < now_) throw std::logic_error("event scheduled in the past");
  events_.push_back(Event{time, next_seq_++, std::move(fn)});
  std::push_heap(events_.begin(), events_.end(), Later{});
}

Connection& Simulator::add_connection(std::string name, NetworkProfile profile, DeliveryHandler handler,
                                      std::unique_ptr<SchedulingPolicy> policy) {
  connections_.push_back(
      std::make_unique<Connection>(*this, std::move(name), profile, std::move(handler), std::move(policy)));
  return *connections_.back();
}

void Simulator::step(std::vector<Delivery>& out) {
  std::pop_heap(events_.begin(), events_.end(), Later{});
  Event event = std::move(events_.back());
  events_.pop_back();
  now_ = event.time;
  sink_ = &out;
  event.fn();
  sink_ = nullptr;
}

std::vector<Delivery> Simulator::run_until(SimTime until) {
  if (until < now_) throw std::logic_error("run_until into the past");
  std::vector<Delivery> out;
  while (!events_.empty() && events_.front().time <= until) step(out);
  now_ = until;
  return out;
}

std::vector<Delivery> Simulator::run_until_idle() {
  std::vector<Delivery> out;
  while (!events_.empty()) step(out);
  return out;
}

}  // namespace pcstream::netsim
