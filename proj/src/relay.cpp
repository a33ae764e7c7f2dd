#include "pcstream/relay.hpp"

#include <ostream>

#include "pcstream/errors.hpp"

namespace pcstream {

const char* to_string(RelayEvent event) noexcept {
  return event == RelayEvent::forwarded ? "forwarded" : "timeout_close";
}

class Relay::Session final : public netsim::StreamFeeder {
 public:
  Session(Relay& relay, std::uint32_t id, std::uint32_t timeout_ms, netsim::Connection& egress,
          netsim::SimTime subscribed_us)
      : relay_(relay), id_(id), timeout_ms_(timeout_ms), egress_(egress), subscribed_us_(subscribed_us) {}

  std::uint32_t timeout_ms() const noexcept { return timeout_ms_; }
  netsim::SimTime subscribed_us() const noexcept { return subscribed_us_; }
  netsim::Connection& egress() noexcept { return egress_; }

  void on_chunk(const moq::GroupStreamKey& key, PendingChunk chunk) {
    auto it = groups_.find(key);
    if (it == groups_.end()) {
      EgressGroup group;
      group.key = key;
      group.stream = egress_.open_stream(key, moq::track_priority(key.track_id), this);
      it = groups_.emplace(key, std::move(group)).first;
      by_stream_[it->second.stream] = key;
    }
    EgressGroup& group = it->second;
    if (group.status != GroupStatus::forwarding) return;
    group.pending.push_back(std::move(chunk));
    egress_.wake();
  }

  void on_ingress_close(const moq::GroupStreamKey& key) {
    auto it = groups_.find(key);
    if (it == groups_.end() || it->second.status != GroupStatus::forwarding) return;
    it->second.ingress_closed = true;
    egress_.wake();
  }

  bool has_pending(netsim::StreamId stream) const override {
    const EgressGroup& group = groups_.at(by_stream_.at(stream));
    return group.status == GroupStatus::forwarding && (!group.pending.empty() || group.ingress_closed);
  }

  void pull(netsim::Connection& conn, netsim::StreamId stream) override {
    EgressGroup& group = groups_.at(by_stream_.at(stream));
    if (group.status != GroupStatus::forwarding) return;

    if (group.pending.empty()) {
      if (group.ingress_closed) {
        conn.close_stream(stream);
        group.status = GroupStatus::finished;
      }
      return;
    }

    const netsim::SimTime now = relay_.sim_.now();
    PendingChunk& head = group.pending.front();
    const netsim::SimTime elapsed = now - head.arrival_us;

    RelayLogRecord record;
    record.time_us = now;
    record.subscriber = id_;
    record.track = group.key.track_id;
    record.group = group.key.group_id;
    record.object = head.object;
    record.offset = head.offset;
    record.elapsed_us = elapsed;

    if (elapsed > static_cast<netsim::SimTime>(timeout_ms_) * netsim::kMicrosPerMs) {
      record.event = RelayEvent::timeout_close;
      for (const PendingChunk& c : group.pending) record.bytes += c.data.size();
      conn.close_stream(stream);
      group.pending.clear();
      group.status = GroupStatus::timed_out;
    } else {
      record.event = RelayEvent::forwarded;
      record.bytes = head.data.size();
      group.highest_object_forwarded = head.object;
      conn.write_chunk(stream, std::move(head.data));
      group.pending.pop_front();
    }
    relay_.log_.push_back(record);
  }

 private:
  Relay& relay_;
  std::uint32_t id_;
  std::uint32_t timeout_ms_;
  netsim::Connection& egress_;
  netsim::SimTime subscribed_us_;
  std::map<moq::GroupStreamKey, EgressGroup> groups_;
  std::map<netsim::StreamId, moq::GroupStreamKey> by_stream_;
};

Relay::Relay(netsim::Simulator& sim) : sim_(sim) {}
Relay::~Relay() = default;

void Relay::on_setup(const moq::SetupMessage& setup) {
  if (setup.track_count < 1 || setup.frames_per_group < 1) {
    throw SessionError("SETUP needs track_count >= 1 and frames_per_group >= 1");
  }
  setup_ = setup;
}

void Relay::attach_subscriber(std::uint32_t subscriber, netsim::Connection& egress) { egress_[subscriber] = &egress; }

moq::SubscribeOkMessage Relay::on_subscribe(std::uint32_t subscriber, const moq::SubscribeMessage& msg) {
  if (!setup_) throw SessionError("SUBSCRIBE before publisher SETUP");
  if (msg.delivery_timeout_ms < 1) throw SessionError("delivery timeout must be at least 1 ms");
  auto egress = egress_.find(subscriber);
  if (egress == egress_.end()) throw SessionError("subscriber " + std::to_string(subscriber) + " has no egress");
  if (sessions_.contains(subscriber)) throw SessionError("subscriber " + std::to_string(subscriber) + " already subscribed");

  sessions_.emplace(subscriber,
                    std::make_unique<Session>(*this, subscriber, msg.delivery_timeout_ms, *egress->second, sim_.now()));
  return {setup_->track_count, setup_->frames_per_group};
}

bool Relay::subscribed(std::uint32_t subscriber) const { return sessions_.contains(subscriber); }

std::optional<std::uint32_t> Relay::delivery_timeout_ms(std::uint32_t subscriber) const {
  auto it = sessions_.find(subscriber);
  if (it == sessions_.end()) return std::nullopt;
  return it->second->timeout_ms();
}

std::optional<netsim::SimTime> Relay::arrival_us(std::uint8_t track, std::uint64_t frame) const {
  auto it = arrivals_.find({track, frame});
  if (it == arrivals_.end()) return std::nullopt;
  return it->second;
}

void Relay::on_publisher_delivery(const netsim::Delivery& delivery) {
  if (const auto* key = std::get_if<moq::GroupStreamKey>(&delivery.key)) {
    if (delivery.kind == netsim::DeliveryKind::chunk) {
      handle_ingress_chunk(*key, delivery);
    } else {
      handle_ingress_close(*key);
    }
    return;
  }
  if (delivery.kind != netsim::DeliveryKind::chunk) return;
  publisher_control_.insert(publisher_control_.end(), delivery.data.begin(), delivery.data.end());
  try {
    while (!publisher_control_.empty()) {
      const moq::DecodedMessage decoded = moq::decode_message(publisher_control_);
      publisher_control_.erase(publisher_control_.begin(),
                               publisher_control_.begin() + static_cast<std::ptrdiff_t>(decoded.consumed));
      if (const auto* setup = std::get_if<moq::SetupMessage>(&decoded.message)) {
        on_setup(*setup);
      } else {
        session_errors_.push_back("unexpected message on publisher control stream");
      }
    }
  } catch (const DecodeError& e) {
    if (e.code() != DecodeErrc::short_buffer) {
      session_errors_.push_back(std::string("publisher control: ") + e.what());
      publisher_control_.clear();
    }
  } catch (const SessionError& e) {
    session_errors_.push_back(e.what());
  }
}

void Relay::on_subscriber_delivery(std::uint32_t subscriber, const netsim::Delivery& delivery) {
  if (!std::holds_alternative<netsim::ControlStream>(delivery.key) || delivery.kind != netsim::DeliveryKind::chunk) {
    return;
  }
  Bytes& buffer = control_buffers_[subscriber];
  buffer.insert(buffer.end(), delivery.data.begin(), delivery.data.end());
  while (!buffer.empty()) {
    moq::DecodedMessage decoded;
    try {
      decoded = moq::decode_message(buffer);
    } catch (const DecodeError& e) {
      if (e.code() == DecodeErrc::short_buffer) return;
      session_errors_.push_back("subscriber " + std::to_string(subscriber) + ": " + e.what());
      buffer.clear();
      return;
    }
    buffer.erase(buffer.begin(), buffer.begin() + static_cast<std::ptrdiff_t>(decoded.consumed));

    const auto* subscribe = std::get_if<moq::SubscribeMessage>(&decoded.message);
    if (subscribe == nullptr) {
      session_errors_.push_back("subscriber " + std::to_string(subscriber) + ": unexpected control message");
      continue;
    }
    try {
      const moq::SubscribeOkMessage ok = on_subscribe(subscriber, *subscribe);
      netsim::Connection& egress = *egress_.at(subscriber);
      const netsim::StreamId control = egress.open_stream(netsim::ControlStream{}, 0);
      egress.write_chunk(control, moq::encode_message(ok));
    } catch (const SessionError& e) {
      session_errors_.push_back("subscriber " + std::to_string(subscriber) + ": " + e.what());
    }
  }
}

void Relay::handle_ingress_chunk(const moq::GroupStreamKey& key, const netsim::Delivery& delivery) {
  auto [it, inserted] = ingress_.try_emplace(key);
  IngressGroup& group = it->second;
  if (inserted) group.started_us = sim_.now();

  if (group.parser.at_object_boundary()) group.record_arrivals.push_back(sim_.now());
  const auto object = static_cast<std::uint16_t>(group.record_arrivals.size() - 1);
  const std::size_t offset = group.parser.offset_in_object();
  const netsim::SimTime arrival = group.record_arrivals.back();

  moq::ObjectStreamParser::FeedResult fed;
  try {
    fed = group.parser.feed(delivery.data);
  } catch (const DecodeError& e) {
    session_errors_.push_back("ingress " + netsim::to_string(key) + ": " + e.what());
    return;
  }
  // Records other than the one this chunk opened may also start inside it.
  for (const moq::ObjectHeader& header : fed.started) {
    const std::size_t record = group.headers_seen++;
    if (record >= group.record_arrivals.size()) group.record_arrivals.push_back(sim_.now());
    arrivals_[{header.track_id, header.frame_id}] = group.record_arrivals[record];
  }

  for (auto& [id, session] : sessions_) {
    if (session->subscribed_us() > group.started_us) continue;
    session->on_chunk(key, PendingChunk{delivery.data, object, offset, arrival});
  }
}

void Relay::handle_ingress_close(const moq::GroupStreamKey& key) {
  for (auto& [id, session] : sessions_) session->on_ingress_close(key);
}

void Relay::write_log_csv(std::ostream& out, std::optional<std::uint32_t> subscriber) const {
  out << "time_us,subscriber,track,group,event,object,offset,bytes,elapsed_us\n";
  for (const RelayLogRecord& r : log_) {
    if (subscriber && r.subscriber != *subscriber) continue;
    out << r.time_us << ',' << r.subscriber << ',' << unsigned{r.track} << ',' << r.group << ',' << to_string(r.event)
        << ',' << r.object << ',' << r.offset << ',' << r.bytes << ',' << r.elapsed_us << '\n';
  }
}

}  // namespace pcstream
