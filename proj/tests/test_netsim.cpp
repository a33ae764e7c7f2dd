#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "pcstream/errors.hpp"
#include "pcstream/netsim.hpp"

using namespace pcstream;
using namespace pcstream::netsim;

namespace {

StreamKey group(std::uint8_t track, std::uint32_t g) { return moq::GroupStreamKey{track, g}; }

// Departure recursion of a FIFO single-server queue:
// done_i = max(arrive_i, done_{i-1}) + ceil(8 * bytes_i * 1e6 / bps).
std::vector<SimTime> drain_oracle(const std::vector<std::pair<SimTime, std::size_t>>& arrivals, std::uint64_t bps,
                                  SimTime delay) {
  std::vector<SimTime> out;
  SimTime done = 0;
  for (const auto& [arrive, bytes] : arrivals) {
    const std::uint64_t bits_us = bytes * 8ULL * 1'000'000ULL;
    const auto service = static_cast<SimTime>((bits_us + bps - 1) / bps);
    done = std::max(arrive, done) + service;
    out.push_back(done + delay);
  }
  return out;
}

class CountingFeeder : public StreamFeeder {
 public:
  bool has_pending(StreamId) const override { return remaining > 0; }
  void pull(Connection& conn, StreamId id) override {
    ++pulls;
    --remaining;
    conn.write_chunk(id, Bytes(size, 0));
    if (remaining == 0 && close_after) conn.close_stream(id);
  }
  int remaining = 0;
  std::size_t size = 100;
  bool close_after = false;
  int pulls = 0;
};

}  // namespace

TEST_CASE("serialization arithmetic") {
  CHECK(serialization_time_us(1'000'000, 8'000'000) == 1'000'000);
  CHECK(serialization_time_us(1, 8'000'000) == 1);
  CHECK(serialization_time_us(1, 9'000'000) == 1);  // 0.89 us rounds up
  CHECK(serialization_time_us(0, 1) == 0);
  CHECK(serialization_time_us(9019, 300'000'000) == 241);  // 240.5 us
}

TEST_CASE("profiles are validated") {
  Simulator sim;
  CHECK_THROWS_AS(sim.add_connection("z", {0, 0}), ConfigError);
  CHECK_THROWS_AS(sim.add_connection("n", {1000, -1}), ConfigError);
}

TEST_CASE("single 1 MB chunk at 8 Mbps with 10 ms delay arrives at 1010 ms") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {8'000'000, 10'000});
  const StreamId s = c.open_stream(group(0, 0), 0);
  c.write_chunk(s, Bytes(1'000'000, 1));
  const auto out = sim.run_until_idle();
  REQUIRE(out.size() == 1);
  CHECK(out[0].time_us == 1'010'000);
  CHECK(out[0].data.size() == 1'000'000);
  CHECK(c.bytes_delivered(s) == 1'000'000);
}

TEST_CASE("queue drain matches the closed-form recursion") {
  const std::uint64_t bps = 300'000'000;
  const SimTime delay = 1500;
  // Offered faster than the link drains: each chunk lags more than the last.
  const std::vector<std::pair<SimTime, std::size_t>> arrivals{{0, 65536}, {100, 65536}, {200, 40000}};
  Simulator sim;
  Connection& c = sim.add_connection("c", {bps, delay});
  const StreamId s = c.open_stream(group(0, 0), 0);
  for (const auto& [t, bytes] : arrivals) {
    sim.schedule_at(t, [&c, s, n = bytes] { c.write_chunk(s, Bytes(n, 0)); });
  }
  const auto out = sim.run_until_idle();
  const auto expect = drain_oracle(arrivals, bps, delay);
  REQUIRE(out.size() == 3);
  std::vector<SimTime> lags;
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(out[i].time_us == expect[i]);
    lags.push_back(out[i].time_us - arrivals[i].first);
  }
  CHECK(lags[1] > lags[0]);
}

TEST_CASE("property: random single-stream traces match the recursion") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::uint64_t bps = 1'000 + rng() % 1'000'000'000;
    const SimTime delay = static_cast<SimTime>(rng() % 5000);
    std::vector<std::pair<SimTime, std::size_t>> arrivals;
    SimTime t = 0;
    for (int i = 0; i < 8; ++i) {
      t += static_cast<SimTime>(rng() % 3000);
      arrivals.emplace_back(t, 1 + rng() % 3000);
    }
    Simulator sim;
    Connection& c = sim.add_connection("c", {bps, delay});
    const StreamId s = c.open_stream(group(1, 1), 1);
    for (const auto& [at, bytes] : arrivals) {
      sim.schedule_at(at, [&c, s, n = bytes] { c.write_chunk(s, Bytes(n, 0)); });
    }
    const auto out = sim.run_until_idle();
    const auto expect = drain_oracle(arrivals, bps, delay);
    REQUIRE(out.size() == expect.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i].time_us == expect[i]);
  }
}

TEST_CASE("strict priority: all of A before B's first service completes") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {8'000'000, 0});
  const StreamId b = c.open_stream(group(1, 0), 1);
  const StreamId a = c.open_stream(group(0, 0), 0);
  for (int i = 0; i < 16; ++i) {
    c.write_chunk(b, Bytes(65536, 0));
    c.write_chunk(a, Bytes(65536, 0));
  }
  const auto out = sim.run_until_idle();
  SimTime a_last = 0;
  SimTime b_first = -1;
  for (const Delivery& d : out) {
    if (d.stream == a) a_last = std::max(a_last, d.time_us);
    if (d.stream == b && b_first < 0) b_first = d.time_us;
  }
  CHECK(a_last < b_first);
  CHECK(a_last == 16 * serialization_time_us(65536, 8'000'000));
}

TEST_CASE("service is non-preemptive per chunk") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {8'000'000, 0});
  const StreamId lo = c.open_stream(group(3, 0), 3);
  const StreamId hi = c.open_stream(group(0, 0), 0);
  c.write_chunk(lo, Bytes(1000, 0));  // 1000 us
  sim.schedule_at(10, [&] { c.write_chunk(hi, Bytes(1000, 0)); });
  const auto out = sim.run_until_idle();
  REQUIRE(out.size() == 2);
  CHECK(out[0].stream == lo);
  CHECK(out[0].time_us == 1000);
  CHECK(out[1].time_us == 2000);
}

TEST_CASE("round robin among equal priorities") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {8'000'000, 0});
  const StreamId x = c.open_stream(group(0, 0), 0);
  const StreamId y = c.open_stream(group(0, 1), 0);
  for (int i = 0; i < 3; ++i) {
    c.write_chunk(x, Bytes(10, 0));
    c.write_chunk(y, Bytes(10, 0));
  }
  std::vector<StreamId> order;
  for (const Delivery& d : sim.run_until_idle()) order.push_back(d.stream);
  CHECK(order == std::vector<StreamId>{x, y, x, y, x, y});
}

TEST_CASE("close is delivered after queued chunks and never followed by data") {
  Simulator sim;
  std::vector<Delivery> seen;
  Connection& c = sim.add_connection("c", {1'000'000, 500}, [&](const Delivery& d) { seen.push_back(d); });
  const StreamId s = c.open_stream(group(0, 0), 0);
  c.write_chunk(s, Bytes(100, 0));
  c.write_chunk(s, Bytes(100, 0));
  c.close_stream(s);
  CHECK_FALSE(c.stream_open(s));
  CHECK_THROWS_AS(c.write_chunk(s, Bytes(1, 0)), TransportError);
  CHECK_THROWS_AS(c.close_stream(s), TransportError);
  CHECK(sim.run_until_idle().empty());  // handler consumed everything
  REQUIRE(seen.size() == 3);
  CHECK(seen[0].kind == DeliveryKind::chunk);
  CHECK(seen[1].kind == DeliveryKind::chunk);
  CHECK(seen[2].kind == DeliveryKind::close);
  CHECK(seen[2].time_us >= seen[1].time_us);
  CHECK(c.bytes_written(s) == c.bytes_delivered(s));
  CHECK(c.closures() == 0);
}

TEST_CASE("duplicate keys and closed connections are transport errors") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {1'000'000, 0});
  c.open_stream(group(0, 0), 0);
  CHECK_THROWS_AS(c.open_stream(group(0, 0), 0), TransportError);
  CHECK_NOTHROW(c.open_stream(ControlStream{}, 0));
  CHECK_THROWS_AS(c.open_stream(ControlStream{}, 0), TransportError);
  CHECK_THROWS_AS(c.write_chunk(99, Bytes(1, 0)), TransportError);
  c.close();
  c.close();
  CHECK(c.closures() == 1);
  CHECK_THROWS_AS(c.open_stream(group(1, 0), 1), TransportError);
}

TEST_CASE("pull feeders are consulted at the service instant") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {8'000'000, 0});
  CountingFeeder feeder;
  feeder.remaining = 3;
  feeder.size = 1000;
  feeder.close_after = true;
  const StreamId s = c.open_stream(group(0, 0), 0, &feeder);
  const auto out = sim.run_until_idle();
  REQUIRE(out.size() == 4);
  CHECK(out[0].time_us == 1000);
  CHECK(out[2].time_us == 3000);
  CHECK(out[3].kind == DeliveryKind::close);
  CHECK(c.bytes_delivered(s) == 3000);
  CHECK(feeder.pulls == 3);
}

TEST_CASE("wake restarts an idle link for a feeder with new data") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {8'000'000, 0});
  CountingFeeder feeder;
  c.open_stream(group(0, 0), 0, &feeder);
  sim.run_until_idle();
  feeder.remaining = 1;
  sim.schedule_at(5000, [&] { c.wake(); });
  const auto out = sim.run_until_idle();
  REQUIRE(out.size() == 1);
  CHECK(out[0].time_us == 5100);
}

TEST_CASE("run_until advances the clock and keeps later events") {
  Simulator sim;
  Connection& c = sim.add_connection("c", {8'000'000, 0});
  const StreamId s = c.open_stream(group(0, 0), 0);
  c.write_chunk(s, Bytes(1000, 0));
  CHECK(sim.run_until(999).empty());
  CHECK(sim.now() == 999);
  CHECK(sim.run_until(1000).size() == 1);
  CHECK(sim.idle());
  CHECK_THROWS(sim.run_until(10));
  CHECK_THROWS(sim.schedule_at(5, [] {}));
}

TEST_CASE("work conservation and determinism of the event log") {
  auto script = [] {
    Simulator sim;
    Connection& c = sim.add_connection("c", {5'000'000, 700});
    std::mt19937_64 rng(3);
    std::vector<StreamId> ids;
    for (std::uint8_t t = 0; t < 4; ++t) ids.push_back(c.open_stream(group(t, 0), t));
    std::vector<SimTime> write_times;
    for (int i = 0; i < 60; ++i) {
      const auto at = static_cast<SimTime>(rng() % 20000);
      const StreamId s = ids[rng() % ids.size()];
      const std::size_t n = 1 + rng() % 2000;
      write_times.push_back(at);
      sim.schedule_at(at, [&c, s, n] { c.write_chunk(s, Bytes(n, 0)); });
    }
    sim.run_until_idle();
    std::sort(write_times.begin(), write_times.end());

    // With one chunk per write, the k-th service starts as soon as the link
    // is free and k+1 chunks exist, whichever stream they belong to.
    bool conserving = true;
    SimTime link_free = 0;
    std::size_t k = 0;
    for (const LogRecord& r : c.log()) {
      if (r.event != LogEvent::send) continue;
      if (r.time_us != std::max(link_free, write_times[k])) conserving = false;
      link_free = r.time_us + serialization_time_us(r.bytes, 5'000'000);
      ++k;
    }
    std::ostringstream log;
    c.write_log_csv(log);
    return std::tuple{log.str(), conserving, k};
  };
  const auto [a, ok, sends] = script();
  const auto [b, ok2, sends2] = script();
  CHECK(a == b);
  CHECK(a.rfind("time_us,stream_key,event,bytes\n", 0) == 0);
  CHECK(ok);
  CHECK(sends == 60);
}
