#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>

#include "pcstream/codec.hpp"
#include "pcstream/errors.hpp"
#include "pcstream/publisher.hpp"
#include "pcstream/relay.hpp"
#include "pcstream/sampler.hpp"
#include "pcstream/subscriber.hpp"

using namespace pcstream;

namespace {

Bytes record(std::uint8_t track, std::uint32_t group, std::uint16_t object, std::uint64_t frame,
             const PointCloud& part) {
  const Bytes payload = encode_partition(part);
  Bytes out = moq::encode_message(moq::ObjectHeader{track, group, object, frame, 0, static_cast<std::uint32_t>(payload.size())});
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

Notification received(std::uint8_t track, std::uint64_t frame, std::size_t points, netsim::SimTime at) {
  Notification n;
  n.kind = Notification::Kind::received;
  n.track = track;
  n.frame_id = frame;
  n.cloud = generate_synthetic(points, 64, track * 1000U + frame, frame);
  n.payload_bytes = encoded_size(points);
  n.completed_us = at;
  return n;
}

Notification dropped(std::uint8_t track, std::uint64_t frame) {
  Notification n;
  n.track = track;
  n.frame_id = frame;
  return n;
}

}  // namespace

TEST_CASE("latency formula examples") {
  CHECK_FALSE(compute_latency({{}, {}, 50}).has_value());
  CHECK(*compute_latency({{2.0, 3.0}, {10.0, 20.0}, 50}) == doctest::Approx(23.0));
  CHECK(*compute_latency({{2.0, 3.0}, {10.0, 80.0}, 50}) == doctest::Approx(53.0));
  // the max E and max D may come from different objects
  CHECK(*compute_latency({{9.0, 1.0}, {1.0, 9.0}, 100}) == 18.0);
  CHECK_THROWS_AS(compute_latency({{1.0}, {}, 50}), ValidationError);
}

TEST_CASE("latency formula against direct evaluation on random inputs") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> e(0.0, 20.0), d(0.0, 3000.0);
  for (int i = 0; i < 1000; ++i) {
    LatencyInputs in;
    const int n = 1 + static_cast<int>(rng() % 10);
    for (int j = 0; j < n; ++j) {
      in.encode_ms.push_back(e(rng));
      in.transit_ms.push_back(d(rng));
    }
    in.timeout_ms = static_cast<double>(1 + rng() % 2000);
    double me = in.encode_ms[0], md = in.transit_ms[0];
    for (int j = 1; j < n; ++j) {
      if (in.encode_ms[j] > me) me = in.encode_ms[j];
      if (in.transit_ms[j] > md) md = in.transit_ms[j];
    }
    CHECK(*compute_latency(in) == me + (md < in.timeout_ms ? md : in.timeout_ms));
  }
}

TEST_CASE("track reader: complete group") {
  TrackReader r(1, 3);
  Bytes stream;
  std::vector<PointCloud> parts;
  for (std::uint16_t o = 0; o < 3; ++o) {
    parts.push_back(generate_synthetic(10 + o, 64, o, 6 + o));
    const Bytes rec = record(1, 2, o, 6 + o, parts.back());
    stream.insert(stream.end(), rec.begin(), rec.end());
  }
  std::vector<Notification> notes;
  for (std::size_t i = 0; i < stream.size(); i += 50) {
    auto got = r.on_chunk(2, ByteView(stream.data() + i, std::min<std::size_t>(50, stream.size() - i)),
                          static_cast<netsim::SimTime>(i));
    for (auto& n : got) notes.push_back(std::move(n));
  }
  REQUIRE(notes.size() == 3);
  for (std::size_t o = 0; o < 3; ++o) {
    CHECK(notes[o].kind == Notification::Kind::received);
    CHECK(notes[o].frame_id == 6 + o);
    CHECK(*notes[o].cloud == parts[o]);
    CHECK(notes[o].payload_bytes == encoded_size(10 + o));
  }
  CHECK(r.on_close(2, 999).empty());
  CHECK(r.diagnostics().empty());
}

TEST_CASE("track reader: clean close mid-group marks the rest dropped") {
  TrackReader r(0, 5);
  const Bytes rec0 = record(0, 1, 0, 5, generate_synthetic(20, 64, 1, 5));
  const Bytes rec1 = record(0, 1, 1, 6, generate_synthetic(20, 64, 2, 6));
  CHECK(r.on_chunk(1, rec0, 10).size() == 1);
  CHECK(r.on_chunk(1, ByteView(rec1.data(), 40), 20).empty());  // partial object
  const auto notes = r.on_close(1, 30);
  REQUIRE(notes.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(notes[i].kind == Notification::Kind::dropped);
    CHECK(notes[i].frame_id == 6 + i);
  }

  // a group closed before any data drops all of it
  const auto all = r.on_close(3, 40);
  REQUIRE(all.size() == 5);
  CHECK(all.front().frame_id == 15);
  CHECK(all.back().frame_id == 19);
}

TEST_CASE("track reader: corrupt or out-of-sequence objects become drops") {
  TrackReader r(0, 3);
  Bytes bad = record(0, 0, 0, 0, generate_synthetic(5, 64, 1, 0));
  bad[moq::kObjectHeaderSize] = 'X';  // partition magic
  auto notes = r.on_chunk(0, bad, 1);
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].kind == Notification::Kind::dropped);
  CHECK(r.diagnostics().size() == 1);

  const Bytes skip = record(0, 0, 2, 2, generate_synthetic(5, 64, 1, 2));  // object 1 missing
  notes = r.on_chunk(0, skip, 2);
  REQUIRE(notes.size() == 1);
  CHECK(notes[0].kind == Notification::Kind::dropped);
  CHECK(notes[0].frame_id == 1);
  CHECK(r.on_close(0, 3).size() == 1);

  // a non-object record breaks the group; the close accounts for every object
  TrackReader q(0, 2);
  Bytes ctl = moq::encode_message(moq::SetupMessage{1, 1, 1});
  ctl.resize(moq::kObjectHeaderSize, 0);
  CHECK(q.on_chunk(4, ctl, 1).empty());
  CHECK(q.on_close(4, 2).size() == 2);
  CHECK_THROWS_AS(TrackReader(0, 0), ValidationError);
}

TEST_CASE("assembler emits frames in order once all tracks resolve") {
  LatencyTaps taps;
  taps.encode_latency_us = [](std::uint8_t, std::uint64_t) { return std::optional<netsim::SimTime>(2500); };
  taps.relay_arrival_us = [](std::uint8_t, std::uint64_t f) {
    return std::optional<netsim::SimTime>(static_cast<netsim::SimTime>(f) * 50'000);
  };
  FrameAssembler a(2, 50, taps);
  a.push(received(0, 1, 5, 60'000));
  a.push(received(1, 1, 5, 70'000));
  CHECK(a.take_ready().empty());  // frame 0 still open
  CHECK(a.buffered_frames() == 1);
  a.push(received(1, 0, 4, 30'000));
  CHECK(a.take_ready().empty());
  a.push(dropped(0, 0));
  const auto ready = a.take_ready();
  REQUIRE(ready.size() == 2);

  CHECK(ready[0].frame_id == 0);
  CHECK(ready[0].received_tracks == std::vector<std::uint8_t>{1});
  CHECK(ready[0].cloud.size() == 4);
  CHECK(ready[0].payload_bytes == encoded_size(4));
  CHECK(*ready[0].latency_ms == doctest::Approx(2.5 + 30.0));
  CHECK_FALSE(ready[0].stalled);

  CHECK(ready[1].frame_id == 1);
  CHECK(ready[1].received_tracks == std::vector<std::uint8_t>{0, 1});
  CHECK(ready[1].cloud.size() == 10);
  // D = 20 ms on track 1, clamped to T = 50 does not bite
  CHECK(*ready[1].latency_ms == doctest::Approx(2.5 + 20.0));
  CHECK(*ready[1].measured_latency_ms == doctest::Approx(2.5 + 20.0));
  CHECK(a.next_frame() == 2);
}

TEST_CASE("assembler: stalls, clamping, duplicates and the expected-frame bound") {
  LatencyTaps taps;
  taps.encode_latency_us = [](std::uint8_t, std::uint64_t) { return std::optional<netsim::SimTime>(1000); };
  taps.relay_arrival_us = [](std::uint8_t, std::uint64_t) { return std::optional<netsim::SimTime>(0); };
  FrameAssembler a(2, 50, taps, 2);
  a.push(dropped(0, 0));
  a.push(dropped(1, 0));
  a.push(received(0, 1, 3, 80'000));  // D = 80 ms > T
  a.push(received(0, 1, 3, 80'000));
  a.push(dropped(1, 1));
  a.push(dropped(0, 2));  // beyond the run
  const auto ready = a.take_ready();
  REQUIRE(ready.size() == 2);
  CHECK(ready[0].stalled);
  CHECK(ready[0].cloud.empty());
  CHECK_FALSE(ready[0].latency_ms.has_value());
  CHECK(*ready[1].latency_ms == doctest::Approx(1.0 + 50.0));
  CHECK(*ready[1].measured_latency_ms == doctest::Approx(1.0 + 80.0));
  CHECK(a.buffered_frames() == 0);
  CHECK(a.diagnostics().size() == 1);  // the duplicate

  a.push(dropped(0, 0));
  CHECK(a.diagnostics().size() == 2);  // late for an emitted frame
}

TEST_CASE("end to end through the relay: reconstructions are merges of received partitions") {
  netsim::Simulator sim;
  Relay relay(sim);
  netsim::Connection& in =
      sim.add_connection("in", {10'000'000'000, 0}, [&](const netsim::Delivery& d) { relay.on_publisher_delivery(d); });
  PublisherConfig config;
  config.track_count = 4;
  config.frames_per_group = 5;
  config.chunk_size = 1500;
  config.seed = 21;
  Publisher pub(sim, in, config);

  LatencyTaps taps;
  taps.encode_latency_us = [&](std::uint8_t t, std::uint64_t f) { return pub.encode_latency_us(t, f); };
  taps.relay_arrival_us = [&](std::uint8_t t, std::uint64_t f) { return relay.arrival_us(t, f); };
  Subscriber sub(0, 100, taps, 12);
  netsim::Connection& down = sim.add_connection("down", {4'000'000, 2000}, [&](const netsim::Delivery& d) { sub.on_delivery(d); });
  netsim::Connection& up = sim.add_connection("up", {1'000'000, 2000}, [&](const netsim::Delivery& d) { relay.on_subscriber_delivery(0, d); });
  relay.attach_subscriber(0, down);

  pub.send_setup(512);
  sim.run_until_idle();
  sub.send_subscribe(up);
  sim.run_until_idle();
  REQUIRE(sub.session().has_value());
  CHECK(*sub.session() == moq::SubscribeOkMessage{4, 5});

  std::vector<PointCloud> frames;
  for (std::uint64_t f = 0; f < 12; ++f) frames.push_back(generate_synthetic(4000, 512, 100 + f, f));
  VectorSource src(frames);
  pub.run(src, 12, sim.now());
  sim.run_until_idle();

  const auto& results = sub.results();
  REQUIRE(results.size() == 12);
  CHECK(sub.unresolved_frames() == 0);
  CHECK(sub.diagnostics().empty());
  bool some_partial = false;
  for (const FrameResult& r : results) {
    const PartitionSet parts = partition(frames[r.frame_id], 4, 21);
    std::vector<PointCloud> chosen;
    for (std::uint8_t t : r.received_tracks) chosen.push_back(parts.partitions[t]);
    CHECK(r.cloud.size() == merge(chosen).size());
    if (!chosen.empty()) CHECK(same_multiset(r.cloud.points(), merge(chosen).points()));
    if (r.received_tracks.size() < 4) some_partial = true;
    if (!r.stalled) {
      REQUIRE(r.latency_ms.has_value());
      CHECK(*r.latency_ms <= *r.measured_latency_ms + 1e-9);
    }
  }
  // 4 Mbps against ~6.5 Mbps offered forces drops at T = 100 ms
  CHECK(some_partial);
}
