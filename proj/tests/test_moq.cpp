#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "pcstream/errors.hpp"
#include "pcstream/moq.hpp"

using namespace pcstream;
using namespace pcstream::moq;

namespace {

template <typename T>
T roundtrip(const T& msg) {
  const Bytes b = encode_message(msg);
  const DecodedMessage d = decode_message(b);
  CHECK(d.consumed == b.size());
  return std::get<T>(d.message);
}

DecodeErrc decode_code(const Bytes& b) {
  try {
    decode_message(b);
  } catch (const DecodeError& e) {
    return e.code();
  }
  FAIL("decode unexpectedly succeeded");
  return DecodeErrc::short_buffer;
}

}  // namespace

TEST_CASE("golden control messages") {
  CHECK(encode_message(SetupMessage{5, 30, 512}) == Bytes{0x01, 0x05, 0x1E, 0x00, 0x00, 0x02});
  CHECK(encode_message(SubscribeMessage{1500}) == Bytes{0x02, 0xDC, 0x05, 0x00, 0x00});
  CHECK(encode_message(SubscribeOkMessage{10, 5}) == Bytes{0x03, 0x0A, 0x05, 0x00});
}

TEST_CASE("golden object header") {
  const ObjectHeader h{3, 0x01020304U, 0x0506U, 0x1122334455667788ULL, 0x0A0B0C0D0E0F1011ULL, 9019};
  const Bytes expected{0x04, 0x03, 0x04, 0x03, 0x02, 0x01, 0x06, 0x05, 0x88, 0x77, 0x66, 0x55, 0x44, 0x33,
                       0x22, 0x11, 0x11, 0x10, 0x0F, 0x0E, 0x0D, 0x0C, 0x0B, 0x0A, 0x3B, 0x23, 0x00, 0x00};
  const Bytes b = encode_message(h);
  CHECK(b.size() == kObjectHeaderSize);
  CHECK(b == expected);
  CHECK(roundtrip(h) == h);
}

TEST_CASE("sizes match the fixed layouts") {
  CHECK(encode_message(SetupMessage{}).size() == kSetupSize);
  CHECK(encode_message(SubscribeMessage{}).size() == kSubscribeSize);
  CHECK(encode_message(SubscribeOkMessage{}).size() == kSubscribeOkSize);
  CHECK(encode_message(ObjectHeader{}).size() == kObjectHeaderSize);
}

TEST_CASE("decode is structural and strict on framing") {
  CHECK(decode_code(Bytes{}) == DecodeErrc::short_buffer);
  CHECK(decode_code(Bytes{0x01, 0x05, 0x1E, 0x00, 0x00}) == DecodeErrc::short_buffer);
  CHECK(decode_code(Bytes{0x09, 0, 0, 0, 0, 0}) == DecodeErrc::unknown_message_type);
  CHECK(decode_code(Bytes{0x00}) == DecodeErrc::unknown_message_type);

  // Field values are not policed here: a zero timeout still decodes.
  CHECK(roundtrip(SubscribeMessage{0}).delivery_timeout_ms == 0);

  // Trailing bytes are left for the caller.
  Bytes two = encode_message(SubscribeOkMessage{2, 3});
  const Bytes setup = encode_message(SetupMessage{1, 1, 1});
  two.insert(two.end(), setup.begin(), setup.end());
  CHECK(decode_message(two).consumed == kSubscribeOkSize);
}

TEST_CASE("property: random message roundtrips") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 1000; ++i) {
    const SetupMessage s{static_cast<std::uint8_t>(rng()), static_cast<std::uint16_t>(rng()),
                         static_cast<std::uint16_t>(rng())};
    CHECK(roundtrip(s) == s);
    const SubscribeMessage sub{static_cast<std::uint32_t>(rng())};
    CHECK(roundtrip(sub) == sub);
    const SubscribeOkMessage ok{static_cast<std::uint8_t>(rng()), static_cast<std::uint16_t>(rng())};
    CHECK(roundtrip(ok) == ok);
    const ObjectHeader h{static_cast<std::uint8_t>(rng()), static_cast<std::uint32_t>(rng()),
                         static_cast<std::uint16_t>(rng()), rng(), rng(), static_cast<std::uint32_t>(rng())};
    CHECK(roundtrip(h) == h);
  }
}

TEST_CASE("frame numbering") {
  CHECK(frame_to_position(0, 5) == GroupPosition{0, 0});
  CHECK(frame_to_position(4, 5) == GroupPosition{0, 4});
  CHECK(frame_to_position(5, 5) == GroupPosition{1, 0});
  CHECK(frame_to_position(62, 30) == GroupPosition{2, 2});
  CHECK_THROWS_AS(frame_to_position(1, 0), ValidationError);
  CHECK_THROWS_AS(frame_to_position(std::uint64_t{UINT32_MAX} * 2 + 2, 2), ValidationError);
  for (std::uint64_t f = 0; f < 500; ++f) {
    for (std::uint16_t fpg : {1, 5, 30, 65535}) CHECK(position_to_frame(frame_to_position(f, fpg), fpg) == f);
  }
  CHECK(track_priority(0) == 0);
  CHECK(track_priority(9) == 9);
  CHECK(GroupStreamKey{0, 5} < GroupStreamKey{1, 0});
}

TEST_CASE("object stream parser handles every split point") {
  Bytes stream;
  std::vector<ObjectHeader> headers;
  std::vector<Bytes> payloads;
  for (std::uint16_t i = 0; i < 3; ++i) {
    Bytes payload(i == 1 ? 0 : 10 + i, static_cast<std::uint8_t>(0xA0 + i));
    ObjectHeader h{2, 7, i, 70U + i, 1000U * i, static_cast<std::uint32_t>(payload.size())};
    const Bytes hb = encode_message(h);
    stream.insert(stream.end(), hb.begin(), hb.end());
    stream.insert(stream.end(), payload.begin(), payload.end());
    headers.push_back(h);
    payloads.push_back(payload);
  }

  for (std::size_t a = 0; a <= stream.size(); ++a) {
    for (std::size_t b = a; b <= stream.size(); b += 7) {
      ObjectStreamParser p;
      std::vector<ObjectHeader> started;
      std::vector<ObjectStreamParser::Completed> done;
      for (auto [lo, hi] : {std::pair{std::size_t{0}, a}, {a, b}, {b, stream.size()}}) {
        auto r = p.feed(ByteView(stream.data() + lo, hi - lo));
        started.insert(started.end(), r.started.begin(), r.started.end());
        for (auto& c : r.completed) done.push_back(std::move(c));
      }
      REQUIRE(started == headers);
      REQUIRE(done.size() == 3);
      for (std::size_t i = 0; i < 3; ++i) {
        CHECK(done[i].header == headers[i]);
        CHECK(done[i].payload == payloads[i]);
      }
      CHECK(p.at_object_boundary());
    }
  }
}

TEST_CASE("parser offsets and control messages on a group stream") {
  ObjectStreamParser p;
  const ObjectHeader h{0, 0, 0, 0, 0, 100};
  const Bytes hb = encode_message(h);
  p.feed(ByteView(hb.data(), 10));
  CHECK(p.offset_in_object() == 10);
  CHECK_FALSE(p.at_object_boundary());
  p.feed(ByteView(hb.data() + 10, hb.size() - 10));
  CHECK(p.offset_in_object() == kObjectHeaderSize);
  REQUIRE(p.current().has_value());
  CHECK(*p.current() == h);
  const Bytes half(50, 1);
  p.feed(half);
  CHECK(p.offset_in_object() == kObjectHeaderSize + 50);

  ObjectStreamParser q;
  Bytes bad = encode_message(SetupMessage{1, 1, 1});
  bad.resize(kObjectHeaderSize);
  CHECK_THROWS_AS(q.feed(bad), DecodeError);
}
