#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "bridgebench/codec.hpp"
#include "bridgebench/rng.hpp"
#include "util/random_packets.hpp"

using namespace bridgebench;

namespace {

/// Independent varint reference: straight base-128 with continuation bits.
std::vector<uint8_t> oracle_varint(uint32_t v) {
  std::vector<uint8_t> out;
  do {
    uint8_t b = v % 128;
    v /= 128;
    if (v) b |= 0x80;
    out.push_back(b);
  } while (v);
  return out;
}

std::vector<uint8_t> bytes(std::initializer_list<int> xs) {
  std::vector<uint8_t> v;
  for (int x : xs) v.push_back(static_cast<uint8_t>(x));
  return v;
}

}  // namespace

TEST_CASE("varint matches brute-force oracle") {
  std::vector<uint32_t> values;
  for (uint32_t v = 0; v <= 70000; ++v) values.push_back(v);
  for (uint32_t v : {2097151u, 2097152u, 268435454u, 268435455u}) values.push_back(v);

  for (uint32_t v : values) {
    std::vector<uint8_t> got;
    encode_varint(got, v);
    auto want = oracle_varint(v);
    REQUIRE(got == want);
    REQUIRE(varint_size(v) == want.size());
    auto back = decode_varint(got);
    REQUIRE(back.status == DecodeStatus::Ok);
    REQUIRE(back.value == v);
    REQUIRE(back.length == want.size());
  }
}

TEST_CASE("varint worked examples") {
  std::vector<uint8_t> out;
  encode_varint(out, 321);
  CHECK(out == bytes({0xC1, 0x02}));
  CHECK(varint_size(0) == 1);
  CHECK(varint_size(127) == 1);
  CHECK(varint_size(128) == 2);
  CHECK(varint_size(16383) == 2);
  CHECK(varint_size(16384) == 3);
  CHECK(varint_size(kMaxVarint) == 4);
  CHECK_THROWS_AS(encode_varint(out, kMaxVarint + 1), CodecError);
}

TEST_CASE("varint rejects non-minimal encodings") {
  CHECK(decode_varint(bytes({0x80, 0x00})).status == DecodeStatus::Malformed);
  CHECK(decode_varint(bytes({0x81, 0x00})).status == DecodeStatus::Malformed);
  CHECK(decode_varint(bytes({0x80, 0x80, 0x00})).status == DecodeStatus::Malformed);
  // Continuation bit set on the fourth byte can never terminate.
  CHECK(decode_varint(bytes({0xFF, 0xFF, 0xFF, 0xFF})).status == DecodeStatus::Malformed);
  CHECK(decode_varint(bytes({0x80})).status == DecodeStatus::NeedMoreBytes);
  CHECK(decode_varint(bytes({0x00})).status == DecodeStatus::Ok);
}

TEST_CASE("pingreq and pingresp encode to two fixed bytes") {
  CHECK(encode(PingreqPacket{}) == bytes({0xC0, 0x00}));
  CHECK(encode(PingrespPacket{}) == bytes({0xD0, 0x00}));
}

TEST_CASE("randomized packets round-trip") {
  SplitMix rng(0xC0DEC5EEDull);
  for (int i = 0; i < 2000; ++i) {
    ControlPacket p = testutil::random_packet(rng);
    auto wire = encode(p);
    REQUIRE(wire.size() == packet_size(p));
    auto r = decode(wire);
    REQUIRE(r.status == DecodeStatus::Ok);
    REQUIRE(r.consumed == wire.size());
    REQUIRE(r.packet == p);
  }
}

TEST_CASE("every prefix of a valid packet asks for more bytes") {
  SplitMix rng(7);
  for (int i = 0; i < 60; ++i) {
    auto wire = encode(testutil::random_packet(rng));
    for (size_t cut = 0; cut < wire.size(); ++cut) {
      auto r = decode(std::span<const uint8_t>(wire.data(), cut));
      REQUIRE(r.status == DecodeStatus::NeedMoreBytes);
      REQUIRE(r.consumed == 0);
      REQUIRE(r.bytes_needed <= wire.size());
    }
  }
}

TEST_CASE("decoder consumes one packet from a concatenated stream") {
  SplitMix rng(99);
  std::vector<ControlPacket> sent;
  std::vector<uint8_t> stream;
  for (int i = 0; i < 50; ++i) {
    sent.push_back(testutil::random_packet(rng));
    auto w = encode(sent.back());
    stream.insert(stream.end(), w.begin(), w.end());
  }
  size_t pos = 0;
  for (const auto& want : sent) {
    auto r = decode(std::span<const uint8_t>(stream).subspan(pos));
    REQUIRE(r.status == DecodeStatus::Ok);
    REQUIRE(r.packet == want);
    pos += r.consumed;
  }
  CHECK(pos == stream.size());
}

TEST_CASE("random byte soup never crashes the decoder") {
  SplitMix rng(0xF0221);
  for (int i = 0; i < 3000; ++i) {
    std::vector<uint8_t> junk(rng.next_below(40));
    for (auto& b : junk) b = static_cast<uint8_t>(rng.next());
    auto r = decode(junk);
    bool known = r.status == DecodeStatus::Ok || r.status == DecodeStatus::Malformed ||
                 r.status == DecodeStatus::NeedMoreBytes ||
                 r.status == DecodeStatus::Unsupported;
    REQUIRE(known);
    if (r.status == DecodeStatus::Ok) REQUIRE(r.consumed <= junk.size());
  }
}

TEST_CASE("bit-flipped valid packets never crash the decoder") {
  SplitMix rng(0xB17F11Bull);
  for (int i = 0; i < 400; ++i) {
    auto wire = encode(testutil::random_packet(rng));
    size_t at = rng.next_below(wire.size());
    wire[at] ^= static_cast<uint8_t>(1u << rng.next_below(8));
    auto r = decode(wire);  // any status is fine; it must only stay total
    if (r.status == DecodeStatus::Ok) REQUIRE(r.consumed <= wire.size());
  }
}

TEST_CASE("fixed header flag rules are enforced") {
  // PUBREL, SUBSCRIBE and UNSUBSCRIBE require flags 0010; everything else 0000.
  auto pubrel = encode(AckPacket{PacketType::Pubrel, 9, reason::kSuccess});
  CHECK((pubrel[0] & 0x0f) == 0x02);
  pubrel[0] = 0x60;  // clear the required flags
  CHECK(decode(pubrel).status == DecodeStatus::Malformed);

  SubscribePacket sp;
  sp.packet_id = 4;
  sp.entries.emplace_back("a/b", SubscribeOptions{});
  auto sub = encode(sp);
  CHECK((sub[0] & 0x0f) == 0x02);
  sub[0] = 0x80;
  CHECK(decode(sub).status == DecodeStatus::Malformed);

  auto ping = encode(PingreqPacket{});
  ping[0] = 0xC1;
  CHECK(decode(ping).status == DecodeStatus::Malformed);
}

TEST_CASE("malformed publish variants are rejected") {
  PublishPacket p;
  p.topic = "a/b";
  p.payload = {1, 2, 3};
  auto wire = encode(p);

  SUBCASE("qos 3") {
    wire[0] = 0x36;  // qos bits 11
    CHECK(decode(wire).status == DecodeStatus::Malformed);
  }
  SUBCASE("dup on qos 0") {
    wire[0] = 0x38;
    CHECK(decode(wire).status == DecodeStatus::Malformed);
  }
  SUBCASE("wildcard in topic name") {
    PublishPacket bad = p;
    bad.topic = "a/+";
    CHECK_THROWS_AS(encode(bad), CodecError);
    // Hand-build the same thing on the wire: topic "a/+", no props, empty payload.
    auto raw = bytes({0x30, 0x06, 0x00, 0x03, 'a', '/', '+', 0x00});
    CHECK(decode(raw).status == DecodeStatus::Malformed);
  }
  SUBCASE("packet id zero on qos 1") {
    auto raw = bytes({0x32, 0x08, 0x00, 0x03, 'a', '/', 'b', 0x00, 0x00, 0x00});
    CHECK(decode(raw).status == DecodeStatus::Malformed);
    PublishPacket bad = p;
    bad.qos = 1;
    bad.packet_id = 0;
    CHECK_THROWS_AS(encode(bad), CodecError);
  }
  SUBCASE("property outside the supported pair") {
    // Payload Format Indicator (0x01) is valid MQTT but outside the subset.
    auto raw = bytes({0x30, 0x08, 0x00, 0x03, 'a', '/', 'b', 0x02, 0x01, 0x01});
    auto r = decode(raw);
    CHECK(r.status == DecodeStatus::Malformed);
    CHECK(r.error.find("property") != std::string::npos);
  }
}

TEST_CASE("supported publish properties round-trip") {
  PublishPacket p;
  p.topic = "t";
  p.user_properties.emplace_back("ts_us", "123456789");
  p.user_properties.emplace_back("seq", "42");
  p.message_expiry_s = 30;
  p.payload = {0xAA};
  auto r = decode(encode(p));
  REQUIRE(r.status == DecodeStatus::Ok);
  auto& back = std::get<PublishPacket>(r.packet);
  CHECK(back.user_properties == p.user_properties);
  CHECK(back.message_expiry_s == p.message_expiry_s);
}

TEST_CASE("connect gatekeeping") {
  ConnectPacket c;
  c.client_id = "gw";
  auto wire = encode(c);
  // Layout: [0]=0x10 [1]=len [2..3]=0x0004 [4..7]="MQTT" [8]=version [9]=flags.
  REQUIRE(wire[8] == 5);

  SUBCASE("protocol version 4 is unsupported, not malformed") {
    wire[8] = 4;
    auto r = decode(wire);
    CHECK(r.status == DecodeStatus::Unsupported);
  }
  SUBCASE("will flag is unsupported") {
    wire[9] |= 0x04;
    CHECK(decode(wire).status == DecodeStatus::Unsupported);
  }
  SUBCASE("reserved flag is malformed") {
    wire[9] |= 0x01;
    CHECK(decode(wire).status == DecodeStatus::Malformed);
  }
  SUBCASE("bad protocol name is malformed") {
    wire[4] = 'X';
    CHECK(decode(wire).status == DecodeStatus::Malformed);
  }
}

TEST_CASE("auth packets are recognized and declined") {
  auto r = decode(bytes({0xF0, 0x00}));
  CHECK(r.status == DecodeStatus::Unsupported);
  CHECK(r.error.find("auth") != std::string::npos);
}

TEST_CASE("short and long ack forms") {
  auto short_form = encode(AckPacket{PacketType::Puback, 7, reason::kSuccess});
  CHECK(short_form == bytes({0x40, 0x02, 0x00, 0x07}));
  auto r1 = decode(short_form);
  REQUIRE(r1.status == DecodeStatus::Ok);
  CHECK(std::get<AckPacket>(r1.packet).reason_code == reason::kSuccess);

  auto long_form = encode(AckPacket{PacketType::Puback, 7, reason::kNoMatchingSubscribers});
  CHECK(long_form == bytes({0x40, 0x03, 0x00, 0x07, 0x10}));
  auto r2 = decode(long_form);
  REQUIRE(r2.status == DecodeStatus::Ok);
  CHECK(std::get<AckPacket>(r2.packet).reason_code == reason::kNoMatchingSubscribers);
}

TEST_CASE("non-minimal remaining length is rejected at the frame level") {
  // PINGREQ with remaining length 0 spelled in two bytes.
  CHECK(decode(bytes({0xC0, 0x80, 0x00})).status == DecodeStatus::Malformed);
}

TEST_CASE("topic length drives encoded publish size one-for-one") {
  PublishPacket p;
  p.qos = 1;
  p.packet_id = 11;
  p.payload.assign(1500, 0x55);
  p.topic = "providers/pr1/h";  // 15 bytes
  auto small = encode(p);
  p.topic = "providers/pr1/hub-01/readings";  // 29 bytes
  auto large = encode(p);
  CHECK(large.size() - small.size() == 14);
}
