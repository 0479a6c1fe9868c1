#pragma once

#include <string>
#include <vector>

#include "bridgebench/codec.hpp"
#include "bridgebench/rng.hpp"

namespace bridgebench::testutil {

inline std::string random_level(SplitMix& rng) {
  static const char kAlpha[] = "abcdefghijklmnopqrstuvwxyz0123456789";
  size_t len = 1 + rng.next_below(8);
  std::string s;
  for (size_t i = 0; i < len; ++i) s += kAlpha[rng.next_below(36)];
  return s;
}

inline std::string random_topic_name(SplitMix& rng) {
  size_t levels = 1 + rng.next_below(4);
  std::string t;
  for (size_t i = 0; i < levels; ++i) {
    if (i) t += '/';
    t += random_level(rng);
  }
  return t;
}

inline std::string random_topic_filter(SplitMix& rng) {
  size_t levels = 1 + rng.next_below(4);
  std::string t;
  for (size_t i = 0; i < levels; ++i) {
    if (i) t += '/';
    uint64_t pick = rng.next_below(10);
    if (pick == 0 && i + 1 == levels) {
      t += '#';
    } else if (pick <= 2) {
      t += '+';
    } else {
      t += random_level(rng);
    }
  }
  return t;
}

inline std::string random_text(SplitMix& rng, size_t max_len) {
  static const char kChars[] =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789 _-./:";
  size_t len = rng.next_below(max_len + 1);
  std::string s;
  for (size_t i = 0; i < len; ++i) s += kChars[rng.next_below(sizeof(kChars) - 1)];
  return s;
}

inline std::vector<uint8_t> random_payload(SplitMix& rng) {
  // Mostly small; sometimes sized to push the remaining length across the
  // 1-byte/2-byte and 2-byte/3-byte varint boundaries.
  size_t n;
  switch (rng.next_below(8)) {
    case 0: n = 100 + rng.next_below(80); break;        // straddles 127/128
    case 1: n = 16300 + rng.next_below(200); break;     // straddles 16383/16384
    default: n = rng.next_below(64); break;
  }
  std::vector<uint8_t> p(n);
  for (auto& b : p) b = static_cast<uint8_t>(rng.next());
  return p;
}

inline uint16_t random_packet_id(SplitMix& rng) {
  return static_cast<uint16_t>(1 + rng.next_below(65535));
}

/// One uniformly chosen, always-encodable packet from the supported set.
inline ControlPacket random_packet(SplitMix& rng) {
  switch (rng.next_below(11)) {
    case 0: {
      ConnectPacket p;
      p.client_id = rng.next_below(20) == 0 ? std::string{} : random_text(rng, 23);
      p.clean_start = rng.next_below(2) == 0;
      p.keep_alive = static_cast<uint16_t>(rng.next_below(70000) % 65536);
      if (rng.next_below(2) == 0) {
        p.username = random_text(rng, 16);
        if (rng.next_below(2) == 0) p.password = random_text(rng, 16);
      }
      return p;
    }
    case 1: {
      ConnackPacket p;
      p.session_present = rng.next_below(2) == 0;
      p.reason_code = rng.next_below(2) == 0 ? reason::kSuccess : reason::kClientIdInvalid;
      return p;
    }
    case 2: {
      PublishPacket p;
      p.topic = random_topic_name(rng);
      p.qos = static_cast<uint8_t>(rng.next_below(3));
      if (p.qos > 0) {
        p.packet_id = random_packet_id(rng);
        p.dup = rng.next_below(4) == 0;
      }
      p.retain = rng.next_below(8) == 0;
      size_t props = rng.next_below(3);
      for (size_t i = 0; i < props; ++i)
        p.user_properties.emplace_back(random_text(rng, 8), random_text(rng, 24));
      if (rng.next_below(4) == 0)
        p.message_expiry_s = static_cast<uint32_t>(rng.next_below(100000));
      p.payload = random_payload(rng);
      return p;
    }
    case 3: {
      AckPacket p;
      static const PacketType kAcks[] = {PacketType::Puback, PacketType::Pubrec,
                                         PacketType::Pubrel, PacketType::Pubcomp};
      p.type = kAcks[rng.next_below(4)];
      p.packet_id = random_packet_id(rng);
      p.reason_code = rng.next_below(3) == 0 ? reason::kNoMatchingSubscribers
                                             : reason::kSuccess;
      return p;
    }
    case 4: {
      SubscribePacket p;
      p.packet_id = random_packet_id(rng);
      size_t n = 1 + rng.next_below(4);
      for (size_t i = 0; i < n; ++i) {
        SubscribeOptions o;
        o.max_qos = static_cast<uint8_t>(rng.next_below(3));
        o.no_local = rng.next_below(2) == 0;
        o.retain_as_published = rng.next_below(2) == 0;
        p.entries.emplace_back(random_topic_filter(rng), o);
      }
      return p;
    }
    case 5: {
      SubackPacket p;
      p.packet_id = random_packet_id(rng);
      size_t n = 1 + rng.next_below(4);
      for (size_t i = 0; i < n; ++i)
        p.reason_codes.push_back(
            rng.next_below(5) == 0 ? reason::kUnspecifiedError
                                   : static_cast<uint8_t>(rng.next_below(3)));
      return p;
    }
    case 6: {
      UnsubscribePacket p;
      p.packet_id = random_packet_id(rng);
      size_t n = 1 + rng.next_below(4);
      for (size_t i = 0; i < n; ++i) p.filters.push_back(random_topic_filter(rng));
      return p;
    }
    case 7: {
      UnsubackPacket p;
      p.packet_id = random_packet_id(rng);
      size_t n = 1 + rng.next_below(4);
      for (size_t i = 0; i < n; ++i)
        p.reason_codes.push_back(rng.next_below(4) == 0
                                     ? reason::kNoSubscriptionExisted
                                     : reason::kSuccess);
      return p;
    }
    case 8:
      return PingreqPacket{};
    case 9:
      return PingrespPacket{};
    default: {
      DisconnectPacket p;
      p.reason_code = rng.next_below(3) == 0 ? reason::kSessionTakenOver
                                             : reason::kSuccess;
      return p;
    }
  }
}

}  // namespace bridgebench::testutil
