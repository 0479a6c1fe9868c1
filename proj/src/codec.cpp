#include "bridgebench/codec.hpp"

#include <cstring>

namespace bridgebench {

namespace {

constexpr uint8_t kPropMessageExpiry = 0x02;
constexpr uint8_t kPropUserProperty = 0x26;

class ByteWriter {
 public:
  std::vector<uint8_t> take() { return std::move(buf_); }

  void u8(uint8_t v) { buf_.push_back(v); }

  void u16(uint16_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 8));
    buf_.push_back(static_cast<uint8_t>(v & 0xff));
  }

  void u32(uint32_t v) {
    buf_.push_back(static_cast<uint8_t>(v >> 24));
    buf_.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
    buf_.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
    buf_.push_back(static_cast<uint8_t>(v & 0xff));
  }

  void varint(uint32_t v) { encode_varint(buf_, v); }

  void str(const std::string& s) {
    if (s.size() > 0xffff) throw CodecError("string exceeds 65535 bytes");
    u16(static_cast<uint16_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }

  void raw(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }

  size_t size() const { return buf_.size(); }

 private:
  std::vector<uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const uint8_t> d) : data_(d) {}

  bool ok() const { return ok_; }
  size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return pos_ == data_.size(); }

  uint8_t u8() {
    if (remaining() < 1) return fail<uint8_t>();
    return data_[pos_++];
  }

  uint16_t u16() {
    if (remaining() < 2) return fail<uint16_t>();
    uint16_t v = static_cast<uint16_t>(data_[pos_] << 8 | data_[pos_ + 1]);
    pos_ += 2;
    return v;
  }

  uint32_t u32() {
    if (remaining() < 4) return fail<uint32_t>();
    uint32_t v = (uint32_t{data_[pos_]} << 24) | (uint32_t{data_[pos_ + 1]} << 16) |
                 (uint32_t{data_[pos_ + 2]} << 8) | uint32_t{data_[pos_ + 3]};
    pos_ += 4;
    return v;
  }

  uint32_t varint() {
    auto r = decode_varint(data_.subspan(pos_));
    if (r.status != DecodeStatus::Ok) return fail<uint32_t>();
    pos_ += r.length;
    return r.value;
  }

  std::string str() {
    uint16_t n = u16();
    if (!ok_ || remaining() < n) return fail<std::string>();
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    if (s.find('\0') != std::string::npos) return fail<std::string>();
    return s;
  }

  std::vector<uint8_t> rest() {
    std::vector<uint8_t> v(data_.begin() + pos_, data_.end());
    pos_ = data_.size();
    return v;
  }

  std::span<const uint8_t> take(size_t n) {
    if (remaining() < n) return fail<std::span<const uint8_t>>();
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  template <typename T>
  T fail() {
    ok_ = false;
    return T{};
  }

  std::span<const uint8_t> data_;
  size_t pos_ = 0;
  bool ok_ = true;
};

DecodeResult malformed(std::string msg) {
  DecodeResult r;
  r.status = DecodeStatus::Malformed;
  r.error = std::move(msg);
  return r;
}

DecodeResult unsupported(std::string msg) {
  DecodeResult r;
  r.status = DecodeStatus::Unsupported;
  r.error = std::move(msg);
  return r;
}

bool topic_name_encodable(const std::string& t) {
  return !t.empty() && t.find_first_of("+#") == std::string::npos &&
         t.find('\0') == std::string::npos;
}

/// Properties block for the publish flow: Message Expiry Interval and User
/// Property only. Everything else in the identifier table is outside the
/// implemented subset and rejected as malformed.
void write_publish_properties(ByteWriter& w, const PublishPacket& p) {
  ByteWriter props;
  if (p.message_expiry_s) {
    props.u8(kPropMessageExpiry);
    props.u32(*p.message_expiry_s);
  }
  for (const auto& [k, v] : p.user_properties) {
    props.u8(kPropUserProperty);
    props.str(k);
    props.str(v);
  }
  auto bytes = props.take();
  if (bytes.size() > kMaxVarint) throw CodecError("properties too large");
  w.varint(static_cast<uint32_t>(bytes.size()));
  w.raw(bytes);
}

bool read_publish_properties(ByteReader& r, PublishPacket& p, std::string& err) {
  uint32_t len = r.varint();
  if (!r.ok() || r.remaining() < len) {
    err = "bad property length";
    return false;
  }
  ByteReader pr(r.take(len));
  while (!pr.done()) {
    uint8_t id = pr.u8();
    switch (id) {
      case kPropMessageExpiry: {
        uint32_t v = pr.u32();
        if (!pr.ok()) {
          err = "truncated message expiry property";
          return false;
        }
        p.message_expiry_s = v;
        break;
      }
      case kPropUserProperty: {
        std::string k = pr.str();
        std::string v = pr.str();
        if (!pr.ok()) {
          err = "truncated user property";
          return false;
        }
        p.user_properties.emplace_back(std::move(k), std::move(v));
        break;
      }
      default:
        err = "unsupported property id " + std::to_string(id);
        return false;
    }
  }
  return true;
}

/// Packets other than PUBLISH carry no properties in this subset, so their
/// block must decode to length zero.
bool read_empty_properties(ByteReader& r, std::string& err) {
  uint32_t len = r.varint();
  if (!r.ok()) {
    err = "bad property length";
    return false;
  }
  if (len != 0) {
    err = "unexpected properties";
    return false;
  }
  return true;
}

ControlPacket make_ack(PacketType t, uint16_t id, uint8_t rc) {
  AckPacket a;
  a.type = t;
  a.packet_id = id;
  a.reason_code = rc;
  return a;
}

DecodeResult decode_body(PacketType type, uint8_t flags, std::span<const uint8_t> body) {
  DecodeResult out;
  out.status = DecodeStatus::Ok;
  ByteReader r(body);
  std::string err;

  const uint8_t expected_flags =
      (type == PacketType::Pubrel || type == PacketType::Subscribe ||
       type == PacketType::Unsubscribe)
          ? 0x02
          : 0x00;
  if (type != PacketType::Publish && flags != expected_flags)
    return malformed("invalid fixed header flags for " +
                     std::string(packet_type_name(type)));

  switch (type) {
    case PacketType::Connect: {
      ConnectPacket p;
      std::string proto = r.str();
      if (!r.ok() || proto != "MQTT") return malformed("bad protocol name");
      uint8_t version = r.u8();
      if (!r.ok()) return malformed("truncated connect");
      if (version != 5)
        return unsupported("protocol version " + std::to_string(version));
      uint8_t cf = r.u8();
      uint16_t ka = r.u16();
      if (!r.ok()) return malformed("truncated connect");
      if (cf & 0x01) return malformed("connect reserved flag set");
      if (cf & 0x04) return unsupported("will messages not supported");
      if (cf & 0x38) return malformed("will flags without will");
      p.clean_start = cf & 0x02;
      p.keep_alive = ka;
      if (!read_empty_properties(r, err)) return malformed(err);
      p.client_id = r.str();
      if (!r.ok()) return malformed("bad client id");
      if (cf & 0x80) {
        p.username = r.str();
        if (!r.ok()) return malformed("bad username");
      }
      if (cf & 0x40) {
        p.password = r.str();
        if (!r.ok()) return malformed("bad password");
      }
      if (!r.done()) return malformed("trailing bytes in connect");
      out.packet = std::move(p);
      return out;
    }

    case PacketType::Connack: {
      ConnackPacket p;
      uint8_t ack_flags = r.u8();
      uint8_t rc = r.u8();
      if (!r.ok()) return malformed("truncated connack");
      if (ack_flags & ~0x01) return malformed("connack reserved flags set");
      p.session_present = ack_flags & 0x01;
      p.reason_code = rc;
      if (!read_empty_properties(r, err)) return malformed(err);
      if (!r.done()) return malformed("trailing bytes in connack");
      out.packet = p;
      return out;
    }

    case PacketType::Publish: {
      PublishPacket p;
      p.dup = flags & 0x08;
      p.qos = (flags >> 1) & 0x03;
      p.retain = flags & 0x01;
      if (p.qos == 3) return malformed("publish qos 3");
      if (p.dup && p.qos == 0) return malformed("dup set on qos 0 publish");
      p.topic = r.str();
      if (!r.ok()) return malformed("bad publish topic");
      if (!topic_name_encodable(p.topic))
        return malformed("invalid publish topic name");
      if (p.qos > 0) {
        p.packet_id = r.u16();
        if (!r.ok()) return malformed("truncated publish");
        if (p.packet_id == 0) return malformed("publish packet id 0");
      }
      if (!read_publish_properties(r, p, err)) return malformed(err);
      p.payload = r.rest();
      out.packet = std::move(p);
      return out;
    }

    case PacketType::Puback:
    case PacketType::Pubrec:
    case PacketType::Pubrel:
    case PacketType::Pubcomp: {
      uint16_t id = r.u16();
      if (!r.ok()) return malformed("truncated ack");
      if (id == 0) return malformed("ack packet id 0");
      uint8_t rc = reason::kSuccess;
      if (!r.done()) {
        rc = r.u8();
        if (!r.done()) {
          if (!read_empty_properties(r, err)) return malformed(err);
          if (!r.done()) return malformed("trailing bytes in ack");
        }
      }
      out.packet = make_ack(type, id, rc);
      return out;
    }

    case PacketType::Subscribe: {
      SubscribePacket p;
      p.packet_id = r.u16();
      if (!r.ok()) return malformed("truncated subscribe");
      if (p.packet_id == 0) return malformed("subscribe packet id 0");
      if (!read_empty_properties(r, err)) return malformed(err);
      while (!r.done()) {
        std::string filter = r.str();
        uint8_t opts = r.u8();
        if (!r.ok()) return malformed("truncated subscribe entry");
        if (opts & 0xc0) return malformed("subscribe reserved bits set");
        if (opts & 0x30) return malformed("retain handling not supported");
        SubscribeOptions so;
        so.max_qos = opts & 0x03;
        if (so.max_qos == 3) return malformed("subscribe qos 3");
        so.no_local = opts & 0x04;
        so.retain_as_published = opts & 0x08;
        p.entries.emplace_back(std::move(filter), so);
      }
      if (p.entries.empty()) return malformed("subscribe with no entries");
      out.packet = std::move(p);
      return out;
    }

    case PacketType::Suback:
    case PacketType::Unsuback: {
      uint16_t id = r.u16();
      if (!r.ok()) return malformed("truncated suback");
      if (id == 0) return malformed("suback packet id 0");
      if (!read_empty_properties(r, err)) return malformed(err);
      std::vector<uint8_t> codes;
      while (!r.done()) codes.push_back(r.u8());
      if (codes.empty()) return malformed("suback with no reason codes");
      if (type == PacketType::Suback) {
        SubackPacket p;
        p.packet_id = id;
        p.reason_codes = std::move(codes);
        out.packet = std::move(p);
      } else {
        UnsubackPacket p;
        p.packet_id = id;
        p.reason_codes = std::move(codes);
        out.packet = std::move(p);
      }
      return out;
    }

    case PacketType::Unsubscribe: {
      UnsubscribePacket p;
      p.packet_id = r.u16();
      if (!r.ok()) return malformed("truncated unsubscribe");
      if (p.packet_id == 0) return malformed("unsubscribe packet id 0");
      if (!read_empty_properties(r, err)) return malformed(err);
      while (!r.done()) {
        std::string f = r.str();
        if (!r.ok()) return malformed("bad unsubscribe filter");
        p.filters.push_back(std::move(f));
      }
      if (p.filters.empty()) return malformed("unsubscribe with no filters");
      out.packet = std::move(p);
      return out;
    }

    case PacketType::Pingreq:
      if (!body.empty()) return malformed("pingreq with payload");
      out.packet = PingreqPacket{};
      return out;

    case PacketType::Pingresp:
      if (!body.empty()) return malformed("pingresp with payload");
      out.packet = PingrespPacket{};
      return out;

    case PacketType::Disconnect: {
      DisconnectPacket p;
      if (!r.done()) {
        p.reason_code = r.u8();
        if (!r.done()) {
          if (!read_empty_properties(r, err)) return malformed(err);
          if (!r.done()) return malformed("trailing bytes in disconnect");
        }
      }
      out.packet = p;
      return out;
    }

    case PacketType::Auth:
      return unsupported("auth not supported");
  }
  return malformed("unreachable packet type");
}

struct Encoder {
  uint8_t first_byte = 0;
  ByteWriter body;

  std::vector<uint8_t> finish() {
    auto b = body.take();
    if (b.size() > kMaxVarint) throw CodecError("remaining length too large");
    std::vector<uint8_t> out;
    out.reserve(b.size() + 5);
    out.push_back(first_byte);
    encode_varint(out, static_cast<uint32_t>(b.size()));
    out.insert(out.end(), b.begin(), b.end());
    return out;
  }
};

uint8_t first_byte_for(PacketType t, uint8_t flags) {
  return static_cast<uint8_t>((static_cast<uint8_t>(t) << 4) | flags);
}

}  // namespace

const char* packet_type_name(PacketType t) {
  switch (t) {
    case PacketType::Connect: return "CONNECT";
    case PacketType::Connack: return "CONNACK";
    case PacketType::Publish: return "PUBLISH";
    case PacketType::Puback: return "PUBACK";
    case PacketType::Pubrec: return "PUBREC";
    case PacketType::Pubrel: return "PUBREL";
    case PacketType::Pubcomp: return "PUBCOMP";
    case PacketType::Subscribe: return "SUBSCRIBE";
    case PacketType::Suback: return "SUBACK";
    case PacketType::Unsubscribe: return "UNSUBSCRIBE";
    case PacketType::Unsuback: return "UNSUBACK";
    case PacketType::Pingreq: return "PINGREQ";
    case PacketType::Pingresp: return "PINGRESP";
    case PacketType::Disconnect: return "DISCONNECT";
    case PacketType::Auth: return "AUTH";
  }
  return "UNKNOWN";
}

PacketType packet_type(const ControlPacket& p) {
  return std::visit(
      [](const auto& v) -> PacketType {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, ConnectPacket>) return PacketType::Connect;
        else if constexpr (std::is_same_v<T, ConnackPacket>) return PacketType::Connack;
        else if constexpr (std::is_same_v<T, PublishPacket>) return PacketType::Publish;
        else if constexpr (std::is_same_v<T, AckPacket>) return v.type;
        else if constexpr (std::is_same_v<T, SubscribePacket>) return PacketType::Subscribe;
        else if constexpr (std::is_same_v<T, SubackPacket>) return PacketType::Suback;
        else if constexpr (std::is_same_v<T, UnsubscribePacket>) return PacketType::Unsubscribe;
        else if constexpr (std::is_same_v<T, UnsubackPacket>) return PacketType::Unsuback;
        else if constexpr (std::is_same_v<T, PingreqPacket>) return PacketType::Pingreq;
        else if constexpr (std::is_same_v<T, PingrespPacket>) return PacketType::Pingresp;
        else return PacketType::Disconnect;
      },
      p);
}

void encode_varint(std::vector<uint8_t>& out, uint32_t value) {
  if (value > kMaxVarint) throw CodecError("varint value out of range");
  do {
    uint8_t byte = value & 0x7f;
    value >>= 7;
    if (value) byte |= 0x80;
    out.push_back(byte);
  } while (value);
}

size_t varint_size(uint32_t value) {
  if (value > kMaxVarint) throw CodecError("varint value out of range");
  if (value < 128) return 1;
  if (value < 16384) return 2;
  if (value < 2097152) return 3;
  return 4;
}

VarintResult decode_varint(std::span<const uint8_t> data) {
  VarintResult r;
  uint32_t value = 0;
  for (size_t i = 0; i < 4; ++i) {
    if (i >= data.size()) {
      r.status = DecodeStatus::NeedMoreBytes;
      return r;
    }
    uint8_t byte = data[i];
    value |= uint32_t{static_cast<uint8_t>(byte & 0x7f)} << (7 * i);
    if (!(byte & 0x80)) {
      if (i > 0 && (byte & 0x7f) == 0) {
        r.status = DecodeStatus::Malformed;  // non-minimal encoding
        return r;
      }
      r.status = DecodeStatus::Ok;
      r.value = value;
      r.length = i + 1;
      return r;
    }
  }
  r.status = DecodeStatus::Malformed;  // continuation bit on 4th byte
  return r;
}

std::vector<uint8_t> encode(const ControlPacket& packet) {
  Encoder e;
  std::visit(
      [&e](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, ConnectPacket>) {
          e.first_byte = first_byte_for(PacketType::Connect, 0);
          e.body.str("MQTT");
          e.body.u8(5);
          uint8_t cf = 0;
          if (p.clean_start) cf |= 0x02;
          if (p.username) cf |= 0x80;
          if (p.password) cf |= 0x40;
          e.body.u8(cf);
          e.body.u16(p.keep_alive);
          e.body.varint(0);
          e.body.str(p.client_id);
          if (p.username) e.body.str(*p.username);
          if (p.password) e.body.str(*p.password);
        } else if constexpr (std::is_same_v<T, ConnackPacket>) {
          e.first_byte = first_byte_for(PacketType::Connack, 0);
          e.body.u8(p.session_present ? 0x01 : 0x00);
          e.body.u8(p.reason_code);
          e.body.varint(0);
        } else if constexpr (std::is_same_v<T, PublishPacket>) {
          if (p.qos > 2) throw CodecError("publish qos out of range");
          if (p.dup && p.qos == 0) throw CodecError("dup on qos 0 publish");
          if (!topic_name_encodable(p.topic)) throw CodecError("invalid publish topic");
          if (p.qos > 0 && p.packet_id == 0) throw CodecError("publish packet id 0");
          uint8_t flags = static_cast<uint8_t>(p.qos << 1);
          if (p.dup) flags |= 0x08;
          if (p.retain) flags |= 0x01;
          e.first_byte = first_byte_for(PacketType::Publish, flags);
          e.body.str(p.topic);
          if (p.qos > 0) e.body.u16(p.packet_id);
          write_publish_properties(e.body, p);
          e.body.raw(p.payload);
        } else if constexpr (std::is_same_v<T, AckPacket>) {
          if (p.type != PacketType::Puback && p.type != PacketType::Pubrec &&
              p.type != PacketType::Pubrel && p.type != PacketType::Pubcomp)
            throw CodecError("bad ack packet type");
          if (p.packet_id == 0) throw CodecError("ack packet id 0");
          uint8_t flags = p.type == PacketType::Pubrel ? 0x02 : 0x00;
          e.first_byte = first_byte_for(p.type, flags);
          e.body.u16(p.packet_id);
          if (p.reason_code != reason::kSuccess) e.body.u8(p.reason_code);
        } else if constexpr (std::is_same_v<T, SubscribePacket>) {
          if (p.packet_id == 0) throw CodecError("subscribe packet id 0");
          if (p.entries.empty()) throw CodecError("subscribe with no entries");
          e.first_byte = first_byte_for(PacketType::Subscribe, 0x02);
          e.body.u16(p.packet_id);
          e.body.varint(0);
          for (const auto& [filter, so] : p.entries) {
            if (so.max_qos > 2) throw CodecError("subscribe qos out of range");
            e.body.str(filter);
            uint8_t opts = so.max_qos;
            if (so.no_local) opts |= 0x04;
            if (so.retain_as_published) opts |= 0x08;
            e.body.u8(opts);
          }
        } else if constexpr (std::is_same_v<T, SubackPacket>) {
          if (p.packet_id == 0) throw CodecError("suback packet id 0");
          if (p.reason_codes.empty()) throw CodecError("suback with no codes");
          e.first_byte = first_byte_for(PacketType::Suback, 0);
          e.body.u16(p.packet_id);
          e.body.varint(0);
          for (uint8_t c : p.reason_codes) e.body.u8(c);
        } else if constexpr (std::is_same_v<T, UnsubscribePacket>) {
          if (p.packet_id == 0) throw CodecError("unsubscribe packet id 0");
          if (p.filters.empty()) throw CodecError("unsubscribe with no filters");
          e.first_byte = first_byte_for(PacketType::Unsubscribe, 0x02);
          e.body.u16(p.packet_id);
          e.body.varint(0);
          for (const auto& f : p.filters) e.body.str(f);
        } else if constexpr (std::is_same_v<T, UnsubackPacket>) {
          if (p.packet_id == 0) throw CodecError("unsuback packet id 0");
          if (p.reason_codes.empty()) throw CodecError("unsuback with no codes");
          e.first_byte = first_byte_for(PacketType::Unsuback, 0);
          e.body.u16(p.packet_id);
          e.body.varint(0);
          for (uint8_t c : p.reason_codes) e.body.u8(c);
        } else if constexpr (std::is_same_v<T, PingreqPacket>) {
          e.first_byte = first_byte_for(PacketType::Pingreq, 0);
        } else if constexpr (std::is_same_v<T, PingrespPacket>) {
          e.first_byte = first_byte_for(PacketType::Pingresp, 0);
        } else if constexpr (std::is_same_v<T, DisconnectPacket>) {
          e.first_byte = first_byte_for(PacketType::Disconnect, 0);
          if (p.reason_code != reason::kSuccess) e.body.u8(p.reason_code);
        }
      },
      packet);
  return e.finish();
}

size_t packet_size(const ControlPacket& p) { return encode(p).size(); }

DecodeResult decode(std::span<const uint8_t> data) {
  if (data.size() < 2) {
    DecodeResult r;
    r.status = DecodeStatus::NeedMoreBytes;
    r.bytes_needed = 2;
    return r;
  }
  uint8_t first = data[0];
  uint8_t type_code = first >> 4;
  uint8_t flags = first & 0x0f;
  if (type_code == 0) return malformed("reserved packet type 0");

  auto vr = decode_varint(data.subspan(1));
  if (vr.status == DecodeStatus::NeedMoreBytes) {
    DecodeResult r;
    r.status = DecodeStatus::NeedMoreBytes;
    r.bytes_needed = data.size() + 1;
    return r;
  }
  if (vr.status == DecodeStatus::Malformed) return malformed("bad remaining length");

  size_t total = 1 + vr.length + vr.value;
  if (data.size() < total) {
    DecodeResult r;
    r.status = DecodeStatus::NeedMoreBytes;
    r.bytes_needed = total;
    return r;
  }

  auto body = data.subspan(1 + vr.length, vr.value);
  DecodeResult r = decode_body(static_cast<PacketType>(type_code), flags, body);
  if (r.status == DecodeStatus::Ok) r.consumed = total;
  return r;
}

}  // namespace bridgebench
