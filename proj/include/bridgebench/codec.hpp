#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace bridgebench {

/// MQTT 5.0 control packet types (first nibble of the fixed header).
enum class PacketType : uint8_t {
  Connect = 1,
  Connack = 2,
  Publish = 3,
  Puback = 4,
  Pubrec = 5,
  Pubrel = 6,
  Pubcomp = 7,
  Subscribe = 8,
  Suback = 9,
  Unsubscribe = 10,
  Unsuback = 11,
  Pingreq = 12,
  Pingresp = 13,
  Disconnect = 14,
  Auth = 15,
};

const char* packet_type_name(PacketType t);

/// Reason codes used by this stack (subset of the MQTT 5.0 table).
namespace reason {
constexpr uint8_t kSuccess = 0x00;
constexpr uint8_t kNoMatchingSubscribers = 0x10;
constexpr uint8_t kNoSubscriptionExisted = 0x11;
constexpr uint8_t kUnspecifiedError = 0x80;
constexpr uint8_t kMalformedPacket = 0x81;
constexpr uint8_t kProtocolError = 0x82;
constexpr uint8_t kClientIdInvalid = 0x85;
constexpr uint8_t kBadUserNameOrPassword = 0x86;
constexpr uint8_t kServerBusy = 0x89;
constexpr uint8_t kSessionTakenOver = 0x8E;
constexpr uint8_t kPacketIdInUse = 0x91;
constexpr uint8_t kQuotaExceeded = 0x97;
}  // namespace reason

using UserProperty = std::pair<std::string, std::string>;

struct ConnectPacket {
  std::string client_id;
  bool clean_start = true;
  uint16_t keep_alive = 60;
  std::optional<std::string> username;
  std::optional<std::string> password;
  bool operator==(const ConnectPacket&) const = default;
};

struct ConnackPacket {
  bool session_present = false;
  uint8_t reason_code = reason::kSuccess;
  bool operator==(const ConnackPacket&) const = default;
};

struct PublishPacket {
  std::string topic;
  uint8_t qos = 0;
  bool dup = false;
  bool retain = false;
  uint16_t packet_id = 0;  ///< only meaningful for qos > 0
  std::vector<UserProperty> user_properties;
  std::optional<uint32_t> message_expiry_s;
  std::vector<uint8_t> payload;
  bool operator==(const PublishPacket&) const = default;
};

/// PUBACK, PUBREC, PUBREL and PUBCOMP share one body layout; `type`
/// distinguishes them. A zero reason code encodes in the 2-byte short form.
struct AckPacket {
  PacketType type = PacketType::Puback;
  uint16_t packet_id = 0;
  uint8_t reason_code = reason::kSuccess;
  bool operator==(const AckPacket&) const = default;
};

struct SubscribeOptions {
  uint8_t max_qos = 0;
  bool no_local = false;
  bool retain_as_published = false;
  bool operator==(const SubscribeOptions&) const = default;
};

struct SubscribePacket {
  uint16_t packet_id = 0;
  std::vector<std::pair<std::string, SubscribeOptions>> entries;
  bool operator==(const SubscribePacket&) const = default;
};

struct SubackPacket {
  uint16_t packet_id = 0;
  std::vector<uint8_t> reason_codes;
  bool operator==(const SubackPacket&) const = default;
};

struct UnsubscribePacket {
  uint16_t packet_id = 0;
  std::vector<std::string> filters;
  bool operator==(const UnsubscribePacket&) const = default;
};

struct UnsubackPacket {
  uint16_t packet_id = 0;
  std::vector<uint8_t> reason_codes;
  bool operator==(const UnsubackPacket&) const = default;
};

struct PingreqPacket {
  bool operator==(const PingreqPacket&) const = default;
};

struct PingrespPacket {
  bool operator==(const PingrespPacket&) const = default;
};

struct DisconnectPacket {
  uint8_t reason_code = reason::kSuccess;
  bool operator==(const DisconnectPacket&) const = default;
};

using ControlPacket =
    std::variant<ConnectPacket, ConnackPacket, PublishPacket, AckPacket,
                 SubscribePacket, SubackPacket, UnsubscribePacket,
                 UnsubackPacket, PingreqPacket, PingrespPacket,
                 DisconnectPacket>;

PacketType packet_type(const ControlPacket& p);

/// Thrown by encode() when a packet violates an encodable invariant
/// (oversize remaining length, wildcard in a publish topic, qos 3, ...).
class CodecError : public std::runtime_error {
 public:
  explicit CodecError(const std::string& what) : std::runtime_error(what) {}
};

enum class DecodeStatus {
  Ok,            ///< one complete packet decoded
  NeedMoreBytes, ///< prefix of a valid packet; read more and retry
  Malformed,     ///< can never become valid; close the connection
  Unsupported,   ///< well-formed but outside the implemented subset (AUTH)
};

struct DecodeResult {
  DecodeStatus status = DecodeStatus::Malformed;
  ControlPacket packet;      ///< valid iff status == Ok
  size_t consumed = 0;       ///< bytes consumed iff status == Ok
  size_t bytes_needed = 0;   ///< lower bound on total frame size when known
  std::string error;         ///< diagnostic for Malformed / Unsupported
};

/// Serialize one control packet to wire bytes. Throws CodecError.
std::vector<uint8_t> encode(const ControlPacket& p);

/// Total wire size encode() would produce, without building the buffer.
size_t packet_size(const ControlPacket& p);

/// Decode the first packet from `data`. Never throws; never reads past the
/// end; consumes nothing unless a full packet is present and valid.
DecodeResult decode(std::span<const uint8_t> data);

/// Variable byte integer helpers (exposed for tests and size accounting).
/// Encoded length is 1..4 bytes; maximum value 268435455.
constexpr uint32_t kMaxVarint = 268435455u;
constexpr size_t kMaxPacketSize = size_t{kMaxVarint} + 5;

void encode_varint(std::vector<uint8_t>& out, uint32_t value);  // throws CodecError
size_t varint_size(uint32_t value);

struct VarintResult {
  DecodeStatus status = DecodeStatus::Malformed;
  uint32_t value = 0;
  size_t length = 0;  ///< bytes consumed when Ok
};
VarintResult decode_varint(std::span<const uint8_t> data);

}  // namespace bridgebench
