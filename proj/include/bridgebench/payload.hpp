#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace bridgebench {

/// One line of the synthetic sensor document: "<timestamp> <parameter> <value>".
/// Tokens are kept as text so re-emission is byte-stable.
struct SensorReading {
  std::string timestamp;
  std::string parameter;
  std::string value;
  bool operator==(const SensorReading&) const = default;
};

/// Deterministic pseudo-sensor document of exactly `target_bytes` bytes:
/// a comment header naming hub and sequence, timestamped readings, and a
/// trailing comment that pads to the exact size. Content depends only on
/// (seed, hub_id, seq).
std::vector<uint8_t> generate_sensor_payload(size_t target_bytes,
                                             const std::string& hub_id,
                                             uint64_t seed, uint64_t seq);

/// Parse a sensor document back into readings. Comment lines ('#') are
/// skipped. Returns nullopt if any data line is malformed or no reading is
/// present.
std::optional<std::vector<SensorReading>> parse_sensor_payload(
    std::span<const uint8_t> data);

}  // namespace bridgebench
