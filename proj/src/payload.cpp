#include "bridgebench/payload.hpp"

#include <charconv>
#include <cstdio>

#include "bridgebench/rng.hpp"

namespace bridgebench {

namespace {

struct Parameter {
  const char* name;
  double lo;
  double hi;
};

constexpr Parameter kParameters[] = {
    {"temperature", -2.0, 35.0}, {"salinity", 2.0, 42.0},
    {"pressure", 980.0, 1090.0}, {"conductivity", 0.005, 8.0},
    {"oxygen", 0.1, 14.5},       {"turbidity", 0.0, 120.0},
    {"chlorophyll", 0.01, 90.0}, {"ph", 6.5, 9.1},
};
constexpr size_t kParameterCount = sizeof(kParameters) / sizeof(kParameters[0]);
constexpr double kBaseEpoch = 1690000000.0;

std::string format_reading(double ts, const char* param, double value) {
  char buf[96];
  int n = std::snprintf(buf, sizeof(buf), "%.3f %s %.3f\n", ts, param, value);
  return std::string(buf, static_cast<size_t>(n));
}

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc{} && ptr == s.data() + s.size();
}

}  // namespace

std::vector<uint8_t> generate_sensor_payload(size_t target_bytes,
                                             const std::string& hub_id,
                                             uint64_t seed, uint64_t seq) {
  std::string doc;
  doc.reserve(target_bytes);

  char header[128];
  int hn = std::snprintf(header, sizeof(header), "# hub=%s seq=%llu\n",
                         hub_id.c_str(), static_cast<unsigned long long>(seq));
  std::string header_s(header, static_cast<size_t>(hn));
  if (header_s.size() + 2 > target_bytes) {
    // Degenerate target: keep the size contract, drop the structure.
    return std::vector<uint8_t>(target_bytes, '#');
  }
  doc += header_s;

  SplitMix rng(mix64(seed, fnv1a64(hub_id), seq));
  double ts = kBaseEpoch + static_cast<double>(seq) * 60.0;
  std::vector<size_t> line_sizes;
  while (true) {
    const Parameter& p = kParameters[rng.next_below(kParameterCount)];
    double value = p.lo + rng.next_u01() * (p.hi - p.lo);
    std::string line = format_reading(ts, p.name, value);
    ts += 1.0;
    size_t after = doc.size() + line.size();
    if (after > target_bytes || target_bytes - after == 1) break;
    doc += line;
    line_sizes.push_back(line.size());
    if (after == target_bytes) break;
  }

  size_t pad = target_bytes - doc.size();
  if (pad == 1 && !line_sizes.empty()) {
    doc.resize(doc.size() - line_sizes.back());
    pad += line_sizes.back();
  }
  if (pad > 0) {
    std::string tail = "#";
    static const char kHex[] = "0123456789abcdef";
    while (tail.size() < pad - 1) tail += kHex[rng.next_below(16)];
    tail += '\n';
    doc += tail;
  }
  return std::vector<uint8_t>(doc.begin(), doc.end());
}

std::optional<std::vector<SensorReading>> parse_sensor_payload(
    std::span<const uint8_t> data) {
  std::string_view text(reinterpret_cast<const char*>(data.data()), data.size());
  std::vector<SensorReading> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line =
        text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                       : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (line.empty() || line[0] == '#') continue;

    size_t s1 = line.find(' ');
    if (s1 == std::string_view::npos) return std::nullopt;
    size_t s2 = line.find(' ', s1 + 1);
    if (s2 == std::string_view::npos) return std::nullopt;
    std::string_view ts = line.substr(0, s1);
    std::string_view param = line.substr(s1 + 1, s2 - s1 - 1);
    std::string_view value = line.substr(s2 + 1);
    double d;
    if (!parse_number(ts, d) || param.empty() || !parse_number(value, d))
      return std::nullopt;
    if (value.find(' ') != std::string_view::npos) return std::nullopt;
    out.push_back(SensorReading{std::string(ts), std::string(param),
                                std::string(value)});
  }
  if (out.empty()) return std::nullopt;
  return out;
}

}  // namespace bridgebench
