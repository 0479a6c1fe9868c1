#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bridgebench/bridge.hpp"
#include "bridgebench/loadgen.hpp"
#include "bridgebench/netem.hpp"

namespace bridgebench {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Link impairment profiles by link class. `gateway` covers hub-gateway to
/// source-broker edges; `cloud` is the in-datacenter default for bridge and
/// subscriber connections unless a per-role override is present.
struct LinkClassProfiles {
  LinkProfile gateway;
  LinkProfile cloud;
  std::optional<LinkProfile> bridge_in;
  std::optional<LinkProfile> bridge_out;
  std::optional<LinkProfile> subscriber;

  const LinkProfile& for_bridge_in() const {
    return bridge_in ? *bridge_in : cloud;
  }
  const LinkProfile& for_bridge_out() const {
    return bridge_out ? *bridge_out : cloud;
  }
  const LinkProfile& for_subscriber() const {
    return subscriber ? *subscriber : cloud;
  }
};

struct ScenarioConfig {
  std::string name = "scenario";
  int aut = 1;
  TopicScheme scheme = TopicScheme::Wildcard;
  uint8_t qos = 0;
  uint32_t repetitions = 10;
  uint64_t seed = 1;
  uint32_t messages_per_hub = 1000;
  RepublishMode republish = RepublishMode::Synchronous;
  ConnectionCycling cycling = ConnectionCycling::PerBatch;
  TransformMode transform = TransformMode::Unify;
  uint32_t grace_ms = 5000;
  uint16_t keep_alive_s = 60;
  bool clean_start = true;
  size_t queue_capacity = 1000;
  uint32_t retry_interval_ms = 1000;
  int32_t max_retries = 10;  ///< negative means unlimited
  uint32_t connect_timeout_ms = 2000;
  uint32_t connect_attempts = 5;
  std::optional<std::pair<std::string, std::string>> credentials;
  std::vector<ProviderSpec> providers;
  LinkClassProfiles links;
};

std::string republish_mode_name(RepublishMode m);
std::string connection_cycling_name(ConnectionCycling c);
std::string transform_mode_name(TransformMode m);
/// Config spelling: "wildcard-15" or "explicit-29".
std::string topic_scheme_config_name(TopicScheme s);

nlohmann::json to_json(const ScenarioConfig& cfg);

/// Throws ConfigError on structural problems (types, unknown enum values,
/// invalid topic strings). Semantic issues are left to validate().
ScenarioConfig config_from_json(const nlohmann::json& j);

/// Returns human-readable problems; empty means the config is runnable.
std::vector<std::string> validate(const ScenarioConfig& cfg);

/// Stable 16-hex-digit digest of the normalized config. Two configs digest
/// equal iff their normalized JSON forms are identical.
std::string config_digest(const ScenarioConfig& cfg);

ScenarioConfig load_config_file(const std::filesystem::path& path);

/// Loads "<dir>/<name>.json".
ScenarioConfig load_preset(const std::string& name,
                           const std::filesystem::path& presets_dir);

}  // namespace bridgebench
