#include "bridgebench/scenario.hpp"

#include <fstream>
#include <set>

#include "bridgebench/rng.hpp"

namespace bridgebench {

using nlohmann::json;

std::string republish_mode_name(RepublishMode m) {
  return m == RepublishMode::Synchronous ? "synchronous" : "asynchronous";
}

std::string connection_cycling_name(ConnectionCycling c) {
  switch (c) {
    case ConnectionCycling::PerBatch: return "per-batch";
    case ConnectionCycling::PerMessage: return "per-message";
    case ConnectionCycling::Persistent: return "persistent";
  }
  return "per-batch";
}

std::string transform_mode_name(TransformMode m) {
  return m == TransformMode::Unify ? "unify" : "identity";
}

std::string topic_scheme_config_name(TopicScheme s) {
  return s == TopicScheme::Wildcard ? "wildcard-15" : "explicit-29";
}

namespace {

template <typename T>
T parse_enum(const std::string& value, const std::string& field,
             std::initializer_list<std::pair<const char*, T>> table) {
  for (const auto& [name, v] : table)
    if (value == name) return v;
  std::string allowed;
  for (const auto& [name, v] : table) {
    if (!allowed.empty()) allowed += ", ";
    allowed += name;
  }
  throw ConfigError(field + ": unknown value \"" + value + "\" (expected " +
                    allowed + ")");
}

json link_to_json(const LinkProfile& p) {
  json j;
  j["one_way_delay_ms"] = p.one_way_delay_ms;
  j["jitter_ms"] = p.jitter_ms;
  j["bandwidth_bytes_per_s"] = p.bandwidth_bytes_per_s;
  j["segment_loss_p"] = p.segment_loss_p;
  if (p.segment_loss_p_reverse)
    j["segment_loss_p_reverse"] = *p.segment_loss_p_reverse;
  j["segment_size"] = p.segment_size;
  j["per_connection_overhead_ms"] = p.per_connection_overhead_ms;
  if (!p.forced_drops.empty()) {
    json drops = json::array();
    for (const auto& [d, ord] : p.forced_drops)
      drops.push_back({{"direction", direction_name(d)}, {"ordinal", ord}});
    j["forced_drops"] = drops;
  }
  return j;
}

LinkProfile link_from_json(const json& j, const std::string& field) {
  if (!j.is_object()) throw ConfigError(field + ": expected an object");
  LinkProfile p;
  p.one_way_delay_ms = j.value("one_way_delay_ms", 0.0);
  p.jitter_ms = j.value("jitter_ms", 0.0);
  p.bandwidth_bytes_per_s = j.value("bandwidth_bytes_per_s", 0.0);
  p.segment_loss_p = j.value("segment_loss_p", 0.0);
  if (j.contains("segment_loss_p_reverse"))
    p.segment_loss_p_reverse = j.at("segment_loss_p_reverse").get<double>();
  p.segment_size = j.value("segment_size", 1460u);
  p.per_connection_overhead_ms = j.value("per_connection_overhead_ms", 0.0);
  if (j.contains("forced_drops")) {
    for (const auto& d : j.at("forced_drops")) {
      std::string dir = d.at("direction").get<std::string>();
      if (dir != "up" && dir != "down")
        throw ConfigError(field + ".forced_drops: direction must be up|down");
      p.forced_drops.emplace_back(dir == "up" ? Direction::ClientToBroker
                                              : Direction::BrokerToClient,
                                  d.at("ordinal").get<uint64_t>());
    }
  }
  return p;
}

}  // namespace

json to_json(const ScenarioConfig& cfg) {
  json j;
  j["name"] = cfg.name;
  j["aut"] = cfg.aut;
  j["topic_scheme"] = topic_scheme_config_name(cfg.scheme);
  j["qos"] = cfg.qos;
  j["repetitions"] = cfg.repetitions;
  j["seed"] = cfg.seed;
  j["messages_per_hub"] = cfg.messages_per_hub;
  j["republish_mode"] = republish_mode_name(cfg.republish);
  j["connection_cycling"] = connection_cycling_name(cfg.cycling);
  j["transform_mode"] = transform_mode_name(cfg.transform);
  j["grace_period_ms"] = cfg.grace_ms;
  j["keep_alive_s"] = cfg.keep_alive_s;
  j["clean_start"] = cfg.clean_start;
  j["queue_capacity"] = cfg.queue_capacity;
  j["retry_interval_ms"] = cfg.retry_interval_ms;
  j["max_retries"] = cfg.max_retries;
  j["connect_timeout_ms"] = cfg.connect_timeout_ms;
  j["connect_attempts"] = cfg.connect_attempts;
  if (cfg.credentials) {
    j["credentials"] = {{"username", cfg.credentials->first},
                        {"password", cfg.credentials->second}};
  }

  json providers = json::array();
  for (const ProviderSpec& p : cfg.providers) {
    json jp;
    jp["id"] = p.id;
    jp["unify_ratio"] = p.unify_ratio;
    json gateways = json::array();
    for (const GatewaySpec& g : p.gateways) {
      json jg;
      jg["id"] = g.id;
      jg["batches_per_second"] = g.batches_per_s;
      json hubs = json::array();
      for (const HubSpec& h : g.hubs) {
        json jh;
        jh["id"] = h.id;
        jh["payload_bytes"] = h.payload_bytes;
        jh["topic"] = h.topic.str();
        jh["payload_seed"] = h.payload_seed;
        hubs.push_back(jh);
      }
      jg["hubs"] = hubs;
      gateways.push_back(jg);
    }
    jp["gateways"] = gateways;
    providers.push_back(jp);
  }
  j["providers"] = providers;

  json links;
  links["gateway"] = link_to_json(cfg.links.gateway);
  links["cloud"] = link_to_json(cfg.links.cloud);
  if (cfg.links.bridge_in) links["bridge_in"] = link_to_json(*cfg.links.bridge_in);
  if (cfg.links.bridge_out)
    links["bridge_out"] = link_to_json(*cfg.links.bridge_out);
  if (cfg.links.subscriber)
    links["subscriber"] = link_to_json(*cfg.links.subscriber);
  j["links"] = links;
  return j;
}

ScenarioConfig config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  ScenarioConfig cfg;
  try {
    cfg.name = j.value("name", cfg.name);
    cfg.aut = j.value("aut", cfg.aut);
    if (j.contains("topic_scheme"))
      cfg.scheme = parse_enum<TopicScheme>(
          j.at("topic_scheme").get<std::string>(), "topic_scheme",
          {{"wildcard-15", TopicScheme::Wildcard},
           {"explicit-29", TopicScheme::ExplicitList}});
    cfg.qos = j.value("qos", cfg.qos);
    cfg.repetitions = j.value("repetitions", cfg.repetitions);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.messages_per_hub = j.value("messages_per_hub", cfg.messages_per_hub);
    if (j.contains("republish_mode"))
      cfg.republish = parse_enum<RepublishMode>(
          j.at("republish_mode").get<std::string>(), "republish_mode",
          {{"synchronous", RepublishMode::Synchronous},
           {"asynchronous", RepublishMode::Asynchronous}});
    if (j.contains("connection_cycling"))
      cfg.cycling = parse_enum<ConnectionCycling>(
          j.at("connection_cycling").get<std::string>(), "connection_cycling",
          {{"per-batch", ConnectionCycling::PerBatch},
           {"per-message", ConnectionCycling::PerMessage},
           {"persistent", ConnectionCycling::Persistent}});
    if (j.contains("transform_mode"))
      cfg.transform = parse_enum<TransformMode>(
          j.at("transform_mode").get<std::string>(), "transform_mode",
          {{"unify", TransformMode::Unify},
           {"identity", TransformMode::Identity}});
    cfg.grace_ms = j.value("grace_period_ms", cfg.grace_ms);
    cfg.keep_alive_s = j.value("keep_alive_s", cfg.keep_alive_s);
    cfg.clean_start = j.value("clean_start", cfg.clean_start);
    cfg.queue_capacity = j.value("queue_capacity", cfg.queue_capacity);
    cfg.retry_interval_ms = j.value("retry_interval_ms", cfg.retry_interval_ms);
    cfg.max_retries = j.value("max_retries", cfg.max_retries);
    cfg.connect_timeout_ms = j.value("connect_timeout_ms", cfg.connect_timeout_ms);
    cfg.connect_attempts = j.value("connect_attempts", cfg.connect_attempts);
    if (j.contains("credentials")) {
      const json& c = j.at("credentials");
      cfg.credentials = {c.at("username").get<std::string>(),
                         c.at("password").get<std::string>()};
    }

    for (const json& jp : j.value("providers", json::array())) {
      ProviderSpec p;
      p.id = jp.at("id").get<std::string>();
      p.unify_ratio = jp.value("unify_ratio", 1.0);
      for (const json& jg : jp.value("gateways", json::array())) {
        GatewaySpec g;
        g.id = jg.at("id").get<std::string>();
        g.batches_per_s = jg.value("batches_per_second", 1.0);
        g.messages_per_hub = cfg.messages_per_hub;
        g.cycling = cfg.cycling;
        for (const json& jh : jg.value("hubs", json::array())) {
          HubSpec h;
          h.id = jh.at("id").get<std::string>();
          h.payload_bytes = jh.value("payload_bytes", size_t{1500});
          h.payload_seed = jh.value("payload_seed", uint64_t{0});
          std::string topic = jh.contains("topic")
                                  ? jh.at("topic").get<std::string>()
                                  : "providers/" + p.id + "/" + h.id + "/readings";
          auto parsed = TopicName::parse(topic);
          if (!parsed)
            throw ConfigError("hub " + h.id + ": invalid topic \"" + topic + "\"");
          h.topic = *parsed;
          g.hubs.push_back(std::move(h));
        }
        p.gateways.push_back(std::move(g));
      }
      cfg.providers.push_back(std::move(p));
    }

    const json empty = json::object();
    const json& links = j.contains("links") ? j.at("links") : empty;
    if (links.contains("gateway"))
      cfg.links.gateway = link_from_json(links.at("gateway"), "links.gateway");
    if (links.contains("cloud"))
      cfg.links.cloud = link_from_json(links.at("cloud"), "links.cloud");
    if (links.contains("bridge_in"))
      cfg.links.bridge_in = link_from_json(links.at("bridge_in"), "links.bridge_in");
    if (links.contains("bridge_out"))
      cfg.links.bridge_out =
          link_from_json(links.at("bridge_out"), "links.bridge_out");
    if (links.contains("subscriber"))
      cfg.links.subscriber =
          link_from_json(links.at("subscriber"), "links.subscriber");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return cfg;
}

std::vector<std::string> validate(const ScenarioConfig& cfg) {
  std::vector<std::string> problems;
  auto bad = [&](std::string msg) { problems.push_back(std::move(msg)); };

  if (cfg.aut != 1 && cfg.aut != 2) bad("aut must be 1 or 2");
  if (cfg.qos > 2) bad("qos must be 0, 1, or 2");
  if (cfg.repetitions == 0) bad("repetitions must be >= 1");
  if (cfg.messages_per_hub == 0) bad("messages_per_hub must be >= 1");
  if (cfg.queue_capacity == 0) bad("queue_capacity must be >= 1");
  if (cfg.connect_attempts == 0) bad("connect_attempts must be >= 1");
  if (cfg.providers.empty()) bad("at least one provider is required");

  std::set<std::string> provider_ids, topics;
  for (const ProviderSpec& p : cfg.providers) {
    if (p.id.empty()) bad("provider id must be non-empty");
    if (!provider_ids.insert(p.id).second) bad("duplicate provider id " + p.id);
    if (!(p.unify_ratio > 0) || p.unify_ratio > 1.0)
      bad("provider " + p.id + ": unify_ratio must be in (0, 1]");
    size_t hubs = 0;
    std::set<std::string> gateway_ids;
    for (const GatewaySpec& g : p.gateways) {
      if (g.id.empty()) bad("gateway id must be non-empty");
      if (!gateway_ids.insert(g.id).second)
        bad("provider " + p.id + ": duplicate gateway id " + g.id);
      if (!(g.batches_per_s > 0))
        bad("gateway " + g.id + ": batches_per_second must be > 0");
      for (const HubSpec& h : g.hubs) {
        ++hubs;
        if (h.payload_bytes == 0)
          bad("hub " + h.id + ": payload_bytes must be >= 1");
        if (!topics.insert(h.topic.str()).second)
          bad("duplicate hub topic " + h.topic.str());
      }
    }
    if (hubs == 0) bad("provider " + p.id + " has no hubs");
  }

  auto check_link = [&](const LinkProfile& p, const std::string& which) {
    for (const std::string& e : p.validate()) bad("links." + which + ": " + e);
  };
  check_link(cfg.links.gateway, "gateway");
  check_link(cfg.links.cloud, "cloud");
  if (cfg.links.bridge_in) check_link(*cfg.links.bridge_in, "bridge_in");
  if (cfg.links.bridge_out) check_link(*cfg.links.bridge_out, "bridge_out");
  if (cfg.links.subscriber) check_link(*cfg.links.subscriber, "subscriber");
  return problems;
}

std::string config_digest(const ScenarioConfig& cfg) {
  uint64_t h = fnv1a64(to_json(cfg).dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ScenarioConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return config_from_json(j);
}

ScenarioConfig load_preset(const std::string& name,
                           const std::filesystem::path& presets_dir) {
  return load_config_file(presets_dir / (name + ".json"));
}

}  // namespace bridgebench
