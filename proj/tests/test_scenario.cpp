#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <string>

#include "bridgebench/scenario.hpp"

using namespace bridgebench;

namespace {

const std::filesystem::path kPresets = BRIDGEBENCH_PRESETS_DIR;

size_t hub_count(const ScenarioConfig& cfg) {
  size_t n = 0;
  for (const auto& p : cfg.providers)
    for (const auto& gw : p.gateways) n += gw.hubs.size();
  return n;
}

}  // namespace

TEST_CASE("bundled presets load and validate") {
  for (const std::string name : {"paper", "desk", "lossless"}) {
    auto cfg = load_preset(name, kPresets);
    CAPTURE(name);
    auto problems = validate(cfg);
    for (const auto& p : problems) MESSAGE(p);
    CHECK(problems.empty());
  }
}

TEST_CASE("paper preset pins the reference topology") {
  auto cfg = load_preset("paper", kPresets);
  REQUIRE(cfg.providers.size() == 2);
  CHECK(cfg.messages_per_hub == 1000);
  CHECK(cfg.repetitions == 10);
  CHECK(cfg.keep_alive_s == 60);
  CHECK(hub_count(cfg) == 4);

  const auto& p1 = cfg.providers[0];
  REQUIRE(p1.gateways.size() == 2);
  REQUIRE(p1.gateways[0].hubs.size() == 1);
  CHECK(p1.gateways[0].hubs[0].payload_bytes == 125000);
  CHECK(p1.gateways[1].hubs[0].payload_bytes == 35000);
  CHECK(p1.unify_ratio == doctest::Approx(0.04));

  const auto& p2 = cfg.providers[1];
  REQUIRE(p2.gateways.size() == 1);
  REQUIRE(p2.gateways[0].hubs.size() == 2);
  CHECK(p2.gateways[0].hubs[0].payload_bytes == 1500);
  CHECK(p2.gateways[0].hubs[1].payload_bytes == 1500);

  // 29-byte publish topics; 15-byte wildcard subscriptions at architecture 1.
  for (const auto& p : cfg.providers)
    for (const auto& gw : p.gateways)
      for (const auto& hub : gw.hubs) CHECK(hub.topic.overhead_bytes() == 29);
  CHECK(plan_deployment(cfg.providers, 1, TopicScheme::Wildcard).bridge_topic_bytes ==
        15);

  CHECK(cfg.links.gateway.one_way_delay_ms == doctest::Approx(30.0));
  CHECK(cfg.links.gateway.segment_loss_p == doctest::Approx(0.05));
  CHECK(cfg.links.gateway.segment_size == 1460);
}

TEST_CASE("json round-trip preserves the digest") {
  auto cfg = load_preset("paper", kPresets);
  auto back = config_from_json(to_json(cfg));
  CHECK(config_digest(back) == config_digest(cfg));
  CHECK(to_json(back).dump() == to_json(cfg).dump());
}

TEST_CASE("digest reacts to any knob") {
  auto cfg = load_preset("desk", kPresets);
  auto base = config_digest(cfg);
  CHECK(base.size() == 16);

  auto tweaked = cfg;
  tweaked.seed += 1;
  CHECK(config_digest(tweaked) != base);

  tweaked = cfg;
  tweaked.qos = 2;
  CHECK(config_digest(tweaked) != base);

  tweaked = cfg;
  tweaked.links.gateway.one_way_delay_ms += 0.5;
  CHECK(config_digest(tweaked) != base);

  CHECK(config_digest(cfg) == base);  // digesting is read-only
}

TEST_CASE("validate catches semantic problems") {
  auto cfg = load_preset("desk", kPresets);
  CHECK(validate(cfg).empty());

  SUBCASE("architecture out of range") {
    cfg.aut = 3;
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("qos out of range") {
    cfg.qos = 3;
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("no repetitions") {
    cfg.repetitions = 0;
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("no providers") {
    cfg.providers.clear();
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("duplicate hub topics") {
    cfg.providers[0].gateways[0].hubs[0].topic =
        cfg.providers[1].gateways[0].hubs[0].topic;
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("unify ratio above one") {
    cfg.providers[0].unify_ratio = 1.5;
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("nonpositive batch rate") {
    cfg.providers[0].gateways[0].batches_per_s = 0;
    CHECK_FALSE(validate(cfg).empty());
  }
  SUBCASE("bad link profile") {
    cfg.links.gateway.segment_loss_p = 2.0;
    CHECK_FALSE(validate(cfg).empty());
  }
}

TEST_CASE("config parsing rejects bad enum spellings and topics") {
  auto j = to_json(load_preset("desk", kPresets));

  auto bad_scheme = j;
  bad_scheme["topic_scheme"] = "wildcard";  // must be wildcard-15
  CHECK_THROWS_AS(config_from_json(bad_scheme), ConfigError);

  auto bad_mode = j;
  bad_mode["republish_mode"] = "sync";
  CHECK_THROWS_AS(config_from_json(bad_mode), ConfigError);

  auto bad_topic = j;
  bad_topic["providers"][0]["gateways"][0]["hubs"][0]["topic"] = "a/#";
  CHECK_THROWS_AS(config_from_json(bad_topic), ConfigError);

  auto bad_type = j;
  bad_type["repetitions"] = "ten";
  CHECK_THROWS_AS(config_from_json(bad_type), ConfigError);
}

TEST_CASE("enum config spellings are pinned") {
  CHECK(topic_scheme_config_name(TopicScheme::Wildcard) == "wildcard-15");
  CHECK(topic_scheme_config_name(TopicScheme::ExplicitList) == "explicit-29");
  CHECK(republish_mode_name(RepublishMode::Synchronous) == "synchronous");
  CHECK(republish_mode_name(RepublishMode::Asynchronous) == "asynchronous");
  CHECK(connection_cycling_name(ConnectionCycling::PerBatch) == "per-batch");
  CHECK(connection_cycling_name(ConnectionCycling::PerMessage) == "per-message");
  CHECK(connection_cycling_name(ConnectionCycling::Persistent) == "persistent");
  CHECK(transform_mode_name(TransformMode::Unify) == "unify");
  CHECK(transform_mode_name(TransformMode::Identity) == "identity");
}

TEST_CASE("missing config file raises a config error") {
  CHECK_THROWS_AS(load_config_file("/nonexistent/nowhere.json"), ConfigError);
  CHECK_THROWS_AS(load_preset("no-such-preset", kPresets), ConfigError);
}

TEST_CASE("omitted hub topic defaults to the canonical shape") {
  auto j = to_json(load_preset("desk", kPresets));
  j["providers"][0]["gateways"][0]["hubs"][0].erase("topic");
  auto cfg = config_from_json(j);
  CHECK(cfg.providers[0].gateways[0].hubs[0].topic.str() ==
        "providers/pr1/hub-01/readings");
}
