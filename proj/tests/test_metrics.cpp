#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>
#include <string>
#include <vector>

#include "bridgebench/metrics.hpp"

using namespace bridgebench;

namespace {

InboundMessage stamped_msg(const std::string& topic, uint64_t seq,
                           uint64_t publish_us, uint64_t arrival_us,
                           size_t payload_bytes = 10) {
  InboundMessage m;
  m.topic = TopicName::require(topic);
  m.payload.assign(payload_bytes, 0x42);
  m.user_properties = {{"ts_us", std::to_string(publish_us)},
                       {"seq", std::to_string(seq)}};
  m.arrival_us = arrival_us;
  return m;
}

SubscriberSink make_sink() {
  return SubscriberSink({
      {"unified/pr1/hub-01/readings", {"pr1", "gw1"}},
      {"unified/pr2/hub-03/readings", {"pr2", "gw3"}},
      {"unified/pr2/hub-04/readings", {"pr2", "gw3"}},
  });
}

PublishOutcome ok_outcome(uint64_t seq) {
  PublishOutcome o;
  o.ok = true;
  o.seq = seq;
  o.t_publish_us = 1000 * seq;
  o.t_complete_us = 1000 * seq + 500;
  o.payload_bytes = 10;
  return o;
}

}  // namespace

TEST_CASE("sink computes latency from the carried stamp") {
  auto sink = make_sink();
  sink.on_message(stamped_msg("unified/pr1/hub-01/readings", 0, 100000, 232300));
  auto records = sink.records();
  REQUIRE(records.size() == 1);
  const auto& r = records[0];
  CHECK(r.provider_id == "pr1");
  CHECK(r.gateway_id == "gw1");
  CHECK(r.seq == 0);
  CHECK(r.publish_us == 100000);
  CHECK(r.latency_ms == doctest::Approx(132.3).epsilon(1e-9));
  CHECK(r.stamped);
  CHECK_FALSE(r.duplicate);
  CHECK(sink.last_arrival_us() == 232300);
}

TEST_CASE("duplicates key on gateway and sequence, not topic") {
  auto sink = make_sink();
  // Two hubs on gw3 share the gateway counter, so their seqs interleave but
  // never collide; a literal redelivery does collide.
  sink.on_message(stamped_msg("unified/pr2/hub-03/readings", 0, 1000, 2000));
  sink.on_message(stamped_msg("unified/pr2/hub-04/readings", 1, 1000, 2100));
  sink.on_message(stamped_msg("unified/pr2/hub-03/readings", 0, 1000, 2200));

  auto records = sink.records();
  REQUIRE(records.size() == 3);
  CHECK_FALSE(records[0].duplicate);
  CHECK_FALSE(records[1].duplicate);
  CHECK(records[2].duplicate);
  CHECK(records[0].arrival_order == 0);
  CHECK(records[2].arrival_order == 2);

  // Same seq on a different gateway is not a duplicate.
  sink.on_message(stamped_msg("unified/pr1/hub-01/readings", 0, 1000, 2300));
  CHECK_FALSE(sink.records()[3].duplicate);
}

TEST_CASE("messages without stamps are counted but excluded from latency") {
  auto sink = make_sink();
  InboundMessage bare;
  bare.topic = TopicName::require("unified/pr1/hub-01/readings");
  bare.arrival_us = 5000;
  sink.on_message(bare);

  InboundMessage garbled = stamped_msg("unified/pr1/hub-01/readings", 1, 100, 200);
  garbled.user_properties = {{"ts_us", "not-a-number"}, {"seq", "1"}};
  sink.on_message(garbled);

  CHECK(sink.unstamped_count() == 2);
  auto records = sink.records();
  REQUIRE(records.size() == 2);
  CHECK_FALSE(records[0].stamped);
  CHECK_FALSE(records[1].stamped);
}

TEST_CASE("metrics roll up per gateway and in aggregate") {
  MetricsInput in;
  MetricsInput::GatewayData gw1;
  gw1.provider_id = "pr1";
  gw1.gateway_id = "gw1";
  for (uint64_t s = 0; s < 10; ++s) gw1.outcomes.push_back(ok_outcome(s));
  gw1.source_topics = {"providers/pr1/hub-01/readings"};
  gw1.dest_topics = {"unified/pr1/hub-01/readings"};

  MetricsInput::GatewayData gw3;
  gw3.provider_id = "pr2";
  gw3.gateway_id = "gw3";
  for (uint64_t s = 0; s < 10; ++s) gw3.outcomes.push_back(ok_outcome(s));
  gw3.outcomes[9].ok = false;  // one failed publish
  gw3.outcomes[9].error = "not connected";
  gw3.source_topics = {"providers/pr2/hub-03/readings"};
  gw3.dest_topics = {"unified/pr2/hub-03/readings"};

  in.gateways = {gw1, gw3};

  // gw1: 9 of 10 arrive (seq 9 lost), one duplicate of seq 0.
  auto sink = make_sink();
  for (uint64_t s = 0; s < 9; ++s)
    sink.on_message(stamped_msg("unified/pr1/hub-01/readings", s, 1000 * s,
                                1000 * s + 10000, 20));
  sink.on_message(stamped_msg("unified/pr1/hub-01/readings", 0, 0, 30000, 20));
  // gw3: all 9 surviving messages arrive.
  for (uint64_t s = 0; s < 9; ++s)
    sink.on_message(stamped_msg("unified/pr2/hub-03/readings", s, 1000 * s,
                                1000 * s + 20000, 20));
  in.records = sink.records();
  in.unstamped = sink.unstamped_count();
  in.source_received_by_topic = {{"providers/pr1/hub-01/readings", 10},
                                 {"providers/pr2/hub-03/readings", 9}};
  in.dest_received_by_topic = {{"unified/pr1/hub-01/readings", 10},
                               {"unified/pr2/hub-03/readings", 9}};

  auto bundle = compute_metrics(in);

  const auto& g1 = bundle.per_gateway.at({"pr1", "gw1"});
  CHECK(g1.published == 10);
  CHECK(g1.publish_failures == 0);
  CHECK(g1.received_source == 10);
  CHECK(g1.received_unique == 9);
  CHECK(g1.duplicates == 1);
  CHECK(g1.lost_e2e == 1);
  CHECK(g1.lost_source == 0);
  CHECK(g1.latency_count == 9);
  CHECK(g1.latency_mean_ms == doctest::Approx(10.0));
  CHECK(g1.payload_mean_bytes == doctest::Approx(20.0));
  CHECK(loss_per_1000(g1) == doctest::Approx(100.0));

  const auto& g3 = bundle.per_gateway.at({"pr2", "gw3"});
  CHECK(g3.published == 10);
  CHECK(g3.publish_failures == 1);
  CHECK(g3.received_source == 9);
  CHECK(g3.received_unique == 9);
  CHECK(g3.lost_e2e == 1);
  CHECK(g3.lost_source == 1);
  CHECK(g3.latency_mean_ms == doctest::Approx(20.0));

  const auto& agg = bundle.aggregate;
  CHECK(agg.published == 20);
  CHECK(agg.publish_failures == 1);
  CHECK(agg.received_unique == 18);
  CHECK(agg.duplicates == 1);
  CHECK(agg.lost_e2e == 2);
  CHECK(agg.latency_count == 18);
  CHECK(agg.latency_mean_ms == doctest::Approx(15.0));
  CHECK(loss_per_1000(agg) == doctest::Approx(100.0));

  // Accounting identity: every unique receipt is either still here or lost.
  CHECK(agg.received_unique + agg.lost_e2e == agg.published);
}

TEST_CASE("latency distribution statistics") {
  MetricsInput in;
  MetricsInput::GatewayData gw;
  gw.provider_id = "pr1";
  gw.gateway_id = "gw1";
  for (uint64_t s = 0; s < 5; ++s) gw.outcomes.push_back(ok_outcome(s));
  gw.source_topics = {"providers/pr1/hub-01/readings"};
  gw.dest_topics = {"unified/pr1/hub-01/readings"};
  in.gateways = {gw};

  auto sink = make_sink();
  // Latencies 10, 20, 30, 40, 50 ms.
  for (uint64_t s = 0; s < 5; ++s)
    sink.on_message(stamped_msg("unified/pr1/hub-01/readings", s, 0,
                                (s + 1) * 10000));
  in.records = sink.records();

  auto m = compute_metrics(in).aggregate;
  CHECK(m.latency_mean_ms == doctest::Approx(30.0));
  CHECK(m.latency_median_ms == doctest::Approx(30.0));
  CHECK(m.latency_p95_ms == doctest::Approx(48.0));  // linear interpolation
}

TEST_CASE("empty input yields zeros, not division errors") {
  MetricsBundle bundle = compute_metrics(MetricsInput{});
  CHECK(bundle.aggregate.published == 0);
  CHECK(bundle.aggregate.latency_mean_ms == 0.0);
  CHECK(loss_per_1000(bundle.aggregate) == 0.0);
  CHECK(bundle.per_gateway.empty());
}

TEST_CASE("records csv keeps its pinned header and blanks unstamped fields") {
  auto sink = make_sink();
  sink.on_message(stamped_msg("unified/pr1/hub-01/readings", 3, 1000, 3500, 12));
  InboundMessage bare;
  bare.topic = TopicName::require("unified/pr1/hub-01/readings");
  bare.payload.assign(7, 0);
  bare.arrival_us = 4000;
  sink.on_message(bare);

  std::ostringstream os;
  write_records_csv(os, "run-1", 2, 1, 1, 15, sink.records());
  std::istringstream is(os.str());
  std::string header, row1, row2;
  std::getline(is, header);
  std::getline(is, row1);
  std::getline(is, row2);
  CHECK(header ==
        "run_id,repetition,aut,qos,topic_size,provider,gateway,seq,"
        "publish_ts_us,arrival_ts_us,latency_ms,payload_bytes,duplicate_flag");
  CHECK(row1 == "run-1,2,1,1,15,pr1,gw1,3,1000,3500,2.500,12,0");
  CHECK(row2 == "run-1,2,1,1,15,pr1,gw1,,,4000,,7,0");
}

TEST_CASE("outcomes csv carries one row per publish attempt") {
  MetricsInput in;
  MetricsInput::GatewayData gw;
  gw.provider_id = "pr1";
  gw.gateway_id = "gw1";
  gw.outcomes = {ok_outcome(0)};
  gw.outcomes[0].qos = 2;
  gw.outcomes[0].retries = 1;
  in.gateways = {gw};

  std::ostringstream os;
  write_outcomes_csv(os, "run-1", in);
  std::istringstream is(os.str());
  std::string header, row;
  std::getline(is, header);
  std::getline(is, row);
  CHECK(header ==
        "run_id,provider,gateway,seq,qos,ok,error,publish_ts_us,"
        "complete_ts_us,retries,payload_bytes");
  CHECK(row == "run-1,pr1,gw1,0,2,1,,0,500,1,10");
}
