#include "bridgebench/runner.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <memory>
#include <thread>

#include <json.hpp>

#include "bridgebench/broker.hpp"
#include "bridgebench/report.hpp"
#include "bridgebench/rng.hpp"

namespace bridgebench {

using nlohmann::json;

std::string CellId::label() const {
  std::string s = "aut" + std::to_string(aut);
  s += scheme == TopicScheme::Wildcard ? "-w15" : "-e29";
  s += "-qos" + std::to_string(static_cast<int>(qos));
  return s;
}

bool CellResult::ok() const {
  if (repetitions.empty()) return false;
  for (const auto& r : repetitions)
    if (!r.ok) return false;
  return true;
}

bool RunSummary::all_ok() const {
  if (cells.empty()) return false;
  for (const auto& c : cells)
    if (!c.ok()) return false;
  return true;
}

std::string run_id_for(const std::string& name, const CellId& cell,
                       uint32_t repetition) {
  return name + "-" + cell.label() + "-rep" + std::to_string(repetition);
}

namespace {

json counters_to_json(const BrokerCounters& c) {
  json j;
  j["connections_accepted"] = c.connections_accepted;
  j["publishes_received"] = c.publishes_received;
  j["messages_forwarded"] = c.messages_forwarded;
  j["messages_dropped_queue"] = c.messages_dropped_queue;
  j["duplicates_suppressed"] = c.duplicates_suppressed;
  j["messages_unrouted"] = c.messages_unrouted;
  j["retries_exhausted"] = c.retries_exhausted;
  j["malformed_packets"] = c.malformed_packets;
  j["received_by_topic"] = c.received_by_topic;
  return j;
}

void write_rep_artifacts(const std::filesystem::path& raw_dir,
                         const std::string& run_id, const CellId& cell,
                         uint32_t rep, size_t topic_bytes,
                         const MetricsInput& input, const DropTraceLog& trace,
                         const RepetitionResult& rr) {
  std::filesystem::create_directories(raw_dir);
  {
    std::ofstream os(raw_dir / "records.csv");
    write_records_csv(os, run_id, rep, cell.aut, cell.qos, topic_bytes,
                      input.records);
  }
  {
    std::ofstream os(raw_dir / "outcomes.csv");
    write_outcomes_csv(os, run_id, input);
  }
  {
    std::ofstream os(raw_dir / "drops.csv");
    trace.write_csv(os, run_id);
  }
  {
    json j;
    for (const auto& [name, counters] : rr.broker_counters)
      j[name] = counters_to_json(counters);
    std::ofstream os(raw_dir / "broker_counters.json");
    os << j.dump(2) << '\n';
  }
}

}  // namespace

RepetitionResult run_repetition(const ScenarioConfig& cfg, const CellId& cell,
                                uint32_t repetition,
                                const std::filesystem::path& raw_dir) {
  RepetitionResult rr;
  rr.repetition = repetition;
  auto wall0 = RunClock::steady_now();
  std::string run_id = run_id_for(cfg.name, cell, repetition);

  try {
    uint64_t rep_seed = mix64(cfg.seed, repetition);

    DelayScheduler scheduler;  // outlives every broker, client and bridge below
    RunClock clock;
    DropTraceLog trace;

    auto with_seed = [&](LinkProfile p) {
      p.seed = rep_seed;
      return p;
    };
    LinkProfile gw_link = with_seed(cfg.links.gateway);
    LinkProfile bridge_in_link = with_seed(cfg.links.for_bridge_in());
    LinkProfile bridge_out_link = with_seed(cfg.links.for_bridge_out());
    LinkProfile sub_link = with_seed(cfg.links.for_subscriber());

    BrokerConfig broker_base;
    broker_base.queue_capacity = cfg.queue_capacity;
    broker_base.retry_interval_ms = cfg.retry_interval_ms;
    broker_base.max_retries = cfg.max_retries;
    if (cfg.credentials)
      broker_base.credentials = {{cfg.credentials->first, cfg.credentials->second}};

    std::vector<std::unique_ptr<Broker>> source_brokers;
    std::map<std::string, uint16_t> source_port;
    for (const ProviderSpec& p : cfg.providers) {
      BrokerConfig bc = broker_base;
      bc.name = "src-" + p.id;
      source_brokers.push_back(std::make_unique<Broker>(bc, scheduler));
      source_brokers.back()->start();
      source_port[p.id] = source_brokers.back()->port();
    }
    BrokerConfig dest_cfg = broker_base;
    dest_cfg.name = "dst";
    Broker dest(dest_cfg, scheduler);
    dest.start();

    DeploymentPlan plan = plan_deployment(cfg.providers, cell.aut, cell.scheme);
    std::map<std::string, double> ratio_by_provider;
    for (const ProviderSpec& p : cfg.providers)
      ratio_by_provider[p.id] = p.unify_ratio;
    for (BridgeSpec& spec : plan.bridges) {
      spec.qos = cell.qos;
      spec.republish = cfg.republish;
      spec.transform.mode = cfg.transform;
      spec.transform.ratio = ratio_by_provider[spec.provider_id];
    }

    ClientConfig client_base;
    client_base.clean_start = cfg.clean_start;
    client_base.keep_alive_s = cfg.keep_alive_s;
    client_base.credentials = cfg.credentials;
    client_base.connect_attempts = static_cast<int>(cfg.connect_attempts);
    client_base.connect_timeout_ms = cfg.connect_timeout_ms;
    client_base.retry_interval_ms = cfg.retry_interval_ms;
    client_base.max_retries = cfg.max_retries;

    TopicMapping mapping;  // all planned bridges share the default mapping
    std::map<std::string, std::pair<std::string, std::string>> origin;
    for (const ProviderSpec& p : cfg.providers)
      for (const GatewaySpec& g : p.gateways)
        for (const HubSpec& h : g.hubs)
          origin[mapping.apply(h.topic).str()] = {p.id, g.id};
    SubscriberSink sink(std::move(origin));

    ClientConfig sub_cfg = client_base;
    sub_cfg.client_id = "subscriber";
    sub_cfg.port = dest.port();
    MqttClient subscriber(sub_cfg, sub_link, "subscriber", scheduler, clock,
                          &trace);
    subscriber.connect();
    SubscribeOptions sub_opts;
    sub_opts.max_qos = cell.qos;
    subscriber.subscribe({TopicFilter::require("unified/#")}, sub_opts,
                         [&sink](const InboundMessage& m) { sink.on_message(m); });

    std::vector<std::unique_ptr<Bridge>> bridges;
    for (const BridgeSpec& spec : plan.bridges) {
      bridges.push_back(std::make_unique<Bridge>(
          spec, source_port.at(spec.provider_id), dest.port(), bridge_in_link,
          bridge_out_link, scheduler, clock, &trace, client_base));
    }
    for (auto& b : bridges) b->start();

    struct GatewayJob {
      std::string provider_id;
      GatewaySpec spec;
      ClientConfig client_cfg;
      GatewayRunResult result;
      std::thread thread;
    };
    std::vector<GatewayJob> jobs;
    for (const ProviderSpec& p : cfg.providers) {
      for (const GatewaySpec& g : p.gateways) {
        GatewayJob job;
        job.provider_id = p.id;
        job.spec = g;
        job.spec.messages_per_hub = cfg.messages_per_hub;
        job.spec.cycling = cfg.cycling;
        job.client_cfg = client_base;
        job.client_cfg.client_id = "gw-" + p.id + "-" + g.id;
        job.client_cfg.port = source_port.at(p.id);
        jobs.push_back(std::move(job));
      }
    }

    SteadyTime epoch = RunClock::steady_now() + std::chrono::milliseconds(200);
    for (GatewayJob& job : jobs) {
      job.thread = std::thread([&job, &gw_link, &scheduler, &clock, &trace,
                                qos = cell.qos, epoch] {
        GatewaySpec spec = job.spec;
        spec.id = job.client_cfg.client_id.substr(3);  // drop "gw-"
        job.result = run_gateway(spec, job.client_cfg, gw_link, qos, scheduler,
                                 clock, &trace, epoch);
      });
    }
    for (GatewayJob& job : jobs) job.thread.join();

    // Drain: done when the subscriber has been quiet for the grace period
    // after the last gateway finished. Hard cap so a wedged pipeline cannot
    // hang the repetition.
    uint64_t grace_us = uint64_t{cfg.grace_ms} * 1000;
    uint64_t gateways_done_us = clock.now_us();
    while (true) {
      std::this_thread::sleep_for(std::chrono::milliseconds(20));
      uint64_t now = clock.now_us();
      uint64_t anchor = std::max(sink.last_arrival_us(), gateways_done_us);
      if (now - anchor >= grace_us) break;
      if (now - gateways_done_us > grace_us + 120'000'000ull) {
        rr.warnings.push_back("drain timed out; pipeline may still hold messages");
        break;
      }
    }

    for (const auto& b : bridges) b->stop();  // settles async republishes
    if (cfg.republish == RepublishMode::Asynchronous) {
      // the flush above may have pushed final messages toward the subscriber
      SteadyTime settle0 = RunClock::steady_now();
      while (RunClock::steady_now() - settle0 < std::chrono::seconds(10)) {
        uint64_t now = clock.now_us();
        if (now - sink.last_arrival_us() >= 300'000 && now >= 300'000) break;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
      }
    }

    for (const auto& b : source_brokers)
      rr.broker_counters[b->name()] = b->counters();
    rr.broker_counters[dest.name()] = dest.counters();
    for (const auto& b : bridges)
      rr.bridge_stats.emplace_back(b->spec().id, b->stats());
    subscriber.disconnect();
    dest.stop();
    for (auto& b : source_brokers) b->stop();

    MetricsInput input;
    for (const GatewayJob& job : jobs) {
      MetricsInput::GatewayData gd;
      gd.provider_id = job.provider_id;
      gd.gateway_id = job.spec.id;
      gd.outcomes = job.result.outcomes;
      for (const HubSpec& h : job.spec.hubs) {
        gd.source_topics.push_back(h.topic.str());
        gd.dest_topics.push_back(mapping.apply(h.topic).str());
      }
      input.gateways.push_back(std::move(gd));
      for (const std::string& e : job.result.errors)
        rr.warnings.push_back("gateway " + job.spec.id + ": " + e);
    }
    for (const auto& b : source_brokers)
      for (const auto& [topic, n] : rr.broker_counters[b->name()].received_by_topic)
        input.source_received_by_topic[topic] += n;
    input.dest_received_by_topic = rr.broker_counters["dst"].received_by_topic;
    input.records = sink.records();
    input.unstamped = sink.unstamped_count();

    rr.metrics = compute_metrics(input);
    rr.drop_decisions = trace.total_count();
    rr.drops_dropped = trace.dropped_count();

    if (!raw_dir.empty())
      write_rep_artifacts(raw_dir, run_id, cell, repetition,
                          plan.bridge_topic_bytes, input, trace, rr);
    rr.ok = true;
  } catch (const std::exception& e) {
    rr.ok = false;
    rr.error = e.what();
  }

  rr.wall_seconds = std::chrono::duration<double>(RunClock::steady_now() - wall0)
                        .count();
  return rr;
}

CellResult run_cell(const ScenarioConfig& cfg, const CellId& cell,
                    const RunOptions& opts) {
  CellResult result;
  result.cell = cell;
  try {
    DeploymentPlan plan = plan_deployment(cfg.providers, cell.aut, cell.scheme);
    result.bridge_count = plan.bridges.size();
    result.bridge_topic_bytes = plan.bridge_topic_bytes;
  } catch (const std::exception& e) {
    RepetitionResult rr;
    rr.ok = false;
    rr.error = e.what();
    result.repetitions.push_back(std::move(rr));
    return result;
  }

  for (uint32_t rep = 0; rep < cfg.repetitions; ++rep) {
    std::filesystem::path raw;
    if (!opts.out_dir.empty())
      raw = opts.out_dir / "raw" / cell.label() / ("rep" + std::to_string(rep));
    RepetitionResult rr = run_repetition(cfg, cell, rep, raw);
    if (!opts.quiet) {
      std::fprintf(stderr, "[%s rep %u/%u] %s (%.1fs)%s%s\n",
                   cell.label().c_str(), rep + 1, cfg.repetitions,
                   rr.ok ? "ok" : "FAILED", rr.wall_seconds,
                   rr.error.empty() ? "" : ": ", rr.error.c_str());
    }
    result.repetitions.push_back(std::move(rr));
  }
  return result;
}

namespace {

RunSummary finish_run(const ScenarioConfig& cfg, const RunOptions& opts,
                      RunSummary summary) {
  if (!opts.out_dir.empty()) {
    std::filesystem::create_directories(opts.out_dir);
    {
      std::ofstream os(opts.out_dir / "config.json");
      os << to_json(cfg).dump(2) << '\n';
    }
    write_raw_summaries(opts.out_dir, summary);
    write_report_files(opts.out_dir);
  }
  return summary;
}

}  // namespace

RunSummary run_single(const ScenarioConfig& cfg, const RunOptions& opts) {
  RunSummary summary;
  summary.name = cfg.name;
  summary.config_digest = config_digest(cfg);
  summary.cells.push_back(
      run_cell(cfg, CellId{cfg.aut, cfg.scheme, cfg.qos}, opts));
  return finish_run(cfg, opts, std::move(summary));
}

RunSummary run_sweep(const ScenarioConfig& cfg, const RunOptions& opts) {
  RunSummary summary;
  summary.name = cfg.name;
  summary.config_digest = config_digest(cfg);
  const std::pair<int, TopicScheme> variants[] = {
      {1, TopicScheme::Wildcard},
      {1, TopicScheme::ExplicitList},
      {2, TopicScheme::ExplicitList},
  };
  for (const auto& [aut, scheme] : variants)
    for (uint8_t qos = 0; qos <= 2; ++qos)
      summary.cells.push_back(run_cell(cfg, CellId{aut, scheme, qos}, opts));
  return finish_run(cfg, opts, std::move(summary));
}

}  // namespace bridgebench
