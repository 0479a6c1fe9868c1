#include "bridgebench/loadgen.hpp"

#include <chrono>
#include <thread>

namespace bridgebench {

std::vector<uint8_t> generate_payload(const HubSpec& spec, uint64_t seq) {
  return generate_sensor_payload(spec.payload_bytes, spec.id, spec.payload_seed,
                                 seq);
}

TopicName make_hub_topic(const std::string& provider_id,
                         const std::string& hub_id) {
  return TopicName::require("providers/" + provider_id + "/" + hub_id +
                          "/readings");
}

GatewayRunResult run_gateway(const GatewaySpec& spec, ClientConfig client_cfg,
                             const LinkProfile& link, uint8_t qos,
                             DelayScheduler& scheduler, const RunClock& clock,
                             DropTraceLog* trace, SteadyTime epoch) {
  GatewayRunResult result;
  result.gateway_id = spec.id;
  result.outcomes.reserve(static_cast<size_t>(spec.hubs.size()) *
                          spec.messages_per_hub);

  if (client_cfg.client_id.empty()) client_cfg.client_id = "gw-" + spec.id;
  client_cfg.auto_stamp = true;
  MqttClient client(client_cfg, link, "gw-" + spec.id, scheduler, clock, trace);

  auto ensure_connected = [&] {
    if (client.connected()) return;
    try {
      client.connect();
      ++result.connect_cycles;
    } catch (const std::exception& e) {
      // Outcomes for this cycle are still produced (as failures with their
      // sequence numbers) by publish_async on the disconnected client.
      result.errors.emplace_back(e.what());
    }
  };

  double period_us = spec.batches_per_s > 0 ? 1e6 / spec.batches_per_s : 0;

  if (spec.cycling == ConnectionCycling::Persistent) ensure_connected();

  std::vector<std::shared_future<PublishOutcome>> batch;
  batch.reserve(spec.hubs.size());
  for (uint32_t k = 0; k < spec.messages_per_hub; ++k) {
    if (period_us > 0) {
      auto start = epoch + std::chrono::microseconds(
                               static_cast<int64_t>(period_us * k));
      std::this_thread::sleep_until(start);
    }

    if (spec.cycling == ConnectionCycling::PerMessage) {
      for (const HubSpec& hub : spec.hubs) {
        ensure_connected();
        auto fut = client.publish_async(hub.topic, generate_payload(hub, k), qos);
        result.outcomes.push_back(fut.get());
        if (client.connected()) client.disconnect();
      }
      continue;
    }

    if (spec.cycling == ConnectionCycling::PerBatch) ensure_connected();
    batch.clear();
    for (const HubSpec& hub : spec.hubs) {
      batch.push_back(
          client.publish_async(hub.topic, generate_payload(hub, k), qos));
    }
    for (auto& fut : batch) result.outcomes.push_back(fut.get());
    if (spec.cycling == ConnectionCycling::PerBatch && client.connected())
      client.disconnect();
  }

  if (client.connected()) client.disconnect();
  return result;
}

}  // namespace bridgebench
