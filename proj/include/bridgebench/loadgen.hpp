#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bridgebench/client.hpp"
#include "bridgebench/payload.hpp"
#include "bridgebench/topic.hpp"

namespace bridgebench {

/// How a gateway treats its broker connection across publish batches.
enum class ConnectionCycling {
  PerBatch,    ///< connect, publish the batch, disconnect (default)
  PerMessage,  ///< one connect/disconnect cycle per hub message
  Persistent,  ///< connect once for the whole run
};

struct HubSpec {
  std::string id;
  size_t payload_bytes = 0;
  TopicName topic;
  uint64_t payload_seed = 0;
};

struct GatewaySpec {
  std::string id;
  std::vector<HubSpec> hubs;
  double batches_per_s = 1.0;
  uint32_t messages_per_hub = 1000;
  ConnectionCycling cycling = ConnectionCycling::PerBatch;
};

struct ProviderSpec {
  std::string id;
  std::vector<GatewaySpec> gateways;
  double unify_ratio = 1.0;
};

/// Hub payload for one sequence number; deterministic in
/// (payload_seed, hub id, seq).
std::vector<uint8_t> generate_payload(const HubSpec& spec, uint64_t seq);

/// Canonical benchmark topic for a provider/hub pair:
/// "providers/<provider>/<hub>/readings".
TopicName make_hub_topic(const std::string& provider_id, const std::string& hub_id);

struct GatewayRunResult {
  std::string gateway_id;
  std::vector<PublishOutcome> outcomes;  ///< hubs x messages_per_hub, seq order
  uint64_t connect_cycles = 0;
  std::vector<std::string> errors;       ///< connect failures etc., if any
};

/// Drive one gateway to completion: messages_per_hub batches, each publishing
/// every hub's payload sequentially, batch k starting at
/// epoch + k / batches_per_s. Blocks until every outcome is resolved.
GatewayRunResult run_gateway(const GatewaySpec& spec, ClientConfig client_cfg,
                             const LinkProfile& link, uint8_t qos,
                             DelayScheduler& scheduler, const RunClock& clock,
                             DropTraceLog* trace, SteadyTime epoch);

}  // namespace bridgebench
