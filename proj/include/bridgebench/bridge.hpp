#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "bridgebench/client.hpp"
#include "bridgebench/loadgen.hpp"
#include "bridgebench/topic.hpp"

namespace bridgebench {

enum class TransformMode {
  Identity,  ///< republish payload bytes untouched, no parsing
  Unify,     ///< parse sensor payload, emit canonical records
};

enum class RepublishMode {
  Synchronous,   ///< wait for the outbound publish to complete per message
  Asynchronous,  ///< fire and track completion in the background
};

/// How bridge input subscriptions are shaped.
enum class TopicScheme {
  Wildcard,      ///< one multi-level wildcard filter per provider subtree
  ExplicitList,  ///< one exact filter per hub topic
};

std::string topic_scheme_name(TopicScheme s);

struct TransformSpec {
  TransformMode mode = TransformMode::Unify;
  double ratio = 1.0;  ///< target output/input size ratio in unify mode
};

/// Fixed header allowance added on top of ratio * input when sizing unified
/// output; output is also always kept strictly smaller than the input.
inline constexpr size_t kUnifyEnvelopeBytes = 96;

/// Unify: parse and re-emit as canonical records sized to the configured ratio.
/// Identity: byte-for-byte copy. Returns nullopt when unify cannot parse.
std::optional<std::vector<uint8_t>> transform_payload(
    const TransformSpec& spec, const std::vector<uint8_t>& input,
    const std::string& provider_id, const std::string& hub_id);

/// Rewrites the first topic level: "<from>/rest" -> "<to>/rest".
struct TopicMapping {
  std::string from_prefix = "providers";
  std::string to_prefix = "unified";

  TopicName apply(const TopicName& t) const;
};

struct BridgeSpec {
  std::string id;
  std::string provider_id;
  std::vector<TopicFilter> subscription;
  TopicMapping mapping;
  uint8_t qos = 0;
  RepublishMode republish = RepublishMode::Synchronous;
  TransformSpec transform;
};

struct DeploymentPlan {
  int aut = 1;
  std::vector<BridgeSpec> bridges;
  /// Encoded topic bytes of the subscription filters (0 when mixed sizes).
  size_t bridge_topic_bytes = 0;
};

class InvalidTopology : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// AUT1: one bridge per provider. AUT2: one bridge per hub. Throws
/// InvalidTopology for an unknown architecture or a provider without hubs.
DeploymentPlan plan_deployment(const std::vector<ProviderSpec>& providers,
                               int aut, TopicScheme scheme);

struct BridgeStats {
  uint64_t received = 0;
  uint64_t republished = 0;
  uint64_t transform_failures = 0;
  uint64_t drops = 0;  ///< messages that could not be republished
  uint64_t forward_samples = 0;
  double mean_forward_ms = 0;  ///< receipt-to-republish-issued delay
};

/// Client-side transformer bridge: subscribes on a source broker, transforms,
/// republishes on the destination broker. The outbound client connects lazily
/// when the first message is forwarded.
class Bridge {
 public:
  Bridge(BridgeSpec spec, uint16_t source_port, uint16_t dest_port,
         LinkProfile in_link, LinkProfile out_link, DelayScheduler& scheduler,
         const RunClock& clock, DropTraceLog* trace, ClientConfig base_cfg);
  ~Bridge();

  Bridge(const Bridge&) = delete;
  Bridge& operator=(const Bridge&) = delete;

  /// Connects inbound and subscribes; returns once the subscription is live.
  void start();
  void stop();

  BridgeStats stats() const;
  const BridgeSpec& spec() const { return spec_; }

 private:
  struct Buffered {
    TopicName topic;
    std::vector<uint8_t> payload;
    std::vector<UserProperty> props;
  };

  void on_message(const InboundMessage& msg);
  bool ensure_outbound_locked();

  BridgeSpec spec_;
  ClientConfig base_cfg_;
  const RunClock& clock_;
  std::unique_ptr<MqttClient> in_;
  std::unique_ptr<MqttClient> out_;
  mutable std::mutex mu_;
  BridgeStats stats_;
  double forward_sum_ms_ = 0;
  std::deque<Buffered> buffer_;
  std::vector<std::shared_future<PublishOutcome>> async_pending_;
  bool stopped_ = false;
};

}  // namespace bridgebench
