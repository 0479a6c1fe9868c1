#include "bridgebench/bridge.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "bridgebench/payload.hpp"

namespace bridgebench {

namespace {
constexpr size_t kBridgeBufferCap = 1000;
}

std::string topic_scheme_name(TopicScheme s) {
  return s == TopicScheme::Wildcard ? "wildcard" : "explicit";
}

std::optional<std::vector<uint8_t>> transform_payload(
    const TransformSpec& spec, const std::vector<uint8_t>& input,
    const std::string& provider_id, const std::string& hub_id) {
  if (spec.mode == TransformMode::Identity) return input;

  auto readings = parse_sensor_payload(input);
  if (!readings) return std::nullopt;

  size_t budget = input.size() > 1 ? input.size() - 1 : 0;
  size_t target = static_cast<size_t>(spec.ratio * static_cast<double>(input.size())) +
                  kUnifyEnvelopeBytes;
  budget = std::min(budget, target);

  std::string out = "# unified provider=" + provider_id + " hub=" + hub_id +
                    " records=" + std::to_string(readings->size()) + "\n";
  if (out.size() > budget) out.resize(budget);
  for (const SensorReading& r : *readings) {
    std::string line =
        hub_id + " " + r.timestamp + " " + r.parameter + " " + r.value + "\n";
    if (out.size() + line.size() > budget) break;
    out += line;
  }
  return std::vector<uint8_t>(out.begin(), out.end());
}

TopicName TopicMapping::apply(const TopicName& t) const {
  const std::string& s = t.str();
  std::string prefix = from_prefix + "/";
  if (s.size() > prefix.size() && s.compare(0, prefix.size(), prefix) == 0)
    return TopicName::require(to_prefix + "/" + s.substr(prefix.size()));
  return TopicName::require(to_prefix + "/" + s);
}

DeploymentPlan plan_deployment(const std::vector<ProviderSpec>& providers,
                               int aut, TopicScheme scheme) {
  if (aut != 1 && aut != 2)
    throw InvalidTopology("unknown architecture variant: " +
                          std::to_string(aut));
  if (providers.empty()) throw InvalidTopology("no providers");

  DeploymentPlan plan;
  plan.aut = aut;
  for (const ProviderSpec& provider : providers) {
    size_t hub_count = 0;
    for (const GatewaySpec& gw : provider.gateways) hub_count += gw.hubs.size();
    if (hub_count == 0)
      throw InvalidTopology("provider " + provider.id + " has no hubs");

    if (aut == 1) {
      BridgeSpec b;
      b.id = "bridge-" + provider.id;
      b.provider_id = provider.id;
      if (scheme == TopicScheme::Wildcard) {
        b.subscription.push_back(
            TopicFilter::require("providers/" + provider.id + "/#"));
      } else {
        for (const GatewaySpec& gw : provider.gateways)
          for (const HubSpec& hub : gw.hubs)
            b.subscription.push_back(TopicFilter::require(hub.topic.str()));
      }
      plan.bridges.push_back(std::move(b));
    } else {
      for (const GatewaySpec& gw : provider.gateways) {
        for (const HubSpec& hub : gw.hubs) {
          BridgeSpec b;
          b.id = "bridge-" + provider.id + "-" + hub.id;
          b.provider_id = provider.id;
          b.subscription.push_back(TopicFilter::require(hub.topic.str()));
          plan.bridges.push_back(std::move(b));
        }
      }
    }
  }

  std::set<size_t> sizes;
  for (const BridgeSpec& b : plan.bridges) {
    if (b.mapping.to_prefix == b.mapping.from_prefix)
      throw InvalidTopology("bridge " + b.id + " would republish into its own input");
    for (const TopicFilter& f : b.subscription) {
      sizes.insert(f.overhead_bytes());
      if (f.levels().empty() || (f.levels()[0] != b.mapping.from_prefix &&
                                 f.levels()[0] != "#"))
        throw InvalidTopology("bridge " + b.id +
                              " subscribes outside its input prefix");
    }
  }
  plan.bridge_topic_bytes = sizes.size() == 1 ? *sizes.begin() : 0;
  return plan;
}

Bridge::Bridge(BridgeSpec spec, uint16_t source_port, uint16_t dest_port,
               LinkProfile in_link, LinkProfile out_link,
               DelayScheduler& scheduler, const RunClock& clock,
               DropTraceLog* trace, ClientConfig base_cfg)
    : spec_(std::move(spec)), base_cfg_(std::move(base_cfg)), clock_(clock) {
  ClientConfig in_cfg = base_cfg_;
  in_cfg.client_id = spec_.id + "-in";
  in_cfg.port = source_port;
  in_cfg.auto_stamp = false;
  in_ = std::make_unique<MqttClient>(in_cfg, in_link, spec_.id + "-in",
                                     scheduler, clock, trace);

  ClientConfig out_cfg = base_cfg_;
  out_cfg.client_id = spec_.id + "-out";
  out_cfg.port = dest_port;
  out_cfg.auto_stamp = false;
  out_ = std::make_unique<MqttClient>(out_cfg, out_link, spec_.id + "-out",
                                      scheduler, clock, trace);
}

Bridge::~Bridge() {
  bool need_stop;
  {
    std::lock_guard lock(mu_);
    need_stop = !stopped_;
  }
  if (need_stop) stop();
}

void Bridge::start() {
  in_->connect();
  SubscribeOptions opts;
  opts.max_qos = spec_.qos;
  opts.no_local = true;
  opts.retain_as_published = true;
  in_->subscribe(spec_.subscription, opts,
                 [this](const InboundMessage& msg) { on_message(msg); });
}

bool Bridge::ensure_outbound_locked() {
  if (out_->connected()) return true;
  try {
    out_->connect();
  } catch (const std::exception&) {
    return false;
  }
  return true;
}

void Bridge::on_message(const InboundMessage& msg) {
  const auto& levels = msg.topic.levels();
  std::string hub = levels.size() >= 3 ? levels[2] : "";

  auto payload =
      transform_payload(spec_.transform, msg.payload, spec_.provider_id, hub);

  std::shared_future<PublishOutcome> fut;
  {
    std::lock_guard lock(mu_);
    ++stats_.received;
    if (!payload) {
      ++stats_.transform_failures;
      return;
    }
    if (stopped_) {
      ++stats_.drops;
      return;
    }
    if (!ensure_outbound_locked()) {
      if (buffer_.size() < kBridgeBufferCap) {
        buffer_.push_back({msg.topic, *payload, msg.user_properties});
      } else {
        ++stats_.drops;
      }
      return;
    }
    while (!buffer_.empty()) {
      Buffered& b = buffer_.front();
      async_pending_.push_back(out_->publish_async(
          spec_.mapping.apply(b.topic), std::move(b.payload), spec_.qos,
          std::move(b.props)));
      buffer_.pop_front();
    }
    fut = out_->publish_async(spec_.mapping.apply(msg.topic),
                              std::move(*payload), spec_.qos,
                              msg.user_properties);
    forward_sum_ms_ +=
        static_cast<double>(clock_.now_us() - msg.arrival_us) / 1000.0;
    ++stats_.forward_samples;
    if (spec_.republish == RepublishMode::Asynchronous) {
      async_pending_.push_back(fut);
      if (async_pending_.size() >= 512) {
        std::erase_if(async_pending_, [this](auto& f) {
          if (f.wait_for(std::chrono::seconds(0)) != std::future_status::ready)
            return false;
          f.get().ok ? ++stats_.republished : ++stats_.drops;
          return true;
        });
      }
    }
  }

  if (spec_.republish == RepublishMode::Synchronous) {
    PublishOutcome out = fut.get();
    std::lock_guard lock(mu_);
    out.ok ? ++stats_.republished : ++stats_.drops;
  }
}

void Bridge::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopped_) return;
    stopped_ = true;
  }
  if (in_->connected()) in_->disconnect();

  std::vector<std::shared_future<PublishOutcome>> pending;
  std::deque<Buffered> leftover;
  {
    std::lock_guard lock(mu_);
    pending.swap(async_pending_);
    leftover.swap(buffer_);
  }
  for (auto& fut : pending) {
    bool ok = fut.get().ok;
    std::lock_guard lock(mu_);
    ok ? ++stats_.republished : ++stats_.drops;
  }
  {
    std::lock_guard lock(mu_);
    stats_.drops += leftover.size();
  }
  if (out_->connected()) out_->disconnect();
}

BridgeStats Bridge::stats() const {
  std::lock_guard lock(mu_);
  BridgeStats s = stats_;
  s.mean_forward_ms =
      s.forward_samples ? forward_sum_ms_ / static_cast<double>(s.forward_samples)
                        : 0.0;
  return s;
}

}  // namespace bridgebench
