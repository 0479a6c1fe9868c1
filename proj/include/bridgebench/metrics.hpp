#pragma once

#include <cstdint>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "bridgebench/client.hpp"

namespace bridgebench {

/// One subscriber-side message receipt.
struct MeasurementRecord {
  uint64_t arrival_us = 0;   ///< run-clock arrival at the subscriber
  std::string topic;
  uint64_t arrival_order = 0;
  std::string provider_id;
  std::string gateway_id;
  uint64_t seq = 0;          ///< publisher-assigned sequence number
  uint64_t publish_us = 0;   ///< stamp carried in the message, 0 if unstamped
  double latency_ms = 0;     ///< (arrival - publish) / 1000, 0 if unstamped
  size_t payload_bytes = 0;
  bool duplicate = false;    ///< (gateway, seq) seen before
  bool stamped = true;
};

/// Thread-safe terminal sink: resolves each receipt to its originating
/// gateway, flags duplicates, and keeps arrival order.
class SubscriberSink {
 public:
  /// topic_origin maps destination topic string -> (provider id, gateway id).
  explicit SubscriberSink(
      std::map<std::string, std::pair<std::string, std::string>> topic_origin);

  void on_message(const InboundMessage& msg);

  std::vector<MeasurementRecord> records() const;
  uint64_t count() const;
  uint64_t unstamped_count() const;
  /// Run-clock time of the most recent arrival; 0 before any arrival.
  uint64_t last_arrival_us() const;

 private:
  std::map<std::string, std::pair<std::string, std::string>> topic_origin_;
  mutable std::mutex mu_;
  std::vector<MeasurementRecord> records_;
  std::set<std::pair<std::string, uint64_t>> seen_;  ///< (gateway, seq)
  uint64_t unstamped_ = 0;
  uint64_t next_order_ = 0;
};

struct MetricSet {
  uint64_t published = 0;        ///< publish attempts at the gateways
  uint64_t publish_failures = 0; ///< attempts whose outcome reported failure
  uint64_t received_source = 0;  ///< source-broker receipt counter
  uint64_t received_dest = 0;    ///< destination-broker receipt counter
  uint64_t received_unique = 0;  ///< unique messages at the subscriber
  uint64_t duplicates = 0;
  uint64_t lost_e2e = 0;         ///< published - received_unique
  uint64_t lost_source = 0;      ///< max(0, published - received_source)
  uint64_t unstamped = 0;
  uint64_t latency_count = 0;
  double latency_mean_ms = 0;
  double latency_median_ms = 0;
  double latency_p95_ms = 0;
  double payload_mean_bytes = 0; ///< mean delivered (post-transform) size
};

/// Normalized end-to-end loss per 1000 published messages.
double loss_per_1000(const MetricSet& m);

struct GatewayKey {
  std::string provider_id;
  std::string gateway_id;
  auto operator<=>(const GatewayKey&) const = default;
};

struct MetricsInput {
  struct GatewayData {
    std::string provider_id;
    std::string gateway_id;
    std::vector<PublishOutcome> outcomes;
    std::vector<std::string> source_topics;  ///< topics this gateway publishes
    std::vector<std::string> dest_topics;    ///< their destination mappings
  };
  std::vector<GatewayData> gateways;
  std::vector<MeasurementRecord> records;
  std::map<std::string, uint64_t> source_received_by_topic;
  std::map<std::string, uint64_t> dest_received_by_topic;
  uint64_t unstamped = 0;
};

struct MetricsBundle {
  MetricSet aggregate;
  std::map<GatewayKey, MetricSet> per_gateway;
};

/// Latency statistics cover unique stamped receipts only; duplicates count
/// separately so repeated deliveries never skew the distribution.
MetricsBundle compute_metrics(const MetricsInput& input);

/// Pinned per-receipt CSV schema (one row per subscriber receipt).
void write_records_csv(std::ostream& os, const std::string& run_id,
                       uint32_t repetition, int aut, uint8_t qos,
                       size_t topic_bytes,
                       const std::vector<MeasurementRecord>& records);

/// Pinned per-publish-outcome CSV schema.
void write_outcomes_csv(std::ostream& os, const std::string& run_id,
                        const MetricsInput& input);

}  // namespace bridgebench
