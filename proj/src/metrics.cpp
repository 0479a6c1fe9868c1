#include "bridgebench/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace bridgebench {

namespace {

bool parse_u64(const std::string& s, uint64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

double percentile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0;
  if (sorted.size() == 1) return sorted[0];
  double rank = p * static_cast<double>(sorted.size() - 1);
  size_t lo = static_cast<size_t>(rank);
  size_t hi = std::min(lo + 1, sorted.size() - 1);
  double frac = rank - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

void fill_latency_stats(MetricSet& m, std::vector<double>& samples) {
  m.latency_count = samples.size();
  if (samples.empty()) return;
  std::sort(samples.begin(), samples.end());
  double sum = 0;
  for (double v : samples) sum += v;
  m.latency_mean_ms = sum / static_cast<double>(samples.size());
  m.latency_median_ms = percentile_sorted(samples, 0.5);
  m.latency_p95_ms = percentile_sorted(samples, 0.95);
}

}  // namespace

SubscriberSink::SubscriberSink(
    std::map<std::string, std::pair<std::string, std::string>> topic_origin)
    : topic_origin_(std::move(topic_origin)) {}

void SubscriberSink::on_message(const InboundMessage& msg) {
  MeasurementRecord rec;
  rec.arrival_us = msg.arrival_us;
  rec.topic = msg.topic.str();
  rec.payload_bytes = msg.payload.size();

  auto origin = topic_origin_.find(rec.topic);
  if (origin != topic_origin_.end()) {
    rec.provider_id = origin->second.first;
    rec.gateway_id = origin->second.second;
  }

  std::string ts, seq;
  for (const auto& [k, v] : msg.user_properties) {
    if (k == "ts_us") ts = v;
    if (k == "seq") seq = v;
  }

  std::lock_guard lock(mu_);
  rec.arrival_order = next_order_++;
  uint64_t publish_us = 0, seq_v = 0;
  if (!parse_u64(ts, publish_us) || !parse_u64(seq, seq_v)) {
    rec.stamped = false;
    ++unstamped_;
  } else {
    rec.publish_us = publish_us;
    rec.seq = seq_v;
    rec.latency_ms =
        (static_cast<double>(rec.arrival_us) - static_cast<double>(publish_us)) /
        1000.0;
    rec.duplicate = !seen_.emplace(rec.gateway_id, seq_v).second;
  }
  records_.push_back(std::move(rec));
}

std::vector<MeasurementRecord> SubscriberSink::records() const {
  std::lock_guard lock(mu_);
  return records_;
}

uint64_t SubscriberSink::count() const {
  std::lock_guard lock(mu_);
  return records_.size();
}

uint64_t SubscriberSink::unstamped_count() const {
  std::lock_guard lock(mu_);
  return unstamped_;
}

uint64_t SubscriberSink::last_arrival_us() const {
  std::lock_guard lock(mu_);
  return records_.empty() ? 0 : records_.back().arrival_us;
}

double loss_per_1000(const MetricSet& m) {
  if (m.published == 0) return 0;
  return static_cast<double>(m.lost_e2e) * 1000.0 /
         static_cast<double>(m.published);
}

MetricsBundle compute_metrics(const MetricsInput& input) {
  MetricsBundle bundle;
  bundle.aggregate.unstamped = input.unstamped;

  std::map<GatewayKey, std::vector<double>> latencies;
  std::map<GatewayKey, double> payload_sums;
  std::vector<double> all_latencies;
  double payload_sum_all = 0;

  for (const auto& gw : input.gateways) {
    GatewayKey key{gw.provider_id, gw.gateway_id};
    MetricSet& m = bundle.per_gateway[key];
    m.published += gw.outcomes.size();
    for (const auto& out : gw.outcomes)
      if (!out.ok) ++m.publish_failures;
    for (const auto& t : gw.source_topics) {
      auto it = input.source_received_by_topic.find(t);
      if (it != input.source_received_by_topic.end())
        m.received_source += it->second;
    }
    for (const auto& t : gw.dest_topics) {
      auto it = input.dest_received_by_topic.find(t);
      if (it != input.dest_received_by_topic.end())
        m.received_dest += it->second;
    }
  }

  for (const auto& rec : input.records) {
    GatewayKey key{rec.provider_id, rec.gateway_id};
    MetricSet& m = bundle.per_gateway[key];
    if (!rec.stamped) {
      ++m.unstamped;
      continue;
    }
    if (rec.duplicate) {
      ++m.duplicates;
      continue;
    }
    ++m.received_unique;
    latencies[key].push_back(rec.latency_ms);
    all_latencies.push_back(rec.latency_ms);
    payload_sums[key] += static_cast<double>(rec.payload_bytes);
    payload_sum_all += static_cast<double>(rec.payload_bytes);
  }

  MetricSet& agg = bundle.aggregate;
  for (auto& [key, m] : bundle.per_gateway) {
    m.lost_e2e = m.published > m.received_unique ? m.published - m.received_unique
                                                 : 0;
    m.lost_source =
        m.published > m.received_source ? m.published - m.received_source : 0;
    fill_latency_stats(m, latencies[key]);
    m.payload_mean_bytes =
        m.received_unique
            ? payload_sums[key] / static_cast<double>(m.received_unique)
            : 0;

    agg.published += m.published;
    agg.publish_failures += m.publish_failures;
    agg.received_source += m.received_source;
    agg.received_dest += m.received_dest;
    agg.received_unique += m.received_unique;
    agg.duplicates += m.duplicates;
    agg.lost_e2e += m.lost_e2e;
    agg.lost_source += m.lost_source;
  }
  fill_latency_stats(agg, all_latencies);
  agg.payload_mean_bytes =
      agg.received_unique
          ? payload_sum_all / static_cast<double>(agg.received_unique)
          : 0;
  return bundle;
}

void write_records_csv(std::ostream& os, const std::string& run_id,
                       uint32_t repetition, int aut, uint8_t qos,
                       size_t topic_bytes,
                       const std::vector<MeasurementRecord>& records) {
  os << "run_id,repetition,aut,qos,topic_size,provider,gateway,seq,"
        "publish_ts_us,arrival_ts_us,latency_ms,payload_bytes,duplicate_flag\n";
  char buf[64];
  for (const auto& r : records) {
    os << run_id << ',' << repetition << ',' << aut << ','
       << static_cast<int>(qos) << ',' << topic_bytes << ',' << r.provider_id
       << ',' << r.gateway_id << ',';
    if (r.stamped) {
      std::snprintf(buf, sizeof buf, "%.3f", r.latency_ms);
      os << r.seq << ',' << r.publish_us << ',' << r.arrival_us << ',' << buf;
    } else {
      os << ",," << r.arrival_us << ',';
    }
    os << ',' << r.payload_bytes << ',' << (r.duplicate ? 1 : 0) << '\n';
  }
}

void write_outcomes_csv(std::ostream& os, const std::string& run_id,
                        const MetricsInput& input) {
  os << "run_id,provider,gateway,seq,qos,ok,error,publish_ts_us,"
        "complete_ts_us,retries,payload_bytes\n";
  for (const auto& gw : input.gateways) {
    for (const auto& out : gw.outcomes) {
      std::string err = out.error;
      std::replace(err.begin(), err.end(), ',', ';');
      os << run_id << ',' << gw.provider_id << ',' << gw.gateway_id << ','
         << out.seq << ',' << static_cast<int>(out.qos) << ','
         << (out.ok ? 1 : 0) << ',' << err << ',' << out.t_publish_us << ','
         << out.t_complete_us << ',' << out.retries << ',' << out.payload_bytes
         << '\n';
    }
  }
}

}  // namespace bridgebench
