#pragma once

#include <cstdint>
#include <map>
#include <string>

namespace bridgebench {

/// Per-broker accounting, exported with every run report. For a terminated
/// run in which every message has exactly one matching subscriber,
/// publishes_received == messages_forwarded + messages_dropped_queue +
/// duplicates_suppressed; messages routed to no subscriber show up in
/// messages_unrouted instead of messages_forwarded.
struct BrokerCounters {
  uint64_t connections_accepted = 0;
  uint64_t publishes_received = 0;   ///< PUBLISH frames taken off the wire
  uint64_t messages_forwarded = 0;   ///< deliveries enqueued to subscribers
  uint64_t messages_dropped_queue = 0;
  uint64_t duplicates_suppressed = 0;  ///< QoS 2 re-sends caught by the barrier
  uint64_t messages_unrouted = 0;
  uint64_t retries_exhausted = 0;
  uint64_t malformed_packets = 0;
  /// First-receipt PUBLISH count per topic name (duplicates suppressed by
  /// the QoS 2 barrier are not re-counted; QoS 1 duplicates are, matching
  /// at-least-once forwarding).
  std::map<std::string, uint64_t> received_by_topic;
};

}  // namespace bridgebench
