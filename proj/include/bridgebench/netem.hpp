#pragma once

#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "bridgebench/clock.hpp"

namespace bridgebench {

/// Direction of travel across an emulated client<->broker link.
enum class Direction : uint8_t {
  ClientToBroker = 0,
  BrokerToClient = 1,
};

const char* direction_name(Direction d);

/// Impairment model for one logical link. Loss operates per MQTT packet:
/// the packet survives only if every notional wire segment of
/// `segment_size` bytes survives an independent Bernoulli trial.
struct LinkProfile {
  double one_way_delay_ms = 0.0;
  double jitter_ms = 0.0;                    ///< uniform in [-jitter, +jitter]
  double bandwidth_bytes_per_s = 0.0;        ///< 0 disables serialization delay
  double segment_loss_p = 0.0;
  std::optional<double> segment_loss_p_reverse;  ///< broker->client override
  uint32_t segment_size = 1460;
  double per_connection_overhead_ms = 0.0;   ///< charged once per CONNECT
  uint64_t seed = 0;
  /// Fault-injection hook: (direction, ordinal) pairs dropped regardless of
  /// the probabilistic model. Used to lose specific packets in tests.
  std::vector<std::pair<Direction, uint64_t>> forced_drops;

  double loss_p(Direction d) const {
    return (d == Direction::BrokerToClient && segment_loss_p_reverse)
               ? *segment_loss_p_reverse
               : segment_loss_p;
  }

  std::vector<std::string> validate() const;
};

/// Probability that an `nbytes` MQTT packet is lost on a link with the given
/// profile: 1 - (1 - p)^ceil(nbytes / segment_size).
double drop_probability(const LinkProfile& profile, Direction d, size_t nbytes);

/// One per-packet verdict, recorded in send order per (link, direction).
struct DropDecision {
  std::string link;
  Direction direction = Direction::ClientToBroker;
  uint64_t ordinal = 0;
  bool dropped = false;
};

/// Thread-safe collector for drop decisions across a whole repetition.
/// The CSV is emitted sorted by (link, direction, ordinal) so identical
/// decision sets serialize to identical bytes regardless of thread timing.
class DropTraceLog {
 public:
  void record(DropDecision d);
  std::vector<DropDecision> sorted() const;
  void write_csv(std::ostream& os, const std::string& run_id) const;
  uint64_t dropped_count() const;
  uint64_t total_count() const;
  void clear();

 private:
  mutable std::mutex mu_;
  std::vector<DropDecision> decisions_;
};

/// Single shared timer wheel. Tasks run on the scheduler thread and must not
/// block; anything that can block hands off to a worker queue instead.
/// Ties on the deadline fire in insertion order.
class DelayScheduler {
 public:
  DelayScheduler();
  ~DelayScheduler();
  DelayScheduler(const DelayScheduler&) = delete;
  DelayScheduler& operator=(const DelayScheduler&) = delete;

  using Task = std::function<void()>;

  uint64_t schedule_at(SteadyTime when, Task task);
  uint64_t schedule_after(std::chrono::microseconds delay, Task task);
  bool cancel(uint64_t id);
  size_t pending() const;

  /// Stop the thread; pending tasks are discarded.
  void stop();

 private:
  struct Entry {
    SteadyTime when;
    uint64_t seq;
    uint64_t id;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.when != b.when) return a.when > b.when;
      return a.seq > b.seq;
    }
  };

  void run();

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::priority_queue<Entry, std::vector<Entry>, Later> heap_;
  std::unordered_map<uint64_t, Task> tasks_;
  uint64_t next_seq_ = 0;
  uint64_t next_id_ = 1;
  bool stopping_ = false;
  std::thread thread_;
};

/// Impairment state for one client's path to its broker. Drop decisions are
/// a pure function of (profile seed, link id, direction, ordinal), so a rerun
/// with the same configuration reproduces them exactly; queueing delay is
/// tracked per direction so deliveries stay FIFO.
class EmulatedLink {
 public:
  EmulatedLink(std::string link_id, LinkProfile profile, DropTraceLog* trace);

  struct Transit {
    bool dropped = false;
    uint64_t ordinal = 0;
    SteadyTime deliver_at;  ///< strictly increasing per (link, direction)
  };

  /// Decide the fate of one packet. `now` is the instant the packet enters
  /// the link. Thread-safe; ordinals are assigned in call order.
  Transit transit(Direction d, size_t nbytes, bool is_connect, SteadyTime now);

  const std::string& id() const { return link_id_; }
  const LinkProfile& profile() const { return profile_; }

 private:
  std::string link_id_;
  LinkProfile profile_;
  uint64_t link_hash_;
  DropTraceLog* trace_;

  std::mutex mu_;
  uint64_t ordinal_[2] = {0, 0};
  SteadyTime busy_until_[2];
  SteadyTime last_delivery_[2];
};

}  // namespace bridgebench
