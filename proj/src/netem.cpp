#include "bridgebench/netem.hpp"

#include <algorithm>
#include <cmath>

#include "bridgebench/rng.hpp"

namespace bridgebench {

namespace {
constexpr uint64_t kDropSalt = 0x64726f70ull;    // which packets die
constexpr uint64_t kJitterSalt = 0x6a697474ull;  // how late the others are

std::chrono::microseconds us_from_ms(double ms) {
  return std::chrono::microseconds(static_cast<int64_t>(std::llround(ms * 1000.0)));
}
}  // namespace

const char* direction_name(Direction d) {
  return d == Direction::ClientToBroker ? "up" : "down";
}

std::vector<std::string> LinkProfile::validate() const {
  std::vector<std::string> errs;
  if (one_way_delay_ms < 0) errs.push_back("one_way_delay_ms must be >= 0");
  if (jitter_ms < 0) errs.push_back("jitter_ms must be >= 0");
  if (jitter_ms > one_way_delay_ms && jitter_ms > 0)
    errs.push_back("jitter_ms must not exceed one_way_delay_ms");
  if (bandwidth_bytes_per_s < 0) errs.push_back("bandwidth_bytes_per_s must be >= 0");
  if (segment_loss_p < 0 || segment_loss_p > 1)
    errs.push_back("segment_loss_p must be in [0, 1]");
  if (segment_loss_p_reverse &&
      (*segment_loss_p_reverse < 0 || *segment_loss_p_reverse > 1))
    errs.push_back("segment_loss_p_reverse must be in [0, 1]");
  if (segment_size == 0) errs.push_back("segment_size must be > 0");
  if (per_connection_overhead_ms < 0)
    errs.push_back("per_connection_overhead_ms must be >= 0");
  return errs;
}

double drop_probability(const LinkProfile& profile, Direction d, size_t nbytes) {
  double p = profile.loss_p(d);
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  uint64_t segments = (nbytes + profile.segment_size - 1) / profile.segment_size;
  if (segments == 0) segments = 1;
  return 1.0 - std::pow(1.0 - p, static_cast<double>(segments));
}

void DropTraceLog::record(DropDecision d) {
  std::lock_guard lock(mu_);
  decisions_.push_back(std::move(d));
}

std::vector<DropDecision> DropTraceLog::sorted() const {
  std::vector<DropDecision> out;
  {
    std::lock_guard lock(mu_);
    out = decisions_;
  }
  std::sort(out.begin(), out.end(), [](const DropDecision& a, const DropDecision& b) {
    if (a.link != b.link) return a.link < b.link;
    if (a.direction != b.direction) return a.direction < b.direction;
    return a.ordinal < b.ordinal;
  });
  return out;
}

void DropTraceLog::write_csv(std::ostream& os, const std::string& run_id) const {
  os << "run_id,link,direction,ordinal,dropped\n";
  for (const auto& d : sorted()) {
    os << run_id << ',' << d.link << ',' << direction_name(d.direction) << ','
       << d.ordinal << ',' << (d.dropped ? 1 : 0) << '\n';
  }
}

uint64_t DropTraceLog::dropped_count() const {
  std::lock_guard lock(mu_);
  uint64_t n = 0;
  for (const auto& d : decisions_)
    if (d.dropped) ++n;
  return n;
}

uint64_t DropTraceLog::total_count() const {
  std::lock_guard lock(mu_);
  return decisions_.size();
}

void DropTraceLog::clear() {
  std::lock_guard lock(mu_);
  decisions_.clear();
}

DelayScheduler::DelayScheduler() : thread_([this] { run(); }) {}

DelayScheduler::~DelayScheduler() { stop(); }

uint64_t DelayScheduler::schedule_at(SteadyTime when, Task task) {
  std::lock_guard lock(mu_);
  if (stopping_) return 0;
  uint64_t id = next_id_++;
  heap_.push(Entry{when, next_seq_++, id});
  tasks_.emplace(id, std::move(task));
  cv_.notify_one();
  return id;
}

uint64_t DelayScheduler::schedule_after(std::chrono::microseconds delay, Task task) {
  return schedule_at(RunClock::steady_now() + delay, std::move(task));
}

bool DelayScheduler::cancel(uint64_t id) {
  std::lock_guard lock(mu_);
  return tasks_.erase(id) > 0;
}

size_t DelayScheduler::pending() const {
  std::lock_guard lock(mu_);
  return tasks_.size();
}

void DelayScheduler::stop() {
  {
    std::lock_guard lock(mu_);
    if (stopping_) {
      if (!thread_.joinable()) return;
    }
    stopping_ = true;
    cv_.notify_one();
  }
  if (thread_.joinable()) thread_.join();
}

void DelayScheduler::run() {
  std::unique_lock lock(mu_);
  while (!stopping_) {
    if (heap_.empty()) {
      cv_.wait(lock);
      continue;
    }
    Entry top = heap_.top();
    auto now = RunClock::steady_now();
    if (top.when > now) {
      cv_.wait_until(lock, top.when);
      continue;
    }
    heap_.pop();
    auto it = tasks_.find(top.id);
    if (it == tasks_.end()) continue;  // cancelled
    Task task = std::move(it->second);
    tasks_.erase(it);
    lock.unlock();
    task();
    lock.lock();
  }
}

EmulatedLink::EmulatedLink(std::string link_id, LinkProfile profile, DropTraceLog* trace)
    : link_id_(std::move(link_id)),
      profile_(std::move(profile)),
      link_hash_(fnv1a64(link_id_)),
      trace_(trace) {}

EmulatedLink::Transit EmulatedLink::transit(Direction d, size_t nbytes,
                                            bool is_connect, SteadyTime now) {
  std::lock_guard lock(mu_);
  const int di = static_cast<int>(d);
  Transit t;
  t.ordinal = ordinal_[di]++;

  uint64_t h = mix64(profile_.seed, link_hash_, static_cast<uint64_t>(di), t.ordinal);
  double p = drop_probability(profile_, d, nbytes);
  t.dropped = u01(splitmix64(h ^ kDropSalt)) < p;
  for (const auto& [fd, ord] : profile_.forced_drops)
    if (fd == d && ord == t.ordinal) t.dropped = true;

  if (trace_) trace_->record(DropDecision{link_id_, d, t.ordinal, t.dropped});

  // Serialization occupies the sender-side queue whether or not the packet
  // later survives the path.
  SteadyTime start = std::max(now, busy_until_[di]);
  std::chrono::microseconds ser{0};
  if (profile_.bandwidth_bytes_per_s > 0)
    ser = us_from_ms(static_cast<double>(nbytes) / profile_.bandwidth_bytes_per_s * 1000.0);
  busy_until_[di] = start + ser;

  if (t.dropped) {
    t.deliver_at = SteadyTime{};
    return t;
  }

  double delay_ms = profile_.one_way_delay_ms;
  if (profile_.jitter_ms > 0)
    delay_ms += (u01(splitmix64(h ^ kJitterSalt)) * 2.0 - 1.0) * profile_.jitter_ms;
  if (delay_ms < 0) delay_ms = 0;
  if (is_connect) delay_ms += profile_.per_connection_overhead_ms;

  SteadyTime deliver = start + ser + us_from_ms(delay_ms);
  SteadyTime floor = last_delivery_[di] + std::chrono::microseconds(1);
  if (deliver < floor) deliver = floor;  // keep per-direction FIFO order
  last_delivery_[di] = deliver;
  t.deliver_at = deliver;
  return t;
}

}  // namespace bridgebench
