#pragma once

#include <chrono>
#include <cstdint>

namespace bridgebench {

using SteadyTime = std::chrono::steady_clock::time_point;

/// Monotonic clock shared by every component of one benchmark repetition.
/// All embedded timestamps are microseconds since the clock's epoch, so
/// publisher stamps and subscriber arrival times are directly comparable.
class RunClock {
 public:
  RunClock() : epoch_(std::chrono::steady_clock::now()) {}

  uint64_t now_us() const {
    auto d = std::chrono::steady_clock::now() - epoch_;
    return static_cast<uint64_t>(
        std::chrono::duration_cast<std::chrono::microseconds>(d).count());
  }

  SteadyTime epoch() const { return epoch_; }

  static SteadyTime steady_now() { return std::chrono::steady_clock::now(); }

 private:
  SteadyTime epoch_;
};

}  // namespace bridgebench
