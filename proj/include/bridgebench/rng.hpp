#pragma once

#include <cstdint>
#include <string_view>

namespace bridgebench {

/// Finalizer-style mixer (splitmix64). Used wherever a seed and a counter
/// have to be turned into an independent pseudo-random stream without
/// carrying generator state between threads.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

/// Combine an arbitrary number of 64-bit values into one well-mixed word.
inline uint64_t mix64(uint64_t a, uint64_t b) { return splitmix64(a ^ splitmix64(b)); }

template <typename... Rest>
inline uint64_t mix64(uint64_t a, uint64_t b, Rest... rest) {
  return mix64(mix64(a, b), rest...);
}

/// Uniform double in [0, 1) from a mixed word.
inline double u01(uint64_t h) {
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

/// Small stateful generator for payload synthesis; seeded once, then local.
class SplitMix {
 public:
  explicit SplitMix(uint64_t seed) : state_(seed) {}
  uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ull;
    uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double next_u01() { return u01(next()); }
  uint64_t next_below(uint64_t n) { return n ? next() % n : 0; }

 private:
  uint64_t state_;
};

}  // namespace bridgebench
