#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace scaledrift {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: stream (seed, key) yields splitmix64 of a
/// running counter, so independent streams can be regenerated in any order
/// and give identical values on every platform.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t key) : key_(splitmix64(seed ^ splitmix64(key))) {}
  CounterRng(std::uint64_t seed, std::uint64_t key, std::uint64_t sub)
      : CounterRng(seed, splitmix64(key) ^ (sub * 0xd1b54a32d192ed03ULL)) {}

  std::uint64_t next() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * counter_++); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    // Box-Muller, one value per call.
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace scaledrift
