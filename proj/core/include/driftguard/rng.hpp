#pragma once

#include <cstdint>
#include <random>

namespace driftguard {

/// Purposes that get their own independent random substream.
enum class Stream : std::uint64_t {
  init = 1,
  shuffle = 2,
  sampling = 3,
  evaluation = 4,
  validation = 5,
  bootstrap = 6,
};

/// Seedable 64-bit generator: std::mt19937_64 seeded through splitmix64.
///
/// Only the raw engine output is used; uniform and normal variates are
/// derived here rather than through <random> distributions, whose algorithms
/// differ between standard library implementations. Results are therefore
/// identical across platforms for a given seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent generator for (seed, purpose). Does not advance *this.
  static Rng for_stream(std::uint64_t seed, Stream purpose, std::uint64_t index = 0);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n), unbiased (rejection sampling).
  std::uint64_t uniform_index(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace driftguard
