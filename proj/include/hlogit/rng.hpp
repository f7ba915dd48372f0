#pragma once

#include <cmath>
#include <cstdint>

namespace hlogit {

// SplitMix64 generator. Small, fast, and its output sequence is fixed by the
// seed alone, so artifacts built from it are reproducible across toolchains
// (std::<distribution> implementations are not pinned by the standard).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (no spare caching, keeps state minimal).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double rate) { return uniform() < rate; }

  // Integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

 private:
  std::uint64_t state_;
};

// Stream-splitting rule: substream `index` of `seed` starts from the mixed
// combination below. Draw-level parallelism reproduces the sequential result
// because every substream depends only on (seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  Rng mixer(seed ^ (0xD1B54A32D192ED03ull * (index + 1)));
  return mixer.next_u64();
}

}  // namespace hlogit
