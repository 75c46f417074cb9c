#pragma once

#include <cmath>
#include <cstdint>

namespace monk {

// Deterministic, portable PRNG (splitmix64). The standard <random>
// distributions are not bit-stable across library implementations, and
// frozen test expectations plus byte-identical artifacts require streams
// that never change underneath us.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Derives an independent stream for a tagged purpose (arrivals, service
  // jitter, lock placement, ...). Streams from distinct tags are decorrelated.
  Rng stream(std::uint64_t tag) const {
    Rng r(state_ ^ (tag * 0x9E3779B97F4A7C15ull) ^ 0xD1B54A32D192ED03ull);
    r.next_u64();
    return r;
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

  // Exponential with the given rate (events per unit time).
  double exponential(double rate) {
    double u;
    do {
      u = next_double();
    } while (u <= 0.0);
    return -std::log(u) / rate;
  }

  // Poisson count by Knuth's product method; fine for small means.
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double limit = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

 private:
  std::uint64_t state_;
};

}  // namespace monk
