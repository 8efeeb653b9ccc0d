#pragma once

#include "isac/types.hpp"

#include <cmath>
#include <cstdint>

namespace isac {

/// Deterministic, platform-independent generator (splitmix64 core).
/// All randomness in the library flows through this so that datasets,
/// parameter inits and noise draws reproduce bit-exactly from a seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform01() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Standard normal via Box-Muller (no state caching, pair discarded).
  double gauss() {
    double u1 = uniform01();
    double u2 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  /// Circularly-symmetric complex normal with E|z|^2 = var.
  cd cnormal(double var) {
    double s = std::sqrt(var / 2.0);
    return cd(s * gauss(), s * gauss());
  }

 private:
  uint64_t state_;
};

/// Derives an independent stream seed from (base, index) pairs, so any
/// sample or substream reproduces in isolation.
inline uint64_t derive_seed(uint64_t base, uint64_t index) {
  Rng r(base ^ (0x632be59bd9b4e019ULL + index * 0x9e3779b97f4a7c15ULL));
  return r.next_u64();
}

}  // namespace isac
