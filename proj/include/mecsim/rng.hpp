#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mecsim {

// Seeded random stream. Distribution draws are implemented by inverse
// transform / Box-Muller on top of mt19937_64 so that a given seed yields
// the same stream on every standard library.
class Rng {
 public:
  explicit Rng(uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  // Exponential with the given mean (0 mean gives exact 0).
  double exponential(double mean) {
    if (mean <= 0.0) return 0.0;
    return -mean * std::log1p(-uniform());
  }

  // Gaussian with mean 0, given sigma. Box-Muller without spare caching,
  // so each call consumes exactly two uniforms.
  double normal(double sigma) {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Uniform integer in [0, n), n >= 1. Rejection-free multiply-shift would
  // bias large n; rejection keeps it exact.
  uint64_t integer(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v;
    do {
      v = eng_();
    } while (v >= limit);
    return v % n;
  }

  uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace mecsim
