#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace koopnav {

/// Deterministic random stream. A (seed, stream) pair always produces the
/// same sequence of draws; uniform and normal variates are generated from
/// raw 64-bit words with fixed arithmetic so output bytes do not depend on
/// the standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{seed, stream};
    gen_.seed(seq);
  }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform draw in [lo, hi).
  double uniform(double lo, double hi) {
    const double u = (next_u64() >> 11) * 0x1.0p-53;
    return lo + u * (hi - lo);
  }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Gaussian draw via Box-Muller; one spare value is cached.
  double normal(double mean, double stddev) {
    if (has_spare_) {
      has_spare_ = false;
      return mean + stddev * spare_;
    }
    double u1 = 0.0;
    do {
      u1 = (next_u64() >> 11) * 0x1.0p-53;
    } while (u1 <= 0.0);
    const double u2 = (next_u64() >> 11) * 0x1.0p-53;
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return mean + stddev * r * std::cos(a);
  }

 private:
  std::mt19937_64 gen_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace koopnav
