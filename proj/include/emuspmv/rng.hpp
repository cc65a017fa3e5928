#pragma once

// Portable deterministic random numbers.
//
// The standard distributions (uniform_real_distribution, uniform_int_distribution)
// are implementation-defined, so generated matrices and permutations would
// differ between standard libraries. Everything here is derived directly from
// the raw 64-bit output of std::mt19937_64, whose sequence is fixed by the
// standard for a given seed.

#include <cstdint>
#include <random>

namespace emuspmv {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). Unbiased (rejection on the tail).
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % bound);
    std::uint64_t r = next();
    while (r >= limit) r = next();
    return r % bound;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace emuspmv
