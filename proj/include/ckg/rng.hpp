#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace ckg {

/// xoshiro256** (Blackman & Vigna), state expanded from a 64-bit seed with
/// splitmix64. All randomness in the project flows through this type; the
/// derived distributions below are written out by hand so streams are
/// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller (one value per call, no caching).
  double normal();
  /// Uniformly random permutation of 0..n-1 (Fisher-Yates).
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace ckg
