// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fsd {

/// splitmix64 finalizer; a good 64-bit mixing function.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Order-independent child seed: derive_seed(base, {a, b}) depends only on
/// its arguments, never on how many draws happened elsewhere.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> salts) noexcept;

/// Deterministic random stream. Draws are defined bit-for-bit here rather
/// than through <random> distributions, whose algorithms vary by stdlib.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace fsd
