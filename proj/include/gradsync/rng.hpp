// Copyright 2026 The gradsync Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace gradsync {

/// SplitMix64 generator.
///
/// The stream is bit-exact on every platform:
///   state += 0x9E3779B97F4A7C15
///   z = state
///   z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///   z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
/// The initial state is the seed. uniform() maps the top 53 bits to [0, 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). Uses rejection to avoid modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Standard normal via the Marsaglia polar method (uses only log and sqrt).
  double normal();

  /// Independent generator derived from this one's seed and a stream tag.
  /// Does not advance this generator.
  [[nodiscard]] Rng fork(std::uint64_t tag) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stateless 64-bit mixer (the SplitMix64 finalizer); used to derive seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace gradsync
