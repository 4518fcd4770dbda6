#pragma once

#include <cstdint>
#include <random>

#include "treelearn/bits.hpp"

namespace treelearn {

/// Seeded generator with platform-independent conversions. The standard
/// distributions are implementation-defined, so uniform draws are derived from
/// the raw 64-bit engine output here to keep runs bitwise reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  Bit sign() { return (engine_() >> 63) ? Bit{1} : Bit{-1}; }

  /// +1 with probability p.
  Bit bernoulli_bit(double p) { return uniform() < p ? Bit{1} : Bit{-1}; }

  /// Standard normal via Box-Muller.
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent child seed (splitmix64 finalizer over seed and stream).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace treelearn
