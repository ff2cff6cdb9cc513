#pragma once

#include <cstdint>
#include <vector>

namespace embalign {

/// SplitMix64 (Steele, Lea & Flood 2014). The state is a 64-bit counter
/// advanced by the golden-gamma constant; each output is the counter passed
/// through a fixed finalizer. Streams are split by hashing (seed, tag), so a
/// child stream depends only on its parent seed and tag, never on how many
/// numbers the parent already produced.
///
/// Derived distributions are computed here (not via <random>) so the same
/// seed yields the same doubles on every standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  /// Uniform on [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Standard normal via Box-Muller; one output per call, second discarded.
  double normal();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  /// Independent child stream identified by `tag`.
  Rng split(std::uint64_t tag) const;

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
};

/// SplitMix64 finalizer applied to seed ^ f(index); used for replication and
/// pipeline-step seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index);

}  // namespace embalign
