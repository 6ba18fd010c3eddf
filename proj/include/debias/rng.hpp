#pragma once

#include <cstdint>
#include <random>

namespace debias {

/// SplitMix64 mixing step.  Used to spread seeds and to derive statistically
/// independent per-replicate streams from (master seed, replicate index).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for replicate `index` of a run keyed by `seed`.  Replicates are
/// independent of execution order, so loops over replicates can be split,
/// resumed, or parallelized without changing any drawn number.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed ^ splitmix64(index + 1));
}

/// Thin wrapper over std::mt19937_64 (whose output sequence is pinned by the
/// standard) with explicit uniform mappings, so streams are bit-stable across
/// platforms and standard-library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  std::uint64_t next() { return eng_(); }

  /// Uniform double in [0,1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  bool bernoulli(double prob) { return uniform01() < prob; }

  /// Uniform index in [0, size) via 128-bit multiply-shift.  The residual
  /// bias (< size / 2^64) is negligible for any realistic size.
  std::size_t index(std::size_t size) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(next()) * size) >> 64);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace debias
