#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace bsr {

/// Deterministic 64-bit generator used by every randomized operation in the
/// library, so that seeds reproduce across platforms and languages.
///
/// Algorithm: SplitMix64 (Steele, Lea, Flood 2014). State advances by the
/// golden-ratio constant 0x9E3779B97F4A7C15 and each output is the finalizer
///   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
///   z ^= z >> 27; z *= 0x94D049BB133111EB;
///   z ^= z >> 31;
/// Derived quantities (doubles, bounded ints, normals, shuffles) are defined
/// below in terms of the raw 64-bit stream only, never via std::random
/// distributions, which are implementation-defined.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1), from the top 53 bits.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  /// Uniform integer in [0, bound) without modulo bias (rejection sampling).
  std::uint64_t next_below(std::uint64_t bound) {
    if (bound == 0) return 0;
    const std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  /// Standard normal via Box-Muller; consumes exactly two raw draws per call.
  double next_normal() {
    // u1 in (0,1] so the log is finite.
    const double u1 = 1.0 - next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// First k entries of a full shuffle of 0..n-1 (sampling without
  /// replacement); the returned order is the sampling order.
  std::vector<int> sample_without_replacement(int n, int k);

 private:
  std::uint64_t state_;
};

/// Deterministic seed derivation for independent sub-streams:
///   derive(s, tag) = finalize(s + 0x9E3779B97F4A7C15 + tag * 0xBF58476D1CE4E5B9)
/// where finalize is the SplitMix64 output function. The tag is scaled by an
/// odd constant so swapping seed and tag gives a different stream. Chaining
/// derive over a tuple of tags gives the per-cell seeds used by the benchmark
/// runner, and derive(s, 0) is the first raw output of the stream seeded s.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL + tag * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::vector<int> SplitMix64::sample_without_replacement(int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
  if (k > n) k = n;
  // Partial Fisher-Yates from the front.
  for (int i = 0; i < k; ++i) {
    const int j = i + static_cast<int>(next_below(static_cast<std::uint64_t>(n - i)));
    std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
  }
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace bsr
