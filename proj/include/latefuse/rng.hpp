#pragma once

#include <cmath>
#include <cstdint>

namespace latefuse {

// Counter-based pseudo-random stream (splitmix64). The i-th output is a pure
// function of (seed, i), so streams can be split per sample / per epoch and
// regenerated in any order without changing the values drawn.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  // splitmix64 finalizer
  static std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Independent substream id for (seed, tag); used to split one master seed
  // into per-sample / per-epoch / per-purpose streams.
  static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag) {
    return mix64(seed ^ (mix64(tag + kGamma) + kGamma));
  }

  std::uint64_t next_u64() { return mix64(seed_ + (++counter_) * kGamma); }

  // uniform in [0, 1), 53-bit resolution
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // uniform in {0, ..., n-1}; modulo bias is negligible for the small n used here
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // standard normal via Box-Muller; consumes exactly two draws per call
  double normal() {
    double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;  // (0, 1]
    double u2 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr double kPi = 3.14159265358979323846;

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

// Stream tags (arbitrary distinct constants, mirrored by external tooling
// that needs to reproduce the exact draws).
namespace rng_tags {
inline constexpr std::uint64_t kGateInit = 0x696E6974;     // "init"
inline constexpr std::uint64_t kHoldoutSplit = 0x73706C69; // "spli"
inline constexpr std::uint64_t kEpochBase = 0x65706F6368000000ULL;
}  // namespace rng_tags

}  // namespace latefuse
