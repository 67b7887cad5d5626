#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace acprop_lab {

/// SplitMix64: a counter-based 64-bit generator.
///
/// Output is a pure function of (seed, counter), so the same stream can be
/// reproduced in any language. Distributions are implemented here rather than
/// via <random>, whose distribution algorithms are implementation-defined.
class SplitMix64 {
 public:
  static constexpr std::string_view kName = "splitmix64";

  explicit SplitMix64(std::uint64_t seed = 0) : state_(seed) {}

  static constexpr std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Independent child stream; children with distinct ids do not overlap in practice.
  SplitMix64 split(std::uint64_t stream_id) const {
    return SplitMix64(mix(state_ ^ mix(stream_id + kGamma)));
  }

  std::uint64_t state() const { return state_; }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

using Rng = SplitMix64;

/// Derives the seed of sub-run `index` from a base seed.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return SplitMix64::mix(base + 0x9e3779b97f4a7c15ULL * (index + 1));
}

}  // namespace acprop_lab
