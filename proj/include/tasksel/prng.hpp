#pragma once

#include <cmath>
#include <cstdint>

#include "tasksel/errors.hpp"

namespace tasksel {

inline constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ULL;

/// SplitMix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Purpose label baked into stream derivation so independently keyed streams
/// never collide even for equal counters.
enum class StreamTag : std::uint64_t {
  subset_draw = 1,
  holdout_draw = 2,
  world_beta = 3,
  world_features = 4,
  world_noise = 5,
  world_val_features = 6,
  world_val_noise = 7,
};

/// Deterministic SplitMix64 generator. Streams are derived from
/// (seed, tag, counter), never from global state, so any quantity keyed by its
/// counter is reproducible regardless of what else was drawn before it.
class Prng {
 public:
  explicit Prng(std::uint64_t state) : state_(state) {}

  static Prng stream(std::uint64_t seed, StreamTag tag, std::uint64_t counter) {
    std::uint64_t s = mix64(seed + kGolden64 * (static_cast<std::uint64_t>(tag) + 1));
    s = mix64(s ^ (counter + kGolden64));
    return Prng(s);
  }

  std::uint64_t next() {
    std::uint64_t z = (state_ += kGolden64);
    return mix64(z);
  }

  /// Unbiased draw from [0, m) by rejection. m must be positive.
  std::uint64_t bounded(std::uint64_t m) {
    if (m == 0) throw invalid_parameter_error("bounded(): m must be positive");
    const std::uint64_t threshold = (0 - m) % m;  // 2^64 mod m
    std::uint64_t v = next();
    while (v < threshold) v = next();
    return v % m;
  }

  /// Inclusive uniform integer in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    if (lo > hi) throw invalid_parameter_error("uniform_int(): empty range");
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    // span == 0 means the full 64-bit range.
    const std::uint64_t r = (span == 0) ? next() : bounded(span);
    return lo + static_cast<std::int64_t>(r);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Standard normal via Box-Muller. Draws two uniforms per call and keeps no
  /// cache, so the draw count per gaussian is fixed.
  double gaussian() {
    const double u1 = unit();
    const double u2 = unit();
    const double r = std::sqrt(-2.0 * std::log1p(-u1));  // log(1-u1), u1 < 1
    constexpr double two_pi = 6.283185307179586476925286766559;
    return r * std::cos(two_pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace tasksel
