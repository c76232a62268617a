// sim2real-lidar: two-domain LiDAR benchmark and alignment training toolkit
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace s2r {

// Counter-based pseudo-random streams. Every consumer of randomness in this
// library derives a stream from integer keys, so results never depend on
// call order across scenes, samples or threads. The generator is the
// splitmix64 finalizer over key + counter; Gaussians come from Box-Muller.
// Both are pinned here so outputs are reproducible across platforms and
// independent of any standard-library distribution implementation.

inline constexpr std::uint64_t kRngGamma = 0x9E3779B97F4A7C15ull;

inline std::uint64_t rng_mix(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xBF58476D1CE4E5B9ull;
  z ^= z >> 27;
  z *= 0x94D049BB133111EBull;
  z ^= z >> 31;
  return z;
}

// Folds a value into a key; used to derive sub-streams.
inline std::uint64_t key_fold(std::uint64_t key, std::uint64_t value) {
  return rng_mix((key + kRngGamma) ^ rng_mix(value + kRngGamma));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64() { return rng_mix(key_ + (++counter_) * kRngGamma); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)) % n;
  }

  // Standard normal via Box-Muller (cosine branch only; two uniforms per
  // draw, no cached spare, so draws stay a pure function of the counter).
  double gaussian() {
    double u1 = 1.0 - uniform();  // (0, 1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double gaussian(double stddev) { return stddev <= 0.0 ? 0.0 : stddev * gaussian(); }

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline RngStream make_stream(std::uint64_t seed, std::uint64_t a) {
  return RngStream(key_fold(seed, a));
}

inline RngStream make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return RngStream(key_fold(key_fold(seed, a), b));
}

inline RngStream make_stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b,
                             std::uint64_t c) {
  return RngStream(key_fold(key_fold(key_fold(seed, a), b), c));
}

// In-place Fisher-Yates; pinned here instead of std::shuffle because the
// standard leaves the sequence of swaps unspecified.
template <typename T>
void deterministic_shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace s2r
