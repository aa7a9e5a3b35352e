#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>

namespace opfv {

// Counter-based random streams. Every consumer derives its own stream key
// from (seed, purpose tag, index), so sampling is reproducible regardless of
// evaluation order and safe to split across workers.

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t derive_key(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0) {
  std::uint64_t k = mix64(seed + kGolden) ^ fnv1a64(tag);
  return mix64(k + index * kGolden);
}

class Rng {
 public:
  explicit Rng(std::uint64_t key) : key_(key) {}
  Rng(std::uint64_t seed, std::string_view tag, std::uint64_t index = 0)
      : key_(derive_key(seed, tag, index)) {}

  std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * kGolden); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [lo, hi] inclusive
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
    const __uint128_t wide = static_cast<__uint128_t>(next_u64()) * span;
    return lo + static_cast<std::int64_t>(wide >> 64);
  }

  double normal(double mean = 0.0, double stddev = 1.0) {
    // Box-Muller; one value per pair keeps the stream stateless.
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double mag = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * mag * std::cos(2.0 * std::numbers::pi * u2);
  }

  // index sampled proportionally to the (non-negative) weights
  int categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double u = uniform() * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      u -= weights[i];
      if (u <= 0.0) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  std::uint64_t key_;
  std::uint64_t ctr_ = 0;
};

}  // namespace opfv
