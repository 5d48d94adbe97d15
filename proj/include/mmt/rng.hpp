#pragma once

// Platform-independent random streams. Everything that must reproduce
// bit-identically across machines (schedules, synthetic data, draws) goes
// through SplitMix64; <random> distributions are implementation-defined and
// are not used.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

namespace mmt {

inline constexpr std::uint64_t kSplitMixGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// FNV-1a, used to turn stream names into seed offsets.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed = 0) noexcept : state_(seed) {}

  // Independent named stream, e.g. SplitMix64::stream(seed, "train-missing").
  static SplitMix64 stream(std::uint64_t seed, std::string_view name) noexcept {
    return SplitMix64(splitmix64_mix(seed ^ fnv1a64(name)));
  }
  // Counter-based derivation: the k-th child of a stream, independent of
  // how many values the parent produced.
  static SplitMix64 child(std::uint64_t seed, std::string_view name, std::uint64_t k) noexcept {
    return SplitMix64(splitmix64_mix(splitmix64_mix(seed ^ fnv1a64(name)) + k * kSplitMixGamma));
  }

  std::uint64_t next() noexcept {
    state_ += kSplitMixGamma;
    return splitmix64_mix(state_);
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) by rejection (no modulo bias).
  std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % bound;
  }

  // Box-Muller; both variates are used.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  std::uint64_t state() const noexcept { return state_; }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Fisher-Yates, walking from the back.
template <typename T>
void fisher_yates(std::span<T> items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

template <typename T>
void fisher_yates(std::vector<T>& items, SplitMix64& rng) {
  fisher_yates(std::span<T>(items), rng);
}

}  // namespace mmt
