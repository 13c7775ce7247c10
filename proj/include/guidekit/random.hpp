#pragma once

// Deterministic hashing and pseudo-randomness shared by every stage.
//
// Hash:  FNV-1a, 64-bit (offset basis 0xcbf29ce484222325, prime 0x100000001b3).
// PRNG:  SplitMix64 (Steele, Lea, Flood 2014):
//          state += 0x9e3779b97f4a7c15
//          z = state
//          z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9
//          z = (z ^ (z >> 27)) * 0x94d049bb133111eb
//          return z ^ (z >> 31)
// Bounded draws use rejection sampling so results never depend on the
// standard library's distribution implementations.
// Shuffle: Fisher-Yates from the last index down, j = uniform_below(i + 1).

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>

namespace guidekit {

[[nodiscard]] std::uint64_t fnv1a64(std::string_view bytes) noexcept;

[[nodiscard]] std::string to_hex(std::uint64_t value);

/// Seed for a named stage: splitmix64 output of fnv1a64("<root>:<stage>").
[[nodiscard]] std::uint64_t derive_seed(std::uint64_t root,
                                        std::string_view stage) noexcept;

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state_;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t uniform_below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % bound;
    }
  }

 private:
  std::uint64_t state_;
};

template <typename T>
void deterministic_shuffle(std::span<T> values, std::uint64_t seed) {
  if (values.size() < 2) return;
  SplitMix64 rng(seed);
  for (std::size_t i = values.size() - 1; i > 0; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_below(i + 1));
    using std::swap;
    swap(values[i], values[j]);
  }
}

}  // namespace guidekit
