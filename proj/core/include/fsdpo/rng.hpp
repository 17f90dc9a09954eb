#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string_view>

namespace fsdpo {

// FNV-1a, used for stream names and config hashes.
constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Deterministic, platform-independent generator (xoshiro256++). The std
// distributions are implementation-defined, so all sampling goes through
// the explicit methods below; artifact reproducibility depends on it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64(sm);
  }

  std::uint64_t next_u64() noexcept {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Unbiased uniform in [0, n); n must be > 0.
  std::uint64_t uniform_below(std::uint64_t n) noexcept {
    const std::uint64_t threshold = (0ull - n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int uniform_int(int lo, int hi_exclusive) noexcept {
    return lo + static_cast<int>(uniform_below(static_cast<std::uint64_t>(hi_exclusive - lo)));
  }

  // Standard normal via Box-Muller.
  double normal() noexcept {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    const double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
  }

  // Index draw from an (approximately normalized) probability vector.
  // Falls back to the last positive entry if rounding pushes the cursor
  // past the cumulative sum.
  std::size_t categorical(std::span<const double> probs) noexcept {
    const double u = next_double();
    double cum = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] > 0.0) last_positive = i;
      cum += probs[i];
      if (u < cum) return i;
    }
    return last_positive;
  }

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = uniform_below(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  std::uint64_t state_[4];
};

// Named-stream seed derivation: every consumer of randomness draws from its
// own stream keyed by (master seed, stream name, index), so stages can be
// rerun or parallelized without perturbing each other.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view stream,
                                    std::uint64_t index = 0) noexcept {
  std::uint64_t s = master ^ (fnv1a64(stream) + 0x9e3779b97f4a7c15ull);
  std::uint64_t mixed = splitmix64(s);
  s ^= index + 0xbf58476d1ce4e5b9ull + (mixed << 6) + (mixed >> 2);
  return splitmix64(s);
}

}  // namespace fsdpo
