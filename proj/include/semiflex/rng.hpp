#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <random>

namespace semiflex {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

/// Hash of a (key, index) pair; used for counter-mode derivation of streams.
constexpr std::uint64_t hash_pair(std::uint64_t key, std::uint64_t index) noexcept {
  return mix64(mix64(key + kGolden) ^ (index * 0xd1342543de82ef95ULL + kGolden));
}

/// Caller-owned random stream (xoshiro256++ engine).
///
/// Streams are never shared between threads. Independent streams are obtained
/// with split(), which derives a child from the stream's key (not its current
/// state), so the i-th child is the same no matter how much the parent has
/// been used.
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0) noexcept : key_(seed) {
    std::uint64_t sm = seed;
    for (auto& w : s_) {
      sm += kGolden;
      w = mix64(sm);
    }
  }

  /// Stream keyed by (seed, index): random access without replaying a prefix.
  static RngStream keyed(std::uint64_t seed, std::uint64_t index) noexcept {
    return RngStream(hash_pair(seed, index));
  }

  RngStream split(std::uint64_t index) const noexcept { return keyed(key_, index); }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() { return normal_(*this); }

  std::uint64_t key() const noexcept { return key_; }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::uint64_t key_;
  std::array<std::uint64_t, 4> s_{};
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace semiflex
