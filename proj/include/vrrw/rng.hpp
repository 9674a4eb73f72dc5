#pragma once

#include <cstdint>

namespace vrrw {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Counter-based splittable stream: the k-th output is mix64(key + k * gamma),
/// so a stream is fully described by (key, counter) and child streams are
/// derived from the key alone, independent of thread scheduling.
class SplitStream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit SplitStream(std::uint64_t seed) : key_(mix64(seed)) {}

  /// Stream for replica `index` of a batch seeded with `seed`.
  static constexpr SplitStream split(std::uint64_t seed, std::uint64_t index) {
    SplitStream s(seed);
    s.key_ = mix64(s.key_ ^ mix64(index + kGoldenGamma));
    return s;
  }

  constexpr std::uint64_t operator()() {
    counter_ += 1;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~std::uint64_t{0}; }

  constexpr std::uint64_t key() const { return key_; }
  constexpr std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace vrrw
