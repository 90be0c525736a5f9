#pragma once

#include <cstdint>

namespace stochlyap {

// Stateless counter-based generator. Every draw is a pure function of
// (seed, stream, counter), so results do not depend on evaluation order or on
// how work is split across threads.
class CounterRng {
 public:
  constexpr CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(mix(mix(seed + kSeedSalt) ^ (stream * kStreamMul + kStreamSalt))) {}

  [[nodiscard]] constexpr std::uint64_t bits(std::uint64_t counter) const noexcept {
    return mix(key_ + (counter + 1) * kGolden);
  }

  /// Uniform draw in the open interval (0, 1), 52-bit resolution.
  [[nodiscard]] constexpr double uniform(std::uint64_t counter) const noexcept {
    return (static_cast<double>(bits(counter) >> 12) + 0.5) * 0x1.0p-52;
  }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  static constexpr std::uint64_t kSeedSalt = 0x632be59bd9b4e019ULL;
  static constexpr std::uint64_t kStreamMul = 0xd1b54a32d192ed03ULL;
  static constexpr std::uint64_t kStreamSalt = 0x8cb92ba72f3d8dd7ULL;

  // splitmix64 finalizer
  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
};

}  // namespace stochlyap
