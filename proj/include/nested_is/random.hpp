#ifndef NESTED_IS_RANDOM_HPP
#define NESTED_IS_RANDOM_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace nis {

/// SplitMix64 finalizer (Stafford variant 13). Full 64-bit avalanche.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed for replication `rep` of grid cell `cell`, sub-stream `stream`.
///
/// Each coordinate is offset by a distinct odd constant and folded through
/// mix64 in a fixed order, so the map is deterministic and platform
/// independent. Constants: golden-ratio gamma 0x9e3779b97f4a7c15 for the
/// master seed, then 0xd1b54a32d192ed03, 0xabc98388fb8fac03 and
/// 0x8cb92ba72f3d8dd7 for cell, rep and stream.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell,
                                    std::uint64_t rep, std::uint64_t stream) noexcept {
  std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ mix64(cell + 0xd1b54a32d192ed03ULL));
  h = mix64(h ^ mix64(rep + 0xabc98388fb8fac03ULL));
  h = mix64(h ^ mix64(stream + 0x8cb92ba72f3d8dd7ULL));
  return h;
}

/// xoshiro256** generator, seeded by expanding a 64-bit value with SplitMix64.
/// Satisfies UniformRandomBitGenerator; also provides uniform and standard
/// normal draws whose bit patterns do not depend on the standard library.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) noexcept { reseed(seed); }

  void reseed(std::uint64_t seed) noexcept {
    std::uint64_t s = seed;
    for (auto& word : state_) {
      s += 0x9e3779b97f4a7c15ULL;
      word = mix64(s);
    }
    has_spare_ = false;
  }

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on the open interval (0, 1).
  double uniform() noexcept {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal by the Box-Muller transform; the second variate of each
  /// pair is cached.
  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace nis

#endif  // NESTED_IS_RANDOM_HPP
