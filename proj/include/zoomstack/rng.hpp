#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "zoomstack/image.hpp"

namespace zoomstack {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Output is a pure function of (key, counter), so any number of streams can
/// be evaluated in any order, or concurrently, with identical results.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;

  explicit Philox4x32(std::uint64_t key) noexcept
      : key_{static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)} {}

  Block operator()(Block ctr) const noexcept {
    std::array<std::uint32_t, 2> k = key_;
    for (int round = 0; round < 10; ++round) {
      ctr = single_round(ctr, k);
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kMul0 = 0xD2511F53u;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

  static Block single_round(const Block& c, const std::array<std::uint32_t, 2>& k) noexcept {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
  }

  std::array<std::uint32_t, 2> key_;
};

/// What a random draw is used for; part of the counter so streams never overlap.
enum class Purpose : std::uint32_t {
  kInitialLatent = 1,
  kStepNoise = 2,
  kTest = 99,
};

inline constexpr std::uint64_t kLevelSeedMix = 0x9E3779B97F4A7C15ull;

/// Seed of the stream owned by zoom level `level`. Level 0 keeps the run seed,
/// so a single-level run seeded with level_seed(s, i) replays level i of a
/// multi-level run seeded with s.
constexpr std::uint64_t level_seed(std::uint64_t run_seed, int level) noexcept {
  return run_seed ^ (static_cast<std::uint64_t>(level) * kLevelSeedMix);
}

/// Fills an image with i.i.d. N(0, 1) values keyed by (seed, step, purpose).
///
/// Pixel k of the image consumes counter block k / 2 (Box-Muller yields two
/// normals per block, each uniform built from 64 random bits).
inline void fill_standard_normal(Image& x, std::uint64_t seed, std::uint32_t step,
                                 Purpose purpose) {
  const Philox4x32 gen(seed);
  auto v = x.values();
  constexpr double kInv53 = 1.0 / 9007199254740992.0;  // 2^-53
  for (std::size_t k = 0; k < v.size(); k += 2) {
    const std::uint64_t block = k / 2;
    const auto out = gen({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                          step, static_cast<std::uint32_t>(purpose)});
    const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    const double u1 = ((a >> 11) + 0.5) * kInv53;  // (0, 1)
    const double u2 = (b >> 11) * kInv53;          // [0, 1)
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    v[k] = radius * std::cos(angle);
    if (k + 1 < v.size()) v[k + 1] = radius * std::sin(angle);
  }
}

/// Fills an image with i.i.d. uniform values on [lo, hi).
inline void fill_uniform(Image& x, std::uint64_t seed, std::uint32_t step, Purpose purpose, double lo = -1.0,
                         double hi = 1.0) {
  const Philox4x32 gen(seed);
  auto v = x.values();
  constexpr double kInv53 = 1.0 / 9007199254740992.0;
  for (std::size_t k = 0; k < v.size(); k += 2) {
    const std::uint64_t block = k / 2;
    const auto out = gen({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), step,
                          static_cast<std::uint32_t>(purpose) | 0x80000000u});
    const std::uint64_t a = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    const std::uint64_t b = (static_cast<std::uint64_t>(out[2]) << 32) | out[3];
    v[k] = lo + (hi - lo) * ((a >> 11) * kInv53);
    if (k + 1 < v.size()) v[k + 1] = lo + (hi - lo) * ((b >> 11) * kInv53);
  }
}

inline Image uniform_image(int h, int w, int c, std::uint64_t seed, std::uint32_t step = 0, double lo = -1.0,
                           double hi = 1.0) {
  Image x(h, w, c);
  fill_uniform(x, seed, step, Purpose::kTest, lo, hi);
  return x;
}

inline Image standard_normal(int h, int w, int c, std::uint64_t seed, std::uint32_t step,
                             Purpose purpose) {
  Image x(h, w, c);
  fill_standard_normal(x, seed, step, purpose);
  return x;
}

}  // namespace zoomstack
