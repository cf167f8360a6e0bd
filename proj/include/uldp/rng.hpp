#pragma once

#include <array>
#include <cmath>
#include <cstdint>

// Counter-based random number generation (Philox 4x32-10).
//
// Every draw is a pure function of (key, counter), so trajectories and
// samples can be generated in any order, on any number of threads, and
// always reproduce bit-identically. The noise stream of a trajectory is
// addressed as
//     counter = { draw_pair, step_index, traj_lo, traj_hi },  key = seed.

namespace uldp::rng {

namespace detail {

constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;
constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;

inline void mul_hilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo, std::uint32_t& hi) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  lo = static_cast<std::uint32_t>(p);
  hi = static_cast<std::uint32_t>(p >> 32);
}

}  // namespace detail

/// One 128-bit Philox 4x32 block, 10 rounds.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  using namespace detail;
  for (int round = 0; round < 10; ++round) {
    std::uint32_t lo0, hi0, lo1, hi1;
    mul_hilo(kMulA, ctr[0], lo0, hi0);
    mul_hilo(kMulB, ctr[2], lo1, hi1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeylA;
    key[1] += kWeylB;
  }
  return ctr;
}

/// SplitMix64; used to derive sub-seeds from the top-level seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed ^ splitmix64(stream));
}

struct NormalPair {
  double z0, z1;
};

/// Two independent N(0,1) variates addressed by (seed, traj, step, pair).
inline NormalPair normal_pair(std::uint64_t seed, std::uint64_t traj, std::uint32_t step,
                              std::uint32_t pair) {
  const auto out = philox4x32(
      {pair, step, static_cast<std::uint32_t>(traj), static_cast<std::uint32_t>(traj >> 32)},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const std::uint64_t a = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  const std::uint64_t b = (static_cast<std::uint64_t>(out[3]) << 32) | out[2];
  // u1 in (0,1] keeps the log finite; u2 in [0,1).
  const double u1 = static_cast<double>((a >> 11) + 1) * 0x1.0p-53;
  const double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * M_PI * u2;
  return {r * std::cos(phi), r * std::sin(phi)};
}

/// Uniform variate in [0,1) addressed by (seed, stream, index).
inline double uniform01(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  const auto out = philox4x32(
      {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  const std::uint64_t a = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
  return static_cast<double>(a >> 11) * 0x1.0p-53;
}

}  // namespace uldp::rng
