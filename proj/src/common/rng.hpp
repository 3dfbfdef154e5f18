#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace decor {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Derives a child seed from a master seed and a path of stream labels
// (round, env, purpose ...). Same inputs always give the same stream.
inline std::uint64_t derive_seed(std::uint64_t master,
                                 std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = splitmix64(master);
  for (std::uint64_t p : path) s = splitmix64(s ^ splitmix64(p + 0x632BE59BD9B4E019ULL));
  return s;
}

enum SeedPurpose : std::uint64_t {
  kSeedDemand = 1,
  kSeedSim = 2,
  kSeedWarmup = 3,
  kSeedPolicy = 4,
  kSeedAlpha = 5,
  kSeedDesign = 6,
  kSeedShuffle = 7,
  kSeedInit = 8,
  kSeedWindow = 9,
};

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace decor
