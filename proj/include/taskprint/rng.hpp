#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace taskprint {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent, reproducible stream seed from a base seed and a
// salt. Every sampling/initialization site uses a distinct salt so that the
// streams never collide for the same base seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t state = seed + 0x632be59bd9b4e019ULL * (salt + 1);
  std::uint64_t a = splitmix64(state);
  return splitmix64(state) ^ a;
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace taskprint
