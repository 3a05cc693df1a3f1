#pragma once

#include <cstdint>
#include <random>

namespace banppa {

using Rng = std::mt19937_64;

// splitmix64 finalizer. Used to spread user seeds and to derive independent
// per-unit streams (one per sequence, one per sample) from a single seed so
// that parallel generation stays reproducible.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(mix_seed(mix_seed(seed) ^ mix_seed(0x51ED2701A1B2C3D4ULL + stream)));
}

}  // namespace banppa
