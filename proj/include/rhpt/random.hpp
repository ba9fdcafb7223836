#pragma once

// Seed derivation and engine construction. Every random stream in the
// library is an std::mt19937_64 whose seed is derived from a user seed
// with the splitmix64 finalizer, so substreams never share state and a
// run is a pure function of its top-level seed.

#include <cstdint>
#include <random>

namespace rhpt {

// splitmix64 finalizer (Steele, Lea, Flood 2014). Bijective on u64.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives the seed of substream `stream` of a parent seed. This is the
// single mixing function used everywhere: replication seeds, tessellation
// seeds, per-query draws of random matching.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(seed + 0x9e3779b97f4a7c15ULL * (stream + 1));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
  return std::mt19937_64(splitmix64(seed));
}

}  // namespace rhpt
