#pragma once

#include <cstdint>
#include <random>

namespace pamacf {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent sub-streams from
// (seed, stream index) so parallel workers do not share generator state.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(mix_seed(seed, stream));
}

}  // namespace pamacf
