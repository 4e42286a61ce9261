#pragma once

#include <cstdint>
#include <random>

namespace nwos {

using Rng = std::mt19937_64;

// Purpose tags keep independent consumers on disjoint streams even when they
// share a master seed and an index.
enum class StreamKind : std::uint32_t {
  WalkShard = 1,
  InteriorSampler = 2,
  BoundarySampler = 3,
  NetInit = 4,
  TrainLoop = 5,
  Eval = 6,
  BufferInit = 7,
  Test = 8,
};

// Deterministic stream derivation from (seed, kind, index).  Every source of
// randomness in the library is seeded through here, so a run is reproducible
// bit-for-bit from the single master seed.
inline Rng make_stream(std::uint64_t seed, StreamKind kind, std::uint64_t index = 0) {
  std::seed_seq seq{
      static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
      static_cast<std::uint32_t>(kind),
      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

}  // namespace nwos
