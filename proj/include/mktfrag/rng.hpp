#pragma once

#include <cstdint>
#include <random>

namespace mktfrag {

using Rng = std::mt19937_64;

/// SplitMix64 finaliser; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the seed of an independent stream from a master seed and a tuple
/// of counters (round, chunk, market, replica...). The result depends only on
/// the arguments, never on thread scheduling.
template <typename... Counters>
constexpr std::uint64_t derive_seed(std::uint64_t master, Counters... counters) noexcept {
  std::uint64_t h = mix64(master);
  ((h = mix64(h ^ mix64(static_cast<std::uint64_t>(counters) + 0x632be59bd9b4e019ULL))), ...);
  return h;
}

template <typename... Counters>
inline Rng make_stream(std::uint64_t master, Counters... counters) {
  return Rng(derive_seed(master, counters...));
}

/// Uniform double in [0, 1) using the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace mktfrag
