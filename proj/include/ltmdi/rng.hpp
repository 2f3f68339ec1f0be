#pragma once

#include <cstdint>
#include <random>

namespace ltmdi {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// independent engine per (seed, index, tag); order of evaluation never matters
inline std::mt19937_64 substream(std::uint64_t seed, std::uint64_t index, std::uint64_t tag) {
  std::uint64_t k = splitmix64(seed);
  k = splitmix64(k ^ splitmix64(index + 0x632be59bd9b4e019ULL));
  k = splitmix64(k ^ splitmix64(tag + 0x85157af5ULL));
  return std::mt19937_64(k);
}

namespace stream {
inline constexpr std::uint64_t counts = 1;
inline constexpr std::uint64_t angles = 2;
inline constexpr std::uint64_t states = 3;
}  // namespace stream

}  // namespace ltmdi
