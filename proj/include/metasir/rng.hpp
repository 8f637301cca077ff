#pragma once

// Counter-based seeding: realization i of a run with master seed s draws
// from mt19937_64 seeded with splitmix64(s + golden * (i + 1)), so streams
// do not depend on scheduling or worker count.

#include <cstdint>
#include <random>

namespace metasir {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

inline std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed + 0x9E3779B97F4A7C15ULL * (index + 1)));
}

}  // namespace metasir
