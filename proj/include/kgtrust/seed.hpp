#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace kgtrust {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for a (seed, purpose) pair.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  return splitmix64(seed ^ splitmix64(salt));
}

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Per-repeat seeds derived from a master seed.
inline std::vector<std::uint64_t> derive_seeds(std::uint64_t master, int count) {
  std::vector<std::uint64_t> seeds;
  seeds.reserve(static_cast<std::size_t>(count));
  std::uint64_t state = master;
  for (int i = 0; i < count; ++i) {
    state = splitmix64(state);
    seeds.push_back(state % 1000000007ULL);
  }
  return seeds;
}

}  // namespace kgtrust
