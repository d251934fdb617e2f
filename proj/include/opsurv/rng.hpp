#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace opsurv {

using Rng = std::mt19937_64;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(std::string_view key) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

/// Seed for the named substream `key` (and optional index) of a root seed.
/// Stages that draw from different keys never share random numbers, so any
/// stage can be re-run on its own and reproduce the same draws.
inline std::uint64_t substream_seed(std::uint64_t root, std::string_view key,
                                    std::uint64_t index = 0) {
  std::uint64_t s = detail::splitmix64(root);
  s = detail::splitmix64(s ^ detail::fnv1a(key));
  return detail::splitmix64(s ^ detail::splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng substream(std::uint64_t root, std::string_view key,
                     std::uint64_t index = 0) {
  return Rng(substream_seed(root, key, index));
}

}  // namespace opsurv
