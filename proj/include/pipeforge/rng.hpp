#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pipeforge {

using Rng = std::mt19937_64;

// Derives an independent stream seed from a master seed and a tag, so
// subsystems (dataset, distortion, rollout workers, ...) never share or
// reorder draws between each other.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view tag,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ master;
  for (char c : tag) {
    h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
    h *= 0x100000001b3ULL;
  }
  h ^= index + 0x632be59bd9b4e019ULL + (h << 6) + (h >> 2);
  // splitmix64 finalizer
  h ^= h >> 30;
  h *= 0xbf58476d1ce4e5b9ULL;
  h ^= h >> 27;
  h *= 0x94d049bb133111ebULL;
  h ^= h >> 31;
  return h;
}

inline Rng make_rng(std::uint64_t master, std::string_view tag,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(master, tag, index));
}

}  // namespace pipeforge
