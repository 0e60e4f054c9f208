#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace medsel {

// splitmix64 finaliser; a stable 64-bit mixing function.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Child seed for (root, replication, stream). Stable across runs and
// platforms, and independent of how many workers process replications.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index,
                                    std::uint64_t stream = 0) {
  return mix64(mix64(mix64(root) ^ index) ^ (stream * 0xd6e8feb86659fd93ULL));
}

using Rng = std::mt19937_64;

// Unbiased draw from {0, ..., bound - 1} by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = Rng::max() - (Rng::max() % bound);
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % bound;
}

inline std::vector<std::size_t> random_permutation(std::size_t n,
                                                   std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    const auto j = static_cast<std::size_t>(uniform_index(rng, i));
    std::swap(perm[i - 1], perm[j]);
  }
  return perm;
}

}  // namespace medsel
