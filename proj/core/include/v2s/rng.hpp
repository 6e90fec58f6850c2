#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace v2s {

// 64-bit FNV-1a over a byte string.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Deterministic sub-seed from a base seed and a role label. Every stochastic
// stage draws from its own labeled stream so reordering stages (or running
// folds in parallel) cannot change results.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
  std::uint64_t h = fnv1a64(label.data(), label.size());
  h ^= base + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label,
                                 std::uint64_t index) {
  std::uint64_t h = derive_seed(base, label);
  return splitmix64(h ^ (0x632be59bd9b4e019ull + index));
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace v2s
