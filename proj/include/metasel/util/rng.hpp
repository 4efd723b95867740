#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace metasel {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Independent seed streams: derive_seed(s, a, b, ...) is a pure function of
// its arguments, so work items can be seeded by index instead of sharing a
// generator.
constexpr std::uint64_t derive_seed(std::uint64_t seed) { return mix64(seed); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, Rest... rest) {
  return derive_seed(mix64(seed ^ mix64(stream + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

// Stable stream id for a name (FNV-1a), for seeding per task or per file.
constexpr std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename... Streams>
Rng make_rng(std::uint64_t seed, Streams... streams) {
  return Rng(derive_seed(seed, static_cast<std::uint64_t>(streams)...));
}

// Uniform integer in [0, n). Avoids std::uniform_int_distribution so that
// streams are identical across standard library implementations.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace metasel
