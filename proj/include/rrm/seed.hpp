#pragma once

#include <cstdint>
#include <initializer_list>

namespace rrm {

// SplitMix64 finalizer; used to derive independent sub-streams from a seed.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t s = mix64(seed);
  for (std::uint64_t p : path) s = mix64(s ^ mix64(p + 0x632be59bd9b4e019ULL));
  return s;
}

// Stream tags for the seed hierarchy.
enum class Stream : std::uint64_t {
  kTopology = 1,
  kFading = 2,
  kInit = 3,
  kSampling = 4,
};

struct SeedSet {
  std::uint64_t topology = 0;
  std::uint64_t fading = 0;
  std::uint64_t init = 0;
  std::uint64_t sampling = 0;

  static SeedSet from_master(std::uint64_t master) {
    return {derive_seed(master, {static_cast<std::uint64_t>(Stream::kTopology)}),
            derive_seed(master, {static_cast<std::uint64_t>(Stream::kFading)}),
            derive_seed(master, {static_cast<std::uint64_t>(Stream::kInit)}),
            derive_seed(master, {static_cast<std::uint64_t>(Stream::kSampling)})};
  }
};

}  // namespace rrm
