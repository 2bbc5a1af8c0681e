#pragma once

// Seed derivation for independent RNG streams.
//
// Every random draw in the library comes from an engine seeded by
// derive_seed(base, domain, a, b). Distinct (domain, a, b) tuples give
// statistically independent streams, so generation can be split across
// threads without changing results.

#include <cstdint>
#include <random>

namespace pgnaa {

using Engine = std::mt19937_64;

enum class StreamDomain : std::uint64_t {
  Split = 1,
  TrainSample = 2,
  TestSample = 3,
  Reference = 4,
  CvaeInit = 5,
  CvaeShuffle = 6,
  CvaeNoise = 7,
  CvaeGenerate = 8,
  LongTerm = 9,
  Repeat = 10,
  Direct = 11,
};

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, StreamDomain domain, std::uint64_t a = 0,
                                    std::uint64_t b = 0) noexcept {
  std::uint64_t h = splitmix64(base);
  h = splitmix64(h ^ static_cast<std::uint64_t>(domain));
  h = splitmix64(h ^ a);
  return splitmix64(h ^ (b * 0xd1b54a32d192ed03ULL));
}

inline Engine make_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  return Engine(seq);
}

}  // namespace pgnaa
