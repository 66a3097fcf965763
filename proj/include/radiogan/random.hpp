#ifndef RADIOGAN_RANDOM_HPP_
#define RADIOGAN_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace radiogan {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ b);
}

// Distributions are constructed per draw so no hidden state lives outside the engine;
// a serialized engine therefore fully captures the stream position.
template <typename T>
T draw_normal(Rng& rng, T mean = T(0), T stddev = T(1)) {
  return std::normal_distribution<T>(mean, stddev)(rng);
}

template <typename T>
T draw_uniform(Rng& rng, T lo, T hi) {
  return std::uniform_real_distribution<T>(lo, hi)(rng);
}

inline int draw_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace radiogan

#endif  // RADIOGAN_RANDOM_HPP_
