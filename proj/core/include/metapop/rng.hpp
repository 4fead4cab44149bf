#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>

namespace metapop {

// SplitMix64 finalizer. Full avalanche: every input bit affects every output
// bit with probability close to 1/2.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// Seed of replicate `index` under `master`. Depends only on the pair, never on
// scheduling, so parallel and sequential runs draw identical streams.
constexpr std::uint64_t derive_stream_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master ^ (kGoldenGamma * (index + 1)));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 12) + 0.5) * 0x1.0p-52; }

  bool bernoulli(double p) { return uniform() < p; }

  double exponential(double rate) { return -std::log(uniform_open()) / rate; }

  // Uniform on {0, ..., n-1}; n > 0.
  std::size_t index(std::size_t n) {
    // Lemire's nearly divisionless method.
    std::uint64_t x = engine_();
    __uint128_t m = static_cast<__uint128_t>(x) * n;
    auto low = static_cast<std::uint64_t>(m);
    if (low < n) {
      const std::uint64_t threshold = (0 - static_cast<std::uint64_t>(n)) % n;
      while (low < threshold) {
        x = engine_();
        m = static_cast<__uint128_t>(x) * n;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::size_t>(m >> 64);
  }

  double normal() { return normal_(engine_); }

  // Child stream; consumes one draw.
  Rng split() { return Rng(mix64(engine_())); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace metapop
