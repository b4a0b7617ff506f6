#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dpwate {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Named substreams so any single stage of the pipeline can be replayed in
// isolation from one top-level seed.
enum class Stream : std::uint64_t {
  kPartition = 1,
  kFallback = 2,
  kNoiseTau = 3,
  kNoiseV = 4,
  kPosterior = 5,
  kCovariates = 6,
  kTreatment = 7,
  kOutcomes = 8,
  kGeneric = 9,
};

// A seeded random stream with hand-rolled uniform/normal transforms so draws
// are identical across standard libraries. Streams with distinct
// (seed, stream, index) triples are statistically independent.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, Stream stream = Stream::kGeneric,
                     std::uint64_t index = 0)
      : engine_(splitmix64(
            splitmix64(seed ^ static_cast<std::uint64_t>(stream) *
                                  0x9e3779b97f4a7c15ULL) ^
            splitmix64(index + 0x100000001b3ULL))) {}

  std::uint64_t next_u64() { return engine_(); }

  // U[0,1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // U(0,1), both endpoints excluded.
  double uniform_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; consumes exactly two uniforms.
  double normal() {
    constexpr double kTwoPi = 6.283185307179586476925286766559;
    double u1 = 1.0 - uniform();  // (0,1]
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
  }

  // Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    // Lemire-style rejection to avoid modulo bias.
    std::uint64_t threshold = (-bound) % bound;
    for (;;) {
      std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dpwate
