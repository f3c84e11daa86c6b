#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace ppd {

// splitmix64 finalizer; used for seed derivation only.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Seeded random stream. All samplers in this project draw through this class
// rather than <random> distributions, whose algorithms are implementation
// defined; mt19937_64 itself is specified by the standard, so output is
// bit-identical across platforms and runs.
//
// split(k) derives an independent stream from (seed, k); callers are
// responsible for using distinct counters.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix64(seed)) {}

  RandomStream split(std::uint64_t stream) const {
    return RandomStream(mix64(seed_ ^ mix64(stream ^ 0xa5a5a5a5a5a5a5a5ULL)));
  }

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1); safe under log().
  double uniform_pos() {
    double u = uniform01();
    while (u <= 0.0) u = uniform01();
    return u;
  }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = next_u64();
    while (v >= bound) v = next_u64();
    return v % n;
  }

  // Inclusive range.
  long long uniform_int(long long lo, long long hi) {
    return lo + static_cast<long long>(below(static_cast<std::uint64_t>(hi - lo + 1)));
  }

  // Box-Muller; the sine branch is discarded to keep the stream stateless.
  double normal() {
    const double r = std::sqrt(-2.0 * std::log(uniform_pos()));
    const double t = 6.283185307179586476925286766559 * uniform01();
    return r * std::cos(t);
  }

  double exponential() { return -std::log(uniform_pos()); }

  // P(K = k) = (1 - q) q^k for k = 0, 1, ...; requires q in (0, 1).
  long long geometric(double q) {
    return static_cast<long long>(std::floor(std::log(uniform_pos()) / std::log(q)));
  }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace ppd
