#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nearcrit {

// Generator: std::mt19937_64 seeded with splitmix64(seed ^ splitmix64(stream)).
// Distribution sampling uses the standard library distributions, so streams are
// reproducible for a fixed toolchain.
inline constexpr const char* kRngAlgorithm = "mt19937_64+splitmix64";

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

struct RngSpec {
  uint64_t seed = 0;
  uint64_t stream = 0;

  // Deterministic child stream; distinct k give distinct streams.
  RngSpec substream(uint64_t k) const { return {seed, splitmix64(stream * 0x100000001B3ULL + k + 1)}; }
};

class Rng {
 public:
  explicit Rng(const RngSpec& spec) : engine_(splitmix64(spec.seed ^ splitmix64(spec.stream))) {}

  uint64_t bits() { return engine_(); }

  // Uniform on the open interval (0,1) with 53-bit resolution.
  double uniform() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  bool bernoulli(double p) { return uniform() <= p; }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  uint64_t poisson(double mean) {
    if (!(mean > 0)) return 0;
    std::poisson_distribution<uint64_t> d(mean);
    return d(engine_);
  }

  uint64_t binomial(uint64_t n, double p) {
    if (n == 0 || p <= 0) return 0;
    if (p >= 1) return n;
    std::binomial_distribution<uint64_t> d(n, p);
    return d(engine_);
  }

  double normal() {
    std::normal_distribution<double> d;
    return d(engine_);
  }

  // Uniform integer in [0, n).
  uint64_t below(uint64_t n) {
    std::uniform_int_distribution<uint64_t> d(0, n - 1);
    return d(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nearcrit
