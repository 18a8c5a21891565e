#ifndef LOWLIGHT_RANDOM_HPP
#define LOWLIGHT_RANDOM_HPP

// Seeded sampling with platform-independent output. The engine is
// std::mt19937_64, whose sequence is fixed by the standard; the variate
// transforms below are written out so results do not depend on the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace lowlight {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for an independent stream keyed by (seed, stream id).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  Rng(std::uint64_t seed, std::uint64_t stream) : engine_(derive_seed(seed, stream)) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r;
    do {
      r = engine_();
    } while (r >= limit);
    return r % n;
  }

  /// Standard normal via the Box-Muller transform; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  /// Poisson variate. Exact inverse-transform sampling up to kPoissonNormalCrossover,
  /// rounded normal approximation above it.
  // Returned as double: normal-approximation draws can exceed the integer range.
  double poisson(double mean);

  static constexpr double kPoissonNormalCrossover = 1e4;

 private:
  // Inverse transform by sequential search; valid while exp(-mean) is representable.
  std::uint64_t poisson_inversion(double mean) {
    const double u = uniform();
    double p = std::exp(-mean);
    double cdf = p;
    std::uint64_t k = 0;
    while (u >= cdf) {
      ++k;
      p *= mean / static_cast<double>(k);
      const double next = cdf + p;
      if (next == cdf) break;  // tail exhausted in double precision
      cdf = next;
    }
    return k;
  }

  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

inline double Rng::poisson(double mean) {
  if (!(mean > 0.0)) return 0.0;
  if (mean > kPoissonNormalCrossover) {
    const double v = std::round(mean + std::sqrt(mean) * normal());
    return v > 0.0 ? v : 0.0;
  }
  // A sum of independent Poisson variates is Poisson, so large means are split
  // into chunks small enough for the inversion's exp(-mean) start.
  constexpr double kChunk = 256.0;
  const auto chunks = static_cast<std::uint64_t>(std::ceil(mean / kChunk));
  const double part = mean / static_cast<double>(chunks);
  std::uint64_t total = 0;
  for (std::uint64_t c = 0; c < chunks; ++c) total += poisson_inversion(part);
  return static_cast<double>(total);
}

}  // namespace lowlight

#endif  // LOWLIGHT_RANDOM_HPP
