#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace fourphoton {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for stream `index` of a run seeded with `seed`.
constexpr std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

using Rng = std::mt19937_64;

// The samplers below are written out rather than taken from <random> so that
// the draws depend only on the engine output, not on the standard library.

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1].
inline double uniform01_open_low(Rng& rng) { return 1.0 - uniform01(rng); }

inline bool bernoulli(Rng& rng, double p) { return uniform01(rng) < p; }

/// Standard normal via Box-Muller (one draw per call, second value dropped).
inline double standard_normal(Rng& rng) {
  const double u1 = uniform01_open_low(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

/// Number of failures before the first success of a Bernoulli(q) process.
inline std::uint64_t geometric_failures(Rng& rng, double q) {
  if (q >= 1.0) return 0;
  const double u = uniform01_open_low(rng);
  const double k = std::floor(std::log(u) / std::log1p(-q));
  if (!(k < 1.8e19)) return UINT64_MAX;
  return static_cast<std::uint64_t>(k);
}

/// Exponential waiting time with the given mean.
inline double exponential(Rng& rng, double mean) {
  return -mean * std::log(uniform01_open_low(rng));
}

/// Poisson variate: multiplication method below mean 12, Hormann's
/// transformed rejection (PTRS) above.
inline std::uint64_t poisson(Rng& rng, double mean) {
  if (!(mean > 0.0)) return 0;
  if (mean < 12.0) {
    const double limit = std::exp(-mean);
    std::uint64_t k = 0;
    double prod = uniform01_open_low(rng);
    while (prod > limit) {
      ++k;
      prod *= uniform01_open_low(rng);
    }
    return k;
  }
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = uniform01(rng) - 0.5;
    const double v = uniform01(rng);
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b) <= -mean + k * loglam - std::lgamma(k + 1.0))
      return static_cast<std::uint64_t>(k);
  }
}

}  // namespace fourphoton
