#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace tracklink {

// std::mt19937_64 output is pinned by the standard, but the standard
// distributions are not. These helpers keep seeded streams byte-stable
// across compilers and standard libraries.

inline double uniform_double(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
  return lo + u * (hi - lo);
}

inline std::uint64_t uniform_index(std::mt19937_64& rng, std::uint64_t n) {
  // Modulo bias is irrelevant for the small n used here.
  return n == 0 ? 0 : rng() % n;
}

inline double normal_double(std::mt19937_64& rng, double mean, double stddev) {
  // Box-Muller without state so that draw count stays predictable.
  double u1 = uniform_double(rng, 0.0, 1.0);
  const double u2 = uniform_double(rng, 0.0, 1.0);
  if (u1 < 1e-300) u1 = 1e-300;
  const double r = std::sqrt(-2.0 * std::log(u1));
  return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
}

inline bool bernoulli(std::mt19937_64& rng, double p) {
  return uniform_double(rng, 0.0, 1.0) < p;
}

}  // namespace tracklink
