#pragma once

#include <cstdint>
#include <random>

#include "kinreg/vec3.hpp"

namespace kinreg {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Generator for sample `index` of stream `stream`. Seeding per sample keeps
/// randomized checks reproducible regardless of how samples are split across workers.
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ splitmix64(stream)) + index));
}

inline double uniform(std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 gaussian_vec(std::mt19937_64& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  const double a = n(rng);
  const double b = n(rng);
  const double c = n(rng);
  return {a, b, c};
}

inline Vec3 unit_vec(std::mt19937_64& rng) {
  for (;;) {
    const Vec3 v = gaussian_vec(rng);
    const double r = norm(v);
    if (r > 1e-12) return v / r;
  }
}

}  // namespace kinreg
