#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace uvmakeup {

/// Derives an independent stream seed from a base seed and a stream index, so
/// per-sample generators agree between serial and parallel runs.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  return Rng(derive_seed(seed, stream));
}

/// Uniform double in [lo, hi). Implemented directly on the engine output so the
/// value sequence does not depend on the standard library's distributions.
inline double uniform(Rng& rng, double lo = 0.0, double hi = 1.0) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

inline int uniform_int(Rng& rng, int lo, int hi_inclusive) {
  const auto span = static_cast<std::uint64_t>(hi_inclusive - lo + 1);
  return lo + static_cast<int>(rng() % span);
}

/// Standard normal via Box-Muller.
inline double normal(Rng& rng) {
  double u1 = uniform(rng);
  while (u1 <= 1e-300) u1 = uniform(rng);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace uvmakeup
