#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace geosynth {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Keyed stream derivation: the seed of a child stream is a hash of the
/// parent seed and the keys, so (master, cluster, replicate) streams never
/// depend on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t base,
                                    std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = mix64(base);
  for (std::uint64_t k : keys) h = mix64(h ^ mix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

/// Uniform on [0, 1).
inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double gamma_draw(Rng& rng, double shape, double scale) {
  return std::gamma_distribution<double>(shape, scale)(rng);
}

double beta_draw(Rng& rng, double a, double b);

/// Fills `out` with one Dirichlet(alpha) draw. Sizes must agree.
void dirichlet_draw(Rng& rng, std::span<const double> alpha, std::span<double> out);

}  // namespace geosynth
