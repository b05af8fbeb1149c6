#pragma once

// Seeded random fields for property tests and the verify suites. Uniform draws
// are built from raw mt19937_64 output so results do not depend on the
// standard library's distribution implementations.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "torsym/field.hpp"

namespace torsym {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) { return engine_() % bound; }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Independent uniform values in [lo, hi).
inline ScalarField white_noise_field(const Grid& g, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Rng rng(seed);
  ScalarField u(g);
  for (double& v : u.values()) v = rng.uniform(lo, hi);
  return u;
}

/// Sum of cosines over wave vectors with entries in [-K, K], amplitudes
/// decaying like 1/(1+|k|^2), random phases; scaled so |u| <= amplitude.
inline ScalarField band_limited_field(const Grid& g, std::uint64_t seed, int K = 4, double amplitude = 1.0) {
  Rng rng(seed);
  struct Mode {
    std::array<int, kMaxDim> k{};
    double a = 0.0;
    double phase = 0.0;
  };
  std::vector<Mode> modes;
  const int d = g.dim();
  const int span = 2 * K + 1;
  int total = 1;
  for (int a = 0; a < d; ++a) total *= span;
  double norm = 0.0;
  for (int m = 0; m < total; ++m) {
    Mode mode;
    int r = m;
    int k2 = 0;
    for (int a = 0; a < d; ++a) {
      mode.k[a] = r % span - K;
      r /= span;
      k2 += mode.k[a] * mode.k[a];
    }
    mode.a = rng.uniform(-1.0, 1.0) / (1.0 + k2);
    mode.phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    norm += std::abs(mode.a);
    modes.push_back(mode);
  }
  const double scale = amplitude / norm;
  ScalarField u(g);
  const double w = std::numbers::pi / g.ell();
  for (std::size_t flat = 0; flat < g.size(); ++flat) {
    const MultiIndex idx = g.unflatten(flat);
    double acc = 0.0;
    for (const Mode& mode : modes) {
      double arg = mode.phase;
      for (int a = 0; a < d; ++a) arg += w * mode.k[a] * g.coord(idx[a]);
      acc += mode.a * std::cos(arg);
    }
    u[flat] = scale * acc;
  }
  return u;
}

/// Values drawn from a small set so ties are frequent (stress test for
/// stable orderings).
inline ScalarField quantized_field(const Grid& g, std::uint64_t seed, int levels = 5) {
  Rng rng(seed);
  ScalarField u(g);
  for (double& v : u.values()) v = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) / levels;
  return u;
}

}  // namespace torsym
