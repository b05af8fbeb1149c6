#pragma once

// Generators and independent oracles shared by the unit tests and the
// acceptance binary. Oracles here deliberately avoid the library's own helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "torsym/torsym.hpp"

namespace testsupport {

using torsym::Grid;
using torsym::Rng;
using torsym::ScalarField;

/// Field kinds cycled by `random_field`: smooth, white noise, heavy ties.
inline ScalarField random_field(const Grid& g, std::uint64_t seed) {
  switch (seed % 3) {
    case 0: return torsym::band_limited_field(g, seed, 4, 1.0);
    case 1: return torsym::white_noise_field(g, seed);
    default: return torsym::quantized_field(g, seed, 4);
  }
}

/// Multiset of `n` values drawn from `levels` distinct values (ties likely).
inline std::vector<double> random_multiset(Rng& rng, std::size_t n, int levels) {
  std::vector<double> v(n);
  for (double& x : v) x = static_cast<double>(rng.below(static_cast<std::uint64_t>(levels))) - 0.5 * levels;
  return v;
}

inline double cyclic_sq_diff(const std::vector<double>& v) {
  double acc = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double d = v[(j + 1) % v.size()] - v[j];
    acc += d * d;
  }
  return acc;
}

/// Minimum cyclic sum of squared differences over every arrangement.
inline double brute_min_cyclic(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double best = cyclic_sq_diff(v);
  while (std::next_permutation(v.begin(), v.end())) best = std::min(best, cyclic_sq_diff(v));
  return best;
}

/// Values of u along `axis` through the cell with flat index `start`, read by
/// explicit multi-index arithmetic.
inline std::vector<double> line_values(const ScalarField& u, int axis, std::size_t start) {
  const Grid& g = u.grid();
  torsym::MultiIndex idx = g.unflatten(start);
  std::vector<double> out;
  for (long j = 0; j < g.n(); ++j) {
    idx[static_cast<std::size_t>(axis)] = j;
    out.push_back(u.at(idx));
  }
  return out;
}

/// Per-line multisets along `axis` agree exactly.
inline bool lines_equimeasurable(const ScalarField& a, const ScalarField& b, int axis) {
  const Grid& g = a.grid();
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.unflatten(k)[static_cast<std::size_t>(axis)] != 0) continue;
    auto x = line_values(a, axis, k);
    auto y = line_values(b, axis, k);
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    if (x != y) return false;
  }
  return true;
}

inline bool same_sorted_values(const ScalarField& a, const ScalarField& b) {
  std::vector<double> x(a.values().begin(), a.values().end());
  std::vector<double> y(b.values().begin(), b.values().end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  return x == y;
}

/// Central-difference directional derivative of the energy.
inline double fd_directional(const ScalarField& u, const ScalarField& v, const torsym::ModelParams& p,
                             double eps) {
  ScalarField up = u, um = u;
  for (std::size_t k = 0; k < u.size(); ++k) {
    up[k] += eps * v[k];
    um[k] -= eps * v[k];
  }
  return (torsym::ch_energy(up, p) - torsym::ch_energy(um, p)) / (2.0 * eps);
}

/// Smoothed indicator of the disk of radius r centred at the origin.
inline ScalarField smoothed_disk(const Grid& g, double r) {
  const double w = 2.0 * g.h();
  return torsym::sample(g, [&](double x, double y) { return 0.5 * (1.0 + std::tanh((r - std::hypot(x, y)) / w)); });
}

}  // namespace testsupport
