#pragma once

// Counterexample gallery: fields where symmetrization keeps the energy but the
// field is not a translate of its symmetrization, and a triangle whose iterated
// Steiner symmetrization depends on the axis order. All offsets are whole grid
// cells, so the energy identities hold to rounding.

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "torsym/energy.hpp"
#include "torsym/field.hpp"
#include "torsym/rearrange.hpp"

namespace torsym {

// Parameters used to evaluate gallery energies.
inline ModelParams gallery_params(double ell) { return ModelParams::from_phi_ell(2, 0.3, ell, 1.0); }

inline double smooth_bump(double r2, double R) {
  const double q = 1.0 - r2 / (R * R);
  return q > 0.0 ? q * q * q : 0.0;
}

struct TwoBumps {
  ScalarField u;
  double radius = 0.75;
  std::array<long, 2> centre_a{};  // cell offsets from the grid origin (x, y)
  std::array<long, 2> centre_b{};
  double delta = 0.0;              // L2 norm of one bump
};

/// Two copies of a y-symmetric bump with disjoint x-supports, centred at
/// (-1, -1) and (1, 0.75) on the 64 x 64 grid of [-2, 2)^2.
inline TwoBumps two_bumps() {
  const Grid g(2, 64, 2.0);
  const long c = g.n() / 2;  // index of coordinate 0
  const long per_unit = static_cast<long>(std::lround(1.0 / g.h()));
  TwoBumps out;
  out.centre_a = {-per_unit, -per_unit};
  out.centre_b = {per_unit, 3 * per_unit / 4};
  const double R = out.radius;
  out.u = ScalarField(g);
  ScalarField single(g);
  for (long i = 0; i < g.n(); ++i) {
    for (long j = 0; j < g.n(); ++j) {
      const std::size_t k = g.flatten({i, j, 0});
      for (const auto& ctr : {out.centre_a, out.centre_b}) {
        const double dx = static_cast<double>(i - c - ctr[0]) * g.h();
        const double dy = static_cast<double>(j - c - ctr[1]) * g.h();
        out.u[k] += smooth_bump(dx * dx + dy * dy, R);
      }
      const double x = static_cast<double>(i - c) * g.h();
      const double y = static_cast<double>(j - c) * g.h();
      single[k] = smooth_bump(x * x + y * y, R);
    }
  }
  out.delta = norm_l2(single);
  return out;
}

/// Plateau of height 1 on |y| <= 1 (smooth decay to 0 by |y| = 1.6) with a top
/// layer q(x) t(y - 1/2) resting entirely on the plateau.
inline ScalarField layer_cake() {
  const Grid g(2, 64, 2.0);
  return sample(g, [](double x, double y) {
    const double ay = std::abs(y);
    double base = 0.0;
    if (ay <= 1.0) {
      base = 1.0;
    } else if (ay < 1.6) {
      base = smooth_bump((ay - 1.0) * (ay - 1.0), 0.6);
    }
    const double s = y - 0.5;
    return base + smooth_bump(x * x, 1.2) * smooth_bump(s * s, 0.4);
  });
}

/// Closed triangle with vertices (-1,0), (0,0), (1,2) rasterized at cell centres
/// on [-2, 2)^2.
inline BinaryMask triangle_mask(int n = 64) {
  const Grid g(2, n, 2.0);
  struct V {
    double x;
    double y;
  };
  const std::array<V, 3> v{{{-1.0, 0.0}, {0.0, 0.0}, {1.0, 2.0}}};
  BinaryMask m(g);
  const auto edge = [](V a, V b, double x, double y) {
    return (b.x - a.x) * (y - a.y) - (b.y - a.y) * (x - a.x);
  };
  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      const double x = g.coord(i);
      const double y = g.coord(j);
      const double e0 = edge(v[0], v[1], x, y);
      const double e1 = edge(v[1], v[2], x, y);
      const double e2 = edge(v[2], v[0], x, y);
      const bool in = (e0 >= 0 && e1 >= 0 && e2 >= 0) || (e0 <= 0 && e1 <= 0 && e2 <= 0);
      m.cells[g.flatten({i, j, 0})] = in ? 1 : 0;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Analyses

struct EnergyComparison {
  double energy = 0.0;
  double energy_symmetrized = 0.0;
  double energy_gap = 0.0;  // |E(u) - E(u^s)|
  double aligned_distance = 0.0;
  std::vector<long> shift;
  bool hash_preserved = false;
};

inline EnergyComparison compare_with_symmetrization(const ScalarField& u, int axis) {
  const ModelParams p = gallery_params(u.grid().ell());
  const ScalarField us = steiner_axis(u, axis);
  EnergyComparison out;
  out.energy = ch_energy(u, p);
  out.energy_symmetrized = ch_energy(us, p);
  out.energy_gap = std::abs(out.energy - out.energy_symmetrized);
  const ShiftAlignment al = shift_align(u, us);
  out.aligned_distance = al.distance;
  out.shift = offsets_of(al);
  out.hash_preserved = sorted_values_hash(u) == sorted_values_hash(us);
  return out;
}

struct TwoBumpsReport {
  EnergyComparison comparison;
  double delta = 0.0;
  bool energy_equal = false;  // gap <= 1e-12 (relative to max(1, |E|))
  bool separated = false;     // aligned distance >= delta
  bool passed() const { return energy_equal && separated; }
};

inline TwoBumpsReport analyze_two_bumps(const TwoBumps& tb) {
  TwoBumpsReport r;
  r.comparison = compare_with_symmetrization(tb.u, 1);
  r.delta = tb.delta;
  r.energy_equal = r.comparison.energy_gap <= 1e-12 * std::max(1.0, std::abs(r.comparison.energy));
  r.separated = r.comparison.aligned_distance >= tb.delta;
  return r;
}

struct LayerCakeReport {
  EnergyComparison comparison;
  double max_singular_measure = 0.0;
  std::size_t columns_with_singular_mass = 0;
  std::size_t first_singular_column = 0;
  bool passed() const { return columns_with_singular_mass > 0; }
};

inline LayerCakeReport analyze_layer_cake(const ScalarField& u) {
  LayerCakeReport r;
  r.comparison = compare_with_symmetrization(u, 1);
  for (std::size_t c = 0; c < fiber_count(u.grid()); ++c) {
    const double m = critical_measure(u, c);
    if (m > 0.0) {
      if (r.columns_with_singular_mass == 0) r.first_singular_column = c;
      ++r.columns_with_singular_mass;
    }
    r.max_singular_measure = std::max(r.max_singular_measure, m);
  }
  return r;
}

struct TriangleReport {
  std::size_t cells = 0;
  std::size_t cells_xy = 0;  // symmetrize along x (axis 0) first, then y
  std::size_t cells_yx = 0;
  std::size_t difference_cells = 0;
  double difference_area = 0.0;
  BinaryMask xy;
  BinaryMask yx;
  bool passed() const { return cells == cells_xy && cells == cells_yx && difference_cells > 0; }
};

inline TriangleReport analyze_triangle(const BinaryMask& tri) {
  TriangleReport r;
  r.cells = tri.count();
  r.xy = set_steiner(set_steiner(tri, 0), 1);
  r.yx = set_steiner(set_steiner(tri, 1), 0);
  r.cells_xy = r.xy.count();
  r.cells_yx = r.yx.count();
  r.difference_cells = symmetric_difference_count(r.xy, r.yx);
  r.difference_area = static_cast<double>(r.difference_cells) * tri.grid.cell_measure();
  return r;
}

}  // namespace torsym
