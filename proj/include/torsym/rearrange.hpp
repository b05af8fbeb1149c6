#pragma once

// Steiner symmetrization, two-point rearrangement (polarization), and the
// per-column distribution diagnostics built on top of them.
//
// Column conventions: a "column" is a 1D fiber along `axis` (default: the last
// axis, y). Columns are numbered row-major over the remaining axes. Within a
// column the symmetrization centre is the cell at coordinate 0, grid index n/2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "torsym/field.hpp"

namespace torsym {

struct BinaryMask {
  Grid grid;
  std::vector<std::uint8_t> cells;

  BinaryMask() = default;
  explicit BinaryMask(const Grid& g) : grid(g), cells(g.size(), 0) {}

  std::size_t count() const {
    std::size_t c = 0;
    for (auto v : cells) c += v ? 1 : 0;
    return c;
  }
  bool operator[](std::size_t k) const { return cells[k] != 0; }
  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.grid == b.grid && a.cells == b.cells;
  }
};

inline std::size_t symmetric_difference_count(const BinaryMask& a, const BinaryMask& b) {
  require_same_grid(a.grid, b.grid, "symmetric_difference_count");
  std::size_t c = 0;
  for (std::size_t k = 0; k < a.cells.size(); ++k) c += (a[k] != b[k]) ? 1 : 0;
  return c;
}

inline BinaryMask threshold(const ScalarField& u, double level) {
  BinaryMask m(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) m.cells[k] = u[k] > level ? 1 : 0;
  return m;
}

// ---------------------------------------------------------------------------
// Steiner symmetrization

/// Cyclic positions 0, +1, -1, +2, -2, ... (and n/2 last for even n), as indices in [0, n).
inline std::vector<std::size_t> placement_order(std::size_t n) {
  std::vector<std::size_t> order;
  order.reserve(n);
  if (n == 0) return order;
  order.push_back(0);
  for (std::size_t k = 1; order.size() < n; ++k) {
    order.push_back(k);
    if (order.size() < n) order.push_back(n - k);
  }
  return order;
}

/// Symmetric-decreasing cyclic arrangement of the same multiset, centred at index 0.
inline std::vector<double> steiner_column(std::span<const double> values) {
  std::vector<double> sorted(values.begin(), values.end());
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());
  const auto order = placement_order(sorted.size());
  std::vector<double> out(sorted.size());
  for (std::size_t r = 0; r < sorted.size(); ++r) out[order[r]] = sorted[r];
  return out;
}

/// Cyclic 1D energy sum_j (v_{j+1} - v_j)^2.
inline double cyclic_energy(std::span<const double> v) {
  CompensatedSum acc;
  for (std::size_t j = 0; j < v.size(); ++j) {
    const double d = v[(j + 1) % v.size()] - v[j];
    acc += d * d;
  }
  return acc.value();
}

namespace detail {

// Fiber values re-indexed so that position m holds grid index (n/2 + m) mod n.
inline std::vector<double> centred_fiber(const ScalarField& u, std::size_t base, std::size_t s) {
  const std::size_t n = static_cast<std::size_t>(u.grid().n());
  std::vector<double> out(n);
  for (std::size_t m = 0; m < n; ++m) out[m] = u[base + ((n / 2 + m) % n) * s];
  return out;
}

inline void scatter_centred(ScalarField& u, std::size_t base, std::size_t s,
                            std::span<const double> col) {
  const std::size_t n = col.size();
  for (std::size_t m = 0; m < n; ++m) u[base + ((n / 2 + m) % n) * s] = col[m];
}

}  // namespace detail

/// Steiner symmetrization with respect to {x_axis = 0}.
inline ScalarField steiner_axis(const ScalarField& u, int axis) {
  ScalarField out(u.grid());
  for_each_fiber(u.grid(), axis, [&](std::size_t base, std::size_t s) {
    const auto col = detail::centred_fiber(u, base, s);
    detail::scatter_centred(out, base, s, steiner_column(col));
  });
  return out;
}

/// Symmetrizes along axis d-1 first, then d-2, ..., then axis 0.
inline ScalarField iterated_steiner(const ScalarField& u) {
  ScalarField out = u;
  for (int a = u.grid().dim() - 1; a >= 0; --a) out = steiner_axis(out, a);
  return out;
}

/// Steiner symmetrization in an explicit axis order (first entry applied first).
inline ScalarField iterated_steiner(const ScalarField& u, std::span<const int> axis_order) {
  ScalarField out = u;
  for (int a : axis_order) out = steiner_axis(out, a);
  return out;
}

/// Per column, the k occupied cells move to the k positions nearest the centre.
inline BinaryMask set_steiner(const BinaryMask& mask, int axis) {
  const Grid& g = mask.grid;
  BinaryMask out(g);
  const std::size_t n = static_cast<std::size_t>(g.n());
  const auto order = placement_order(n);
  for_each_fiber(g, axis, [&](std::size_t base, std::size_t s) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < n; ++j) k += mask[base + j * s] ? 1 : 0;
    for (std::size_t r = 0; r < k; ++r) out.cells[base + ((n / 2 + order[r]) % n) * s] = 1;
  });
  return out;
}

/// True iff every column along `axis` is cyclically non-increasing away from the centre cell.
inline bool is_symmetric_decreasing(const ScalarField& u, int axis) {
  bool ok = true;
  const std::size_t n = static_cast<std::size_t>(u.grid().n());
  for_each_fiber(u.grid(), axis, [&](std::size_t base, std::size_t s) {
    const auto c = detail::centred_fiber(u, base, s);
    for (std::size_t m = 1; m <= n / 2; ++m) {
      if (c[m] > c[m - 1]) ok = false;
      if (c[(n - m) % n] > c[(n - m + 1) % n]) ok = false;
    }
  });
  return ok;
}

/// True iff each column's value multiset along `axis` agrees between u and v.
inline bool same_column_multisets(const ScalarField& u, const ScalarField& v, int axis) {
  require_same_grid(u.grid(), v.grid(), "same_column_multisets");
  bool ok = true;
  for_each_fiber(u.grid(), axis, [&](std::size_t base, std::size_t s) {
    auto a = gather_fiber(u, base, s);
    auto b = gather_fiber(v, base, s);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a != b) ok = false;
  });
  return ok;
}

// ---------------------------------------------------------------------------
// Two-point rearrangement

/// Which side of the reflection a cell lies on, in half-cell units of y - eta
/// reduced to [0, 2n): 0 or n means the cell is fixed by the reflection.
enum class PolarSide { kFixed, kUpper, kLower };

inline PolarSide polar_side(long j, long eta_index, long n) {
  long r = (2 * j - eta_index - n) % (2 * n);
  if (r < 0) r += 2 * n;
  if (r == 0 || r == n) return PolarSide::kFixed;
  return r < n ? PolarSide::kUpper : PolarSide::kLower;
}

/// T^eta u: max(u, u^eta) on the cyclic half [eta, eta + ell], min on [eta - ell, eta].
inline ScalarField polarize(const ScalarField& u, int axis, long eta_index) {
  const Grid& g = u.grid();
  const long n = g.n();
  ScalarField out(g);
  for_each_fiber(g, axis, [&](std::size_t base, std::size_t s) {
    for (long j = 0; j < n; ++j) {
      const double a = u[base + static_cast<std::size_t>(j) * s];
      const double b = u[base + static_cast<std::size_t>(g.wrap(eta_index - j)) * s];
      double v = a;
      switch (polar_side(j, eta_index, n)) {
        case PolarSide::kUpper: v = std::max(a, b); break;
        case PolarSide::kLower: v = std::min(a, b); break;
        case PolarSide::kFixed: break;
      }
      out[base + static_cast<std::size_t>(j) * s] = v;
    }
  });
  return out;
}

/// Cellwise test of u >= u^eta on the upper half (equivalent to u == T^eta u).
inline bool dominates_reflection(const ScalarField& u, int axis, long eta_index) {
  const Grid& g = u.grid();
  const long n = g.n();
  bool ok = true;
  for_each_fiber(g, axis, [&](std::size_t base, std::size_t s) {
    for (long j = 0; j < n; ++j) {
      if (polar_side(j, eta_index, n) != PolarSide::kUpper) continue;
      const double a = u[base + static_cast<std::size_t>(j) * s];
      const double b = u[base + static_cast<std::size_t>(g.wrap(eta_index - j)) * s];
      if (a < b) ok = false;
    }
  });
  return ok;
}

struct ShiftedIdentityReport {
  enum class Branch { kNone, kFixedByT, kReflectionFixedByT };
  Branch branch = Branch::kNone;
  bool precondition_holds = false;
  double discrepancy = 0.0;  // max |T^{eta+ell} u - expected|
};

/// If u = T^eta u, checks T^{eta+ell} u = u^eta; if u^eta = T^eta u, checks
/// T^{eta+ell} u = u. Shifting eta by ell is eta_index + n.
inline ShiftedIdentityReport polarize_shifted_identity_check(const ScalarField& u, int axis,
                                                             long eta_index) {
  ShiftedIdentityReport rep;
  const ScalarField t = polarize(u, axis, eta_index);
  const ScalarField ur = reflect(u, axis, eta_index);
  const ScalarField* expected = nullptr;
  if (t == u) {
    rep.branch = ShiftedIdentityReport::Branch::kFixedByT;
    expected = &ur;
  } else if (t == ur) {
    rep.branch = ShiftedIdentityReport::Branch::kReflectionFixedByT;
    expected = &u;
  } else {
    return rep;
  }
  rep.precondition_holds = true;
  const ScalarField shifted = polarize(u, axis, eta_index + u.grid().n());
  for (std::size_t k = 0; k < u.size(); ++k) {
    rep.discrepancy = std::max(rep.discrepancy, std::abs(shifted[k] - (*expected)[k]));
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Distribution function and level-crossing diagnostics

struct CriticalOptions {
  int axis = -1;               // column axis; -1 means the last axis
  double eps_factor = 1e-8;    // eps_crit = eps_factor * (column range) / h
};

struct DistributionSample {
  std::size_t column = 0;
  double level = 0.0;
  double mu = 0.0;
  double mu_reg = 0.0;
  double mu_sing = 0.0;
};

namespace detail {

inline int resolve_axis(const Grid& g, int axis) { return axis < 0 ? g.dim() - 1 : axis; }

struct Column {
  std::vector<double> v;
  double h = 0.0;
  double ell = 0.0;
  double lo = 0.0;
  double hi = 0.0;
};

inline Column load_column(const ScalarField& u, std::size_t column, int axis) {
  const Grid& g = u.grid();
  if (column >= fiber_count(g)) throw ConfigError("column index out of range");
  Column c;
  c.v = gather_fiber(u, fiber_base(g, axis, column), g.stride(axis));
  c.h = g.h();
  c.ell = g.ell();
  c.lo = *std::min_element(c.v.begin(), c.v.end());
  c.hi = *std::max_element(c.v.begin(), c.v.end());
  return c;
}

inline double eps_crit(const Column& c, double eps_factor) { return eps_factor * (c.hi - c.lo) / c.h; }

inline bool is_critical(const Column& c, std::size_t j, double eps) {
  const std::size_t n = c.v.size();
  const double dy = (c.v[(j + 1) % n] - c.v[(j + n - 1) % n]) / (2.0 * c.h);
  return std::abs(dy) < eps;
}

struct Crossing {
  std::size_t j = 0;      // crossing lies between samples j and j+1
  double theta = 0.0;     // fractional position in [0, 1]
  double slope = 0.0;     // secant slope (v[j+1] - v[j]) / h
};

inline std::vector<Crossing> crossings(const std::vector<double>& v, double t, double h) {
  std::vector<Crossing> out;
  const std::size_t n = v.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double a = v[j];
    const double b = v[(j + 1) % n];
    if ((a > t) == (b > t)) continue;
    Crossing c;
    c.j = j;
    c.theta = (t - a) / (b - a);
    c.slope = (b - a) / h;
    out.push_back(c);
  }
  return out;
}

}  // namespace detail

/// Length of {y : linear interpolant of the cyclic column exceeds t}. Continuous
/// and piecewise linear in t, unlike the counting measure.
inline double interpolated_superlevel_length(std::span<const double> v, double t, double h) {
  CompensatedSum acc;
  const std::size_t n = v.size();
  for (std::size_t j = 0; j < n; ++j) {
    const double a = v[j];
    const double b = v[(j + 1) % n];
    if (a > t && b > t) {
      acc += h;
    } else if (a > t || b > t) {
      acc += h * (std::max(a, b) - t) / std::abs(b - a);
    }
  }
  return acc.value();
}

/// Counting-measure distribution of one column at each level. Cells with
/// m < u < M whose centred y-slope is below eps_crit count toward mu_sing; the
/// rest of the superlevel set (including cells at the column maximum) is mu_reg.
inline std::vector<DistributionSample> distribution(const ScalarField& u, std::size_t column,
                                                    std::span<const double> levels,
                                                    const CriticalOptions& opt = {}) {
  const int axis = detail::resolve_axis(u.grid(), opt.axis);
  const auto c = detail::load_column(u, column, axis);
  const double eps = detail::eps_crit(c, opt.eps_factor);
  std::vector<DistributionSample> out;
  for (double t : levels) {
    DistributionSample s;
    s.column = column;
    s.level = t;
    std::size_t count = 0;
    std::size_t sing = 0;
    for (std::size_t j = 0; j < c.v.size(); ++j) {
      if (!(c.v[j] > t)) continue;
      ++count;
      if (c.v[j] < c.hi && detail::is_critical(c, j, eps)) ++sing;
    }
    s.mu = c.h * static_cast<double>(count);
    s.mu_sing = c.h * static_cast<double>(sing);
    s.mu_reg = s.mu - s.mu_sing;
    out.push_back(s);
  }
  return out;
}

/// Measure of critical cells strictly between the column min and max.
inline double critical_measure(const ScalarField& u, std::size_t column, const CriticalOptions& opt = {}) {
  const int axis = detail::resolve_axis(u.grid(), opt.axis);
  const auto c = detail::load_column(u, column, axis);
  const double eps = detail::eps_crit(c, opt.eps_factor);
  std::size_t sing = 0;
  for (std::size_t j = 0; j < c.v.size(); ++j) {
    if (c.v[j] > c.lo && c.v[j] < c.hi && detail::is_critical(c, j, eps)) ++sing;
  }
  return c.h * static_cast<double>(sing);
}

struct DerivativeCheck {
  double finite_difference = 0.0;
  double crossing_sum = 0.0;
  bool regular = true;
  std::size_t crossings = 0;
};

/// d/dt of the column's superlevel length two ways: central difference of the
/// interpolated length (step dt) and -sum over crossings of 1/|dy u|.
inline DerivativeCheck mu_t_derivative_check(const ScalarField& u, std::size_t column, double t,
                                             double dt, const CriticalOptions& opt = {}) {
  const int axis = detail::resolve_axis(u.grid(), opt.axis);
  const auto c = detail::load_column(u, column, axis);
  const double eps = detail::eps_crit(c, opt.eps_factor);
  DerivativeCheck out;
  const auto xs = detail::crossings(c.v, t, c.h);
  out.crossings = xs.size();
  CompensatedSum acc;
  for (const auto& x : xs) {
    if (std::abs(x.slope) < eps) out.regular = false;
    acc += -1.0 / std::abs(x.slope);
  }
  out.crossing_sum = acc.value();
  out.finite_difference = (interpolated_superlevel_length(c.v, t + dt, c.h) -
                           interpolated_superlevel_length(c.v, t - dt, c.h)) /
                          (2.0 * dt);
  return out;
}

/// d/dx_i of the column's superlevel length two ways: central difference across
/// neighbouring columns and sum over crossings of (d_i u)/|dy u|, with d_i u
/// linearly interpolated from centred differences at the bracketing samples.
inline DerivativeCheck mu_i_derivative_check(const ScalarField& u, std::size_t column, double t,
                                             int axis_i, const CriticalOptions& opt = {}) {
  const Grid& g = u.grid();
  const int axis = detail::resolve_axis(g, opt.axis);
  if (axis_i == axis || axis_i < 0 || axis_i >= g.dim()) {
    throw ConfigError("mu_i_derivative_check: axis_i must differ from the column axis");
  }
  const std::size_t base = fiber_base(g, axis, column);
  const std::size_t s = g.stride(axis);
  const auto c = detail::load_column(u, column, axis);
  const double eps = detail::eps_crit(c, opt.eps_factor);

  const auto plus = gather_fiber(u, g.neighbor(base, axis_i, 1), s);
  const auto minus = gather_fiber(u, g.neighbor(base, axis_i, -1), s);

  DerivativeCheck out;
  const auto xs = detail::crossings(c.v, t, c.h);
  out.crossings = xs.size();
  const std::size_t n = c.v.size();
  CompensatedSum acc;
  for (const auto& x : xs) {
    if (std::abs(x.slope) < eps) out.regular = false;
    const std::size_t j1 = (x.j + 1) % n;
    const double di0 = (plus[x.j] - minus[x.j]) / (2.0 * g.h());
    const double di1 = (plus[j1] - minus[j1]) / (2.0 * g.h());
    const double di = (1.0 - x.theta) * di0 + x.theta * di1;
    acc += di / std::abs(x.slope);
  }
  out.crossing_sum = acc.value();
  out.finite_difference = (interpolated_superlevel_length(plus, t, g.h()) -
                           interpolated_superlevel_length(minus, t, g.h())) /
                          (2.0 * g.h());
  return out;
}

struct BumpStructure {
  std::size_t column = 0;
  double level = 0.0;
  double y1 = 0.0;  // lower crossing
  double y2 = 0.0;  // upper crossing, y2 >= y1 (unwrapped)
  double b = 0.0;   // midpoint, wrapped into [-ell, ell)
  bool is_single_bump = false;
  bool empty = false;
  bool full = false;
  std::size_t runs = 0;
};

/// Cyclic superlevel set {y : u(column, y) > t}; single-bump iff it is one cyclic run.
inline BumpStructure bump_structure(const ScalarField& u, std::size_t column, double t,
                                    const CriticalOptions& opt = {}) {
  const int axis = detail::resolve_axis(u.grid(), opt.axis);
  const auto c = detail::load_column(u, column, axis);
  const std::size_t n = c.v.size();
  BumpStructure out;
  out.column = column;
  out.level = t;
  std::size_t inside = 0;
  for (double x : c.v) inside += x > t ? 1 : 0;
  if (inside == 0) {
    out.empty = true;
    return out;
  }
  if (inside == n) {
    out.full = true;
    out.runs = 1;
    return out;
  }
  std::optional<std::size_t> start;
  for (std::size_t j = 0; j < n; ++j) {
    const bool in = c.v[j] > t;
    const bool prev = c.v[(j + n - 1) % n] > t;
    if (in && !prev) {
      ++out.runs;
      if (!start) start = j;
    }
  }
  out.is_single_bump = out.runs == 1;
  if (!out.is_single_bump) return out;

  std::size_t last = *start;
  while (c.v[(last + 1) % n] > t) ++last;  // unwrapped index of the run's end
  const auto y_of = [&](double idx) { return -c.ell + idx * c.h; };
  const std::size_t before = (*start + n - 1) % n;
  const double a0 = c.v[before];
  const double b0 = c.v[*start];
  const double y1 = y_of(static_cast<double>(*start) - 1.0 + (t - a0) / (b0 - a0));
  const double a1 = c.v[last % n];
  const double b1 = c.v[(last + 1) % n];
  const double y2 = y_of(static_cast<double>(last) + (t - a1) / (b1 - a1));
  out.y1 = y1;
  out.y2 = y2;
  double mid = 0.5 * (y1 + y2);
  const double period = 2.0 * c.ell;
  mid = mid - period * std::floor((mid + c.ell) / period);
  out.b = mid;
  return out;
}

// ---------------------------------------------------------------------------
// CSV emitters

inline void write_distribution_csv(std::ostream& os, std::span<const DistributionSample> rows) {
  os << "column,t,mu,mu_reg,mu_sing\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.column << ',' << r.level << ',' << r.mu << ',' << r.mu_reg << ',' << r.mu_sing << '\n';
  }
}

inline void write_bump_csv(std::ostream& os, std::span<const BumpStructure> rows) {
  os << "column,t,y1,y2,b,single_bump\n";
  os.precision(17);
  for (const auto& r : rows) {
    os << r.column << ',' << r.level << ',' << r.y1 << ',' << r.y2 << ',' << r.b << ','
       << (r.is_single_bump ? 1 : 0) << '\n';
  }
}

}  // namespace torsym
