#pragma once

// Periodic lattice on the flat torus [-ell, ell)^d and scalar fields on it.
//
// Cell i on an axis sits at coordinate -ell + i*h with h = 2*ell/n. Storage is
// row-major with the last axis (the "y" axis, d-1) contiguous. Every reduction
// goes through CompensatedSum in a fixed cell order so results do not depend on
// how a caller schedules work.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <functional>
#include <limits>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "torsym/error.hpp"

namespace torsym {

inline constexpr int kMaxDim = 3;

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

using MultiIndex = std::array<long, kMaxDim>;

class Grid {
 public:
  Grid() = default;

  /// Throws ConfigError unless 1 <= dim <= kMaxDim, n >= 4 even, ell > 0 finite.
  /// ell is snapped (by at most one ulp) so that h*n == 2*ell holds exactly.
  Grid(int dim, int n, double ell) : dim_(dim), n_(n) {
    if (dim < 1 || dim > kMaxDim) {
      throw ConfigError("grid dimension must be in [1, " + std::to_string(kMaxDim) +
                        "], got " + std::to_string(dim));
    }
    if (n < 4 || n % 2 != 0) {
      throw ConfigError("samples per axis must be even and >= 4, got " + std::to_string(n));
    }
    if (!(ell > 0.0) || !std::isfinite(ell)) {
      throw ConfigError("half period must be positive and finite");
    }
    h_ = 2.0 * ell / n;
    ell_ = 0.5 * (h_ * n);
    size_ = 1;
    for (int a = 0; a < dim; ++a) size_ *= static_cast<std::size_t>(n);
  }

  int dim() const { return dim_; }
  int n() const { return n_; }
  double ell() const { return ell_; }
  double h() const { return h_; }
  std::size_t size() const { return size_; }
  double period() const { return 2.0 * ell_; }
  double cell_measure() const { return std::pow(h_, dim_); }
  double total_measure() const { return std::pow(period(), dim_); }

  std::size_t stride(int axis) const {
    std::size_t s = 1;
    for (int a = axis + 1; a < dim_; ++a) s *= static_cast<std::size_t>(n_);
    return s;
  }

  long wrap(long i) const {
    const long r = i % n_;
    return r < 0 ? r + n_ : r;
  }

  double coord(long i) const { return -ell_ + static_cast<double>(wrap(i)) * h_; }

  MultiIndex unflatten(std::size_t flat) const {
    MultiIndex idx{};
    for (int a = dim_ - 1; a >= 0; --a) {
      idx[a] = static_cast<long>(flat % static_cast<std::size_t>(n_));
      flat /= static_cast<std::size_t>(n_);
    }
    return idx;
  }

  std::size_t flatten(const MultiIndex& idx) const {
    std::size_t flat = 0;
    for (int a = 0; a < dim_; ++a) {
      flat = flat * static_cast<std::size_t>(n_) + static_cast<std::size_t>(wrap(idx[a]));
    }
    return flat;
  }

  /// Flat index of the neighbour offset by `offset` cells along `axis`.
  std::size_t neighbor(std::size_t flat, int axis, long offset) const {
    const std::size_t s = stride(axis);
    const long i = static_cast<long>((flat / s) % static_cast<std::size_t>(n_));
    const long j = wrap(i + offset);
    return flat + static_cast<std::size_t>(j - i) * s;  // unsigned wrap is intended
  }

  friend bool operator==(const Grid& a, const Grid& b) {
    return a.dim_ == b.dim_ && a.n_ == b.n_ && a.ell_ == b.ell_;
  }

 private:
  int dim_ = 1;
  int n_ = 4;
  double ell_ = 1.0;
  double h_ = 0.5;
  std::size_t size_ = 4;
};

inline std::string describe(const Grid& g) {
  std::ostringstream os;
  os << "Grid(d=" << g.dim() << ", n=" << g.n() << ", ell=" << g.ell() << ")";
  return os.str();
}

inline void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (!(a == b)) {
    throw ConfigError(std::string(what) + ": grid mismatch " + describe(a) + " vs " + describe(b));
  }
}

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& grid, double fill = 0.0)
      : grid_(grid), values_(grid.size(), fill) {}
  ScalarField(const Grid& grid, std::vector<double> values)
      : grid_(grid), values_(std::move(values)) {
    if (values_.size() != grid_.size()) {
      throw ConfigError("field has " + std::to_string(values_.size()) + " values, " +
                        describe(grid_) + " needs " + std::to_string(grid_.size()));
    }
  }

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const std::vector<double>& data() const { return values_; }

  double operator[](std::size_t flat) const { return values_[flat]; }
  double& operator[](std::size_t flat) { return values_[flat]; }

  double at(const MultiIndex& idx) const { return values_[grid_.flatten(idx)]; }
  double at(long i) const { return values_[grid_.flatten({i, 0, 0})]; }
  double at(long i, long j) const { return values_[grid_.flatten({i, j, 0})]; }

  friend bool operator==(const ScalarField& a, const ScalarField& b) {
    return a.grid_ == b.grid_ && a.values_ == b.values_;
  }

 private:
  Grid grid_;
  std::vector<double> values_;
};

struct AxisShift {
  int axis = 0;
  long offset = 0;
  friend bool operator==(const AxisShift&, const AxisShift&) = default;
};

struct ShiftAlignment {
  std::vector<AxisShift> shifts;  // one per axis, offsets in [0, n)
  double distance = 0.0;          // discrete L2 distance at the optimum
};

/// Throws NumericalError naming the first non-finite cell.
inline void require_finite(const ScalarField& u, const std::string& context) {
  const auto v = u.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (!std::isfinite(v[k])) {
      const MultiIndex idx = u.grid().unflatten(k);
      std::ostringstream os;
      os << context << ": non-finite value at cell (";
      for (int a = 0; a < u.grid().dim(); ++a) os << (a ? "," : "") << idx[a];
      os << ")";
      throw NumericalError(os.str());
    }
  }
}

/// Calls fn(base, stride) once per 1D fiber along `axis`; base is the flat index
/// of the fiber's cell with coordinate index 0 on that axis.
template <class Fn>
void for_each_fiber(const Grid& g, int axis, Fn&& fn) {
  const std::size_t s = g.stride(axis);
  const std::size_t n = static_cast<std::size_t>(g.n());
  const std::size_t block = s * n;
  for (std::size_t outer = 0; outer < g.size(); outer += block) {
    for (std::size_t inner = 0; inner < s; ++inner) fn(outer + inner, s);
  }
}

/// Number of fibers along any axis, n^(d-1).
inline std::size_t fiber_count(const Grid& g) { return g.size() / static_cast<std::size_t>(g.n()); }

/// Base flat index of the fiber with ordinal `column` (row-major over the other axes).
inline std::size_t fiber_base(const Grid& g, int axis, std::size_t column) {
  const std::size_t s = g.stride(axis);
  const std::size_t n = static_cast<std::size_t>(g.n());
  return (column / s) * s * n + column % s;
}

inline std::vector<double> gather_fiber(const ScalarField& u, std::size_t base, std::size_t stride) {
  std::vector<double> out(static_cast<std::size_t>(u.grid().n()));
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = u[base + j * stride];
  return out;
}

/// Samples f at cell coordinates. f may take (x), (x, y), (x, y, z) matching the
/// grid dimension, or a std::span<const double> of coordinates.
template <class F>
ScalarField sample(const Grid& g, F&& f) {
  ScalarField u(g);
  std::array<double, kMaxDim> x{};
  for (std::size_t k = 0; k < g.size(); ++k) {
    const MultiIndex idx = g.unflatten(k);
    for (int a = 0; a < g.dim(); ++a) x[a] = g.coord(idx[a]);
    double v;
    if constexpr (std::invocable<F&, std::span<const double>>) {
      v = f(std::span<const double>(x.data(), static_cast<std::size_t>(g.dim())));
    } else if constexpr (std::invocable<F&, double, double, double>) {
      v = f(x[0], x[1], x[2]);
    } else if constexpr (std::invocable<F&, double, double>) {
      v = f(x[0], x[1]);
    } else {
      v = f(x[0]);
    }
    u[k] = v;
  }
  require_finite(u, "sample");
  return u;
}

/// Reflection y -> 2*eta - y along `axis`, eta = eta_index * h/2. On indices this
/// is j -> (eta_index - j) mod n.
inline ScalarField reflect(const ScalarField& u, int axis, long eta_index) {
  const Grid& g = u.grid();
  ScalarField out(g);
  const long n = g.n();
  for_each_fiber(g, axis, [&](std::size_t base, std::size_t s) {
    for (long j = 0; j < n; ++j) {
      out[base + static_cast<std::size_t>(j) * s] =
          u[base + static_cast<std::size_t>(g.wrap(eta_index - j)) * s];
    }
  });
  return out;
}

/// shift(u, s)(x) = u(x - s*h) for per-axis integer offsets s.
inline ScalarField shift(const ScalarField& u, std::span<const long> offsets) {
  const Grid& g = u.grid();
  ScalarField out(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    MultiIndex idx = g.unflatten(k);
    for (int a = 0; a < g.dim(); ++a) idx[a] -= offsets[static_cast<std::size_t>(a)];
    out[k] = u.at(idx);
  }
  return out;
}

inline ScalarField shift(const ScalarField& u, const AxisShift& s) {
  std::vector<long> offsets(static_cast<std::size_t>(u.grid().dim()), 0);
  offsets[static_cast<std::size_t>(s.axis)] = s.offset;
  return shift(u, offsets);
}

inline std::vector<long> offsets_of(const ShiftAlignment& a) {
  std::vector<long> out;
  for (const auto& s : a.shifts) out.push_back(s.offset);
  return out;
}

/// Exhaustive search over all n^d integer shifts for the one minimising
/// ||shift(u, s) - v||_2. Scans shifts in lexicographic order and keeps the
/// first strict minimum, so ties go to the lexicographically smallest shift.
inline ShiftAlignment shift_align(const ScalarField& u, const ScalarField& v) {
  const Grid& g = u.grid();
  require_same_grid(g, v.grid(), "shift_align");
  const int d = g.dim();
  const long n = g.n();
  const std::size_t total = g.size();
  const std::size_t row = static_cast<std::size_t>(n);
  const std::size_t rows = total / row;

  double best = std::numeric_limits<double>::infinity();
  MultiIndex best_shift{};
  std::vector<double> shifted_row(row);
  for (std::size_t sflat = 0; sflat < total; ++sflat) {
    const MultiIndex s = g.unflatten(sflat);
    double acc = 0.0;
    bool pruned = false;
    for (std::size_t r = 0; r < rows && !pruned; ++r) {
      // Row r of v covers cells (r-th row multi-index, j) for j in [0, n).
      MultiIndex src = g.unflatten(r * row);
      for (int a = 0; a < d - 1; ++a) src[a] -= s[a];
      const std::size_t src_base = g.flatten(src);  // last index is 0
      const long sy = s[d - 1];
      const double* urow = u.values().data() + src_base;
      const double* vrow = v.values().data() + r * row;
      for (long j = 0; j < n; ++j) {
        long jj = j - sy;
        if (jj < 0) jj += n;
        const double diff = urow[jj] - vrow[j];
        acc += diff * diff;
      }
      pruned = acc > best;
    }
    if (!pruned && acc < best) {
      best = acc;
      best_shift = s;
    }
  }
  ShiftAlignment out;
  for (int a = 0; a < d; ++a) out.shifts.push_back({a, best_shift[a]});
  out.distance = std::sqrt(best * g.cell_measure());
  return out;
}

inline double sum(const ScalarField& u) {
  CompensatedSum acc;
  for (double x : u.values()) acc += x;
  return acc.value();
}

/// h^d * sum(values) / (2 ell)^d.
inline double mean(const ScalarField& u) {
  return sum(u) * u.grid().cell_measure() / u.grid().total_measure();
}

/// Discrete L2 inner product h^d * sum(u v).
inline double inner(const ScalarField& u, const ScalarField& v) {
  require_same_grid(u.grid(), v.grid(), "inner");
  CompensatedSum acc;
  for (std::size_t k = 0; k < u.size(); ++k) acc += u[k] * v[k];
  return acc.value() * u.grid().cell_measure();
}

inline double norm_l2(const ScalarField& u) {
  CompensatedSum acc;
  for (double x : u.values()) acc += x * x;
  return std::sqrt(acc.value() * u.grid().cell_measure());
}

inline double norm_linf(const ScalarField& u) {
  double m = 0.0;
  for (double x : u.values()) m = std::max(m, std::abs(x));
  return m;
}

inline double distance_l2(const ScalarField& u, const ScalarField& v) {
  require_same_grid(u.grid(), v.grid(), "distance_l2");
  CompensatedSum acc;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double diff = u[k] - v[k];
    acc += diff * diff;
  }
  return std::sqrt(acc.value() * u.grid().cell_measure());
}

/// Visits every cell with the flat indices of its +1 and -1 neighbours along
/// `axis`, in storage order blocks (no per-cell division).
template <class Fn>
void for_each_axis_pair(const Grid& g, int axis, Fn&& fn) {
  const std::size_t s = g.stride(axis);
  const std::size_t n = static_cast<std::size_t>(g.n());
  const std::size_t block = s * n;
  for (std::size_t base = 0; base < g.size(); base += block) {
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t row = base + i * s;
      const std::size_t up = base + (i + 1 == n ? 0 : i + 1) * s;
      const std::size_t dn = base + (i == 0 ? n - 1 : i - 1) * s;
      for (std::size_t t = 0; t < s; ++t) fn(row + t, up + t, dn + t);
    }
  }
}

/// Periodic forward difference (u(x + h e_axis) - u(x)) / h.
inline ScalarField discrete_partial(const ScalarField& u, int axis) {
  const Grid& g = u.grid();
  ScalarField out(g);
  const double inv_h = 1.0 / g.h();
  for_each_axis_pair(g, axis, [&](std::size_t k, std::size_t kp, std::size_t) { out[k] = (u[kp] - u[k]) * inv_h; });
  return out;
}

/// Periodic centered difference (u(x + h e) - u(x - h e)) / 2h.
inline ScalarField centered_partial(const ScalarField& u, int axis) {
  const Grid& g = u.grid();
  ScalarField out(g);
  const double inv_2h = 0.5 / g.h();
  for_each_axis_pair(g, axis,
                     [&](std::size_t k, std::size_t kp, std::size_t km) { out[k] = (u[kp] - u[km]) * inv_2h; });
  return out;
}

/// Standard (2d+1)-point periodic Laplacian.
inline ScalarField laplacian(const ScalarField& u) {
  const Grid& g = u.grid();
  ScalarField out(g, 0.0);
  const double inv_h2 = 1.0 / (g.h() * g.h());
  const double* src = u.values().data();
  double* dst = out.values().data();
  for (int a = 0; a < g.dim(); ++a) {
    for_each_axis_pair(g, a, [&](std::size_t k, std::size_t kp, std::size_t km) {
      dst[k] += src[kp] + src[km] - 2.0 * src[k];
    });
  }
  for (std::size_t k = 0; k < g.size(); ++k) dst[k] *= inv_h2;
  return out;
}

/// Cellwise a*u + b*v.
inline ScalarField axpby(double a, const ScalarField& u, double b, const ScalarField& v) {
  require_same_grid(u.grid(), v.grid(), "axpby");
  ScalarField out(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = a * u[k] + b * v[k];
  return out;
}

template <class F>
ScalarField map_values(const ScalarField& u, F&& f) {
  ScalarField out(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = f(u[k]);
  return out;
}

inline std::vector<double> sorted_values(const ScalarField& u) {
  std::vector<double> v(u.values().begin(), u.values().end());
  std::sort(v.begin(), v.end());
  return v;
}

/// FNV-1a over the bit patterns of the sorted values; equal iff (almost surely)
/// the value multisets are equal.
inline std::uint64_t sorted_values_hash(const ScalarField& u) {
  std::uint64_t h = 1469598103934665603ULL;
  for (double x : sorted_values(u)) {
    if (x == 0.0) x = 0.0;  // fold -0 into +0
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(x));
    std::memcpy(&bits, &x, sizeof(bits));
    for (int b = 0; b < 8; ++b) {
      h ^= (bits >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace torsym
