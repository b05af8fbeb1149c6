#pragma once

// Superlevel-set geometry for d = 2: component labelling, marching-squares
// contours, inner/outer radii, the Bonnesen inequality and sphericity tables.
//
// Contours are built from the bilinear interpolant of the field. Segments are
// oriented with the superlevel set on their left. Coordinates are "unwrapped":
// points of square (i, j) lie in [x_i, x_{i+1}] x [y_j, y_{j+1}] even when
// i + 1 == n, so callers translate by multiples of the period as needed.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "torsym/energy.hpp"
#include "torsym/field.hpp"
#include "torsym/rearrange.hpp"

namespace torsym {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

inline Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
inline Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
inline Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }

inline void require_2d(const Grid& g, const char* what) {
  if (g.dim() != 2) throw ConfigError(std::string(what) + " requires a 2D grid");
}

// ---------------------------------------------------------------------------
// Masks and components

struct ComponentLabels {
  std::vector<int> label;  // -1 outside the mask, otherwise component id
  int count = 0;
};

/// Periodic 4-connectivity labelling (union-find, ids in first-cell order).
inline ComponentLabels label_components(const BinaryMask& mask) {
  const Grid& g = mask.grid;
  std::vector<std::size_t> parent(g.size());
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  const auto find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!mask[k]) continue;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t nb = g.neighbor(k, a, 1);
      if (!mask[nb]) continue;
      const std::size_t ra = find(k);
      const std::size_t rb = find(nb);
      if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
    }
  }
  ComponentLabels out;
  out.label.assign(g.size(), -1);
  std::unordered_map<std::size_t, int> ids;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!mask[k]) continue;
    const std::size_t r = find(k);
    auto [it, inserted] = ids.try_emplace(r, out.count);
    if (inserted) ++out.count;
    out.label[k] = it->second;
  }
  return out;
}

struct SuperlevelMask {
  BinaryMask mask;
  int components = 0;
};

/// {u > level} with its periodic 4-connected component count.
inline SuperlevelMask superlevel_mask(const ScalarField& u, double level) {
  require_2d(u.grid(), "superlevel_mask");
  SuperlevelMask out;
  out.mask = threshold(u, level);
  out.components = label_components(out.mask).count;
  return out;
}

// ---------------------------------------------------------------------------
// Marching squares

struct ContourSegment {
  Point2 a;
  Point2 b;
  std::size_t edge_a = 0;  // lattice edge keys (2 * corner flat index + direction)
  std::size_t edge_b = 0;
};

/// Contour segments of {u > level}. Saddle squares are resolved by the
/// bilinear centre value (mean of the four corners).
inline std::vector<ContourSegment> contour_segments(const ScalarField& u, double level) {
  const Grid& g = u.grid();
  require_2d(g, "contour_segments");
  const long n = g.n();
  const double h = g.h();
  const double ell = g.ell();
  std::vector<ContourSegment> segs;

  for (long i = 0; i < n; ++i) {
    for (long j = 0; j < n; ++j) {
      // corners in counter-clockwise order: (i,j), (i+1,j), (i+1,j+1), (i,j+1)
      const std::array<long, 4> ci{i, i + 1, i + 1, i};
      const std::array<long, 4> cj{j, j, j + 1, j + 1};
      std::array<double, 4> v{};
      std::array<bool, 4> in{};
      std::array<Point2, 4> p{};
      int inside = 0;
      for (int c = 0; c < 4; ++c) {
        v[c] = u.at(ci[c], cj[c]);
        in[c] = v[c] > level;
        inside += in[c] ? 1 : 0;
        p[c] = {-ell + static_cast<double>(ci[c]) * h, -ell + static_cast<double>(cj[c]) * h};
      }
      if (inside == 0 || inside == 4) continue;

      // Edge e joins corner e and corner e+1. Keys: x-edges (dir 0) start at the
      // lower-left corner, y-edges (dir 1) likewise.
      const auto edge_key = [&](int e) -> std::size_t {
        long x0 = 0, y0 = 0, dir = 0;
        switch (e) {
          case 0: x0 = i; y0 = j; dir = 0; break;
          case 1: x0 = i + 1; y0 = j; dir = 1; break;
          case 2: x0 = i; y0 = j + 1; dir = 0; break;
          default: x0 = i; y0 = j; dir = 1; break;
        }
        return 2 * g.flatten({x0, y0, 0}) + static_cast<std::size_t>(dir);
      };
      const auto edge_point = [&](int e) {
        const int c0 = e;
        const int c1 = (e + 1) % 4;
        const double theta = (level - v[c0]) / (v[c1] - v[c0]);
        return p[c0] + theta * (p[c1] - p[c0]);
      };
      const auto crossed = [&](int e) { return in[e] != in[(e + 1) % 4]; };
      // Emits a segment between edges e0 and e1 oriented with `inside_ref` on the left.
      const auto emit = [&](int e0, int e1, Point2 ref, bool ref_inside) {
        ContourSegment s{edge_point(e0), edge_point(e1), edge_key(e0), edge_key(e1)};
        const double side = cross(s.b - s.a, ref - s.a);
        if ((side > 0.0) != ref_inside) {
          std::swap(s.a, s.b);
          std::swap(s.edge_a, s.edge_b);
        }
        segs.push_back(s);
      };

      if (inside == 2 && in[0] == in[2]) {
        // Saddle: corners alternate.
        const double centre = 0.25 * (v[0] + v[1] + v[2] + v[3]);
        const bool centre_in = centre > level;
        // Cut off each corner whose state differs from the centre. Corner c is
        // adjacent to edges c-1 and c.
        for (int c = 0; c < 4; ++c) {
          if (in[c] == centre_in) continue;
          emit((c + 3) % 4, c, p[c], in[c]);
        }
        continue;
      }
      std::array<int, 2> es{};
      int m = 0;
      for (int e = 0; e < 4; ++e) {
        if (crossed(e)) es[m++] = e;
      }
      Point2 ref{0.0, 0.0};
      int cnt = 0;
      for (int c = 0; c < 4; ++c) {
        if (in[c]) {
          ref = ref + p[c];
          ++cnt;
        }
      }
      emit(es[0], es[1], (1.0 / cnt) * ref, true);
    }
  }
  return segs;
}

inline double segments_length(std::span<const ContourSegment> segs) {
  CompensatedSum acc;
  for (const auto& s : segs) acc += norm(s.b - s.a);
  return acc.value();
}

/// Length of the marching-squares contour of {u > level}.
inline double perimeter(const ScalarField& u, double level) {
  return segments_length(contour_segments(u, level));
}

struct ContourLoop {
  std::vector<Point2> vertices;  // unwrapped, continuous; first vertex not repeated
  bool closed_in_plane = true;   // false when the loop winds around the torus
};

/// Chains segments into loops, translating each segment so consecutive
/// vertices coincide in the universal cover.
inline std::vector<ContourLoop> contour_loops(std::span<const ContourSegment> segs, double period) {
  std::unordered_map<std::size_t, std::size_t> by_start;
  for (std::size_t k = 0; k < segs.size(); ++k) by_start.emplace(segs[k].edge_a, k);
  std::vector<bool> used(segs.size(), false);
  std::vector<ContourLoop> loops;
  const auto wrap_delta = [&](double d) { return d - period * std::round(d / period); };
  for (std::size_t start = 0; start < segs.size(); ++start) {
    if (used[start]) continue;
    ContourLoop loop;
    std::size_t cur = start;
    Point2 offset{0.0, 0.0};
    Point2 first = segs[start].a;
    Point2 end{};
    while (!used[cur]) {
      used[cur] = true;
      const Point2 a = segs[cur].a + offset;
      loop.vertices.push_back(a);
      end = segs[cur].b + offset;
      auto it = by_start.find(segs[cur].edge_b);
      if (it == by_start.end()) break;
      const std::size_t next = it->second;
      const Point2 gap = end - segs[next].a;
      offset = {gap.x - wrap_delta(gap.x), gap.y - wrap_delta(gap.y)};
      cur = next;
    }
    loop.closed_in_plane = norm(end - first) < 1e-9 * period;
    loops.push_back(std::move(loop));
  }
  return loops;
}

/// Signed shoelace area of a closed loop (positive for counter-clockwise).
inline double signed_area(const ContourLoop& loop) {
  CompensatedSum acc;
  const auto& v = loop.vertices;
  for (std::size_t k = 0; k < v.size(); ++k) acc += cross(v[k], v[(k + 1) % v.size()]);
  return 0.5 * acc.value();
}

inline void write_contour_csv(std::ostream& os, std::span<const ContourLoop> loops) {
  os << "loop,vertex,x,y\n";
  os.precision(17);
  for (std::size_t l = 0; l < loops.size(); ++l) {
    for (std::size_t k = 0; k < loops[l].vertices.size(); ++k) {
      os << l << ',' << k << ',' << loops[l].vertices[k].x << ',' << loops[l].vertices[k].y << '\n';
    }
  }
}

// ---------------------------------------------------------------------------
// Distance transform and minimum enclosing circle

namespace detail {

// Squared 1D distance transform of f (lower envelope of parabolas).
inline void dt1d(const std::vector<double>& f, std::vector<double>& d) {
  const std::size_t n = f.size();
  std::vector<std::size_t> v(n);
  std::vector<double> z(n + 1);
  std::size_t k = 0;
  v[0] = 0;
  z[0] = -std::numeric_limits<double>::infinity();
  z[1] = std::numeric_limits<double>::infinity();
  for (std::size_t q = 1; q < n; ++q) {
    while (true) {
      const double qd = static_cast<double>(q);
      const double vd = static_cast<double>(v[k]);
      const double s = ((f[q] + qd * qd) - (f[v[k]] + vd * vd)) / (2.0 * (qd - vd));
      if (s <= z[k]) {
        if (k == 0) {
          v[0] = q;
          z[1] = std::numeric_limits<double>::infinity();
          break;
        }
        --k;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = std::numeric_limits<double>::infinity();
      break;
    }
  }
  d.assign(n, 0.0);
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    while (z[k + 1] < static_cast<double>(q)) ++k;
    const double diff = static_cast<double>(q) - static_cast<double>(v[k]);
    d[q] = diff * diff + f[v[k]];
  }
}

// Periodic version: evaluates on three copies and keeps the middle one.
inline std::vector<double> dt1d_periodic(const std::vector<double>& f) {
  const std::size_t n = f.size();
  std::vector<double> ext(3 * n);
  for (std::size_t k = 0; k < 3 * n; ++k) ext[k] = f[k % n];
  std::vector<double> d;
  dt1d(ext, d);
  return {d.begin() + static_cast<long>(n), d.begin() + static_cast<long>(2 * n)};
}

}  // namespace detail

/// Exact periodic Euclidean distance (in lengths) from each cell centre to the
/// nearest cell centre outside the mask; 0 outside the mask. Infinite if the
/// mask is full.
inline std::vector<double> distance_to_complement(const BinaryMask& mask) {
  const Grid& g = mask.grid;
  require_2d(g, "distance_to_complement");
  const std::size_t n = static_cast<std::size_t>(g.n());
  const double big = 1e20;
  std::vector<double> col_pass(g.size());
  std::vector<double> f(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) f[j] = mask[i * n + j] ? big : 0.0;
    const auto d = detail::dt1d_periodic(f);
    for (std::size_t j = 0; j < n; ++j) col_pass[i * n + j] = d[j];
  }
  std::vector<double> out(g.size());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) f[i] = col_pass[i * n + j];
    const auto d = detail::dt1d_periodic(f);
    for (std::size_t i = 0; i < n; ++i) {
      out[i * n + j] = d[i] >= big ? std::numeric_limits<double>::infinity() : std::sqrt(d[i]) * g.h();
    }
  }
  return out;
}

struct Circle {
  Point2 center;
  double radius = 0.0;
};

namespace detail {

inline Circle circle_two(Point2 a, Point2 b) {
  const Point2 c = 0.5 * (a + b);
  return {c, 0.5 * norm(b - a)};
}

inline Circle circle_three(Point2 a, Point2 b, Point2 c) {
  const Point2 ab = b - a;
  const Point2 ac = c - a;
  const double d = 2.0 * cross(ab, ac);
  if (std::abs(d) < 1e-300) {
    // Collinear: the farthest pair spans the circle.
    Circle best = circle_two(a, b);
    for (const Circle cand : {circle_two(a, c), circle_two(b, c)}) {
      if (cand.radius > best.radius) best = cand;
    }
    return best;
  }
  const double b2 = dot(ab, ab);
  const double c2 = dot(ac, ac);
  const Point2 off{(ac.y * b2 - ab.y * c2) / d, (ab.x * c2 - ac.x * b2) / d};
  return {a + off, norm(off)};
}

inline bool contains(const Circle& c, Point2 p) {
  return norm(p - c.center) <= c.radius * (1.0 + 1e-12) + 1e-14;
}

}  // namespace detail

/// Smallest circle enclosing all points (Welzl, iterative, deterministic shuffle).
inline Circle min_enclosing_circle(std::vector<Point2> pts) {
  if (pts.empty()) return {};
  std::mt19937_64 rng(0x5eed);
  std::shuffle(pts.begin(), pts.end(), rng);
  Circle c{pts[0], 0.0};
  for (std::size_t i = 1; i < pts.size(); ++i) {
    if (detail::contains(c, pts[i])) continue;
    c = {pts[i], 0.0};
    for (std::size_t j = 0; j < i; ++j) {
      if (detail::contains(c, pts[j])) continue;
      c = detail::circle_two(pts[i], pts[j]);
      for (std::size_t k = 0; k < j; ++k) {
        if (detail::contains(c, pts[k])) continue;
        c = detail::circle_three(pts[i], pts[j], pts[k]);
      }
    }
  }
  return c;
}

inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + t * ab));
}

/// Periodic bilinear interpolation at an arbitrary point.
inline double bilinear(const ScalarField& u, Point2 p) {
  const Grid& g = u.grid();
  const double sx = (p.x + g.ell()) / g.h();
  const double sy = (p.y + g.ell()) / g.h();
  const double fx = std::floor(sx);
  const double fy = std::floor(sy);
  const long i = static_cast<long>(fx);
  const long j = static_cast<long>(fy);
  const double tx = sx - fx;
  const double ty = sy - fy;
  return (1 - tx) * (1 - ty) * u.at(i, j) + tx * (1 - ty) * u.at(i + 1, j) +
         (1 - tx) * ty * u.at(i, j + 1) + tx * ty * u.at(i + 1, j + 1);
}

// ---------------------------------------------------------------------------
// Radii

struct Radii {
  double rho_in = 0.0;
  double rho_out = 0.0;
  bool contained_in_disk = false;
  Point2 centroid;
  Point2 inner_center;
  Circle outer;
};

/// Circular mean per axis of the mask's cell centres.
inline Point2 periodic_centroid(const BinaryMask& mask) {
  const Grid& g = mask.grid;
  const std::size_t n = static_cast<std::size_t>(g.n());
  CompensatedSum cx, sx, cy, sy;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!mask[k]) continue;
    const double ax = std::numbers::pi * g.coord(static_cast<long>(k / n)) / g.ell();
    const double ay = std::numbers::pi * g.coord(static_cast<long>(k % n)) / g.ell();
    cx += std::cos(ax);
    sx += std::sin(ax);
    cy += std::cos(ay);
    sy += std::sin(ay);
  }
  return {g.ell() * std::atan2(sx.value(), cx.value()) / std::numbers::pi,
          g.ell() * std::atan2(sy.value(), cy.value()) / std::numbers::pi};
}

namespace detail {

inline Point2 unwrap_about(Point2 p, Point2 c, double period) {
  const auto w = [&](double d) { return d - period * std::round(d / period); };
  return {c.x + w(p.x - c.x), c.y + w(p.y - c.y)};
}

}  // namespace detail

/// Inner and outer radii of {u > level}. rho_out is the minimum enclosing
/// circle of the contour vertices; rho_in maximises the distance to the contour
/// over interior points, seeded by the exact distance transform of the mask and
/// refined by a shrinking pattern search. Coordinates are unwrapped about the
/// periodic centroid; contained_in_disk is false when the set touches the
/// antipodal cut lines or its enclosing circle is not smaller than ell.
inline Radii radii(const ScalarField& u, double level) {
  const Grid& g = u.grid();
  require_2d(g, "radii");
  const BinaryMask mask = threshold(u, level);
  const std::size_t cnt = mask.count();
  if (cnt == 0 || cnt == g.size()) throw ConfigError("radii: superlevel set is empty or full");
  const double period = g.period();
  const double h = g.h();
  const std::size_t n = static_cast<std::size_t>(g.n());
  Radii out;
  out.centroid = periodic_centroid(mask);

  bool touches_cut = false;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!mask[k]) continue;
    const Point2 p{g.coord(static_cast<long>(k / n)), g.coord(static_cast<long>(k % n))};
    const Point2 q = detail::unwrap_about(p, out.centroid, period) - out.centroid;
    if (std::abs(q.x) > g.ell() - h || std::abs(q.y) > g.ell() - h) touches_cut = true;
  }

  auto segs = contour_segments(u, level);
  std::vector<Point2> verts;
  verts.reserve(2 * segs.size());
  for (auto& s : segs) {
    const Point2 mid = 0.5 * (s.a + s.b);
    const Point2 mw = detail::unwrap_about(mid, out.centroid, period);
    const Point2 t = mw - mid;
    s.a = s.a + t;
    s.b = s.b + t;
    verts.push_back(s.a);
    verts.push_back(s.b);
  }
  out.outer = min_enclosing_circle(verts);
  out.rho_out = out.outer.radius;
  out.contained_in_disk = !touches_cut && out.rho_out < g.ell();

  const auto dist_to_contour = [&](Point2 p) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& s : segs) best = std::min(best, point_segment_distance(p, s.a, s.b));
    return best;
  };
  // Search only within the unwrapped window; outside it the contour copy we
  // measure against is no longer the nearest one.
  const auto inside = [&](Point2 p) {
    const Point2 q = p - out.centroid;
    return std::abs(q.x) <= g.ell() && std::abs(q.y) <= g.ell() && bilinear(u, p) > level;
  };

  const auto edt = distance_to_complement(mask);
  std::vector<std::size_t> cells;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (mask[k]) cells.push_back(k);
  }
  std::stable_sort(cells.begin(), cells.end(), [&](std::size_t a, std::size_t b) { return edt[a] > edt[b]; });
  const double top = edt[cells.front()];
  std::size_t ncand = 0;
  while (ncand < cells.size() && ncand < 32 && edt[cells[ncand]] >= top - 1.5 * h) ++ncand;

  double best = 0.0;
  Point2 best_p = out.centroid;
  for (std::size_t c = 0; c < ncand; ++c) {
    const std::size_t k = cells[c];
    Point2 p = detail::unwrap_about({g.coord(static_cast<long>(k / n)), g.coord(static_cast<long>(k % n))},
                                    out.centroid, period);
    if (!inside(p)) continue;
    double f = dist_to_contour(p);
    double step = 0.5 * h;
    while (step > 1e-6 * h) {
      bool moved = false;
      for (const Point2 d : {Point2{step, 0}, Point2{-step, 0}, Point2{0, step}, Point2{0, -step},
                             Point2{step, step}, Point2{step, -step}, Point2{-step, step}, Point2{-step, -step}}) {
        const Point2 q = p + d;
        if (!inside(q)) continue;
        const double fq = dist_to_contour(q);
        if (fq > f) {
          f = fq;
          p = q;
          moved = true;
        }
      }
      if (!moved) step *= 0.5;
    }
    if (f > best) {
      best = f;
      best_p = p;
    }
  }
  out.rho_in = best;
  out.inner_center = best_p;
  return out;
}

// ---------------------------------------------------------------------------
// Level-set geometry, Bonnesen, sphericity

struct LevelSetGeometry {
  double level = 0.0;
  double area = 0.0;
  double perimeter = 0.0;
  double rho_in = 0.0;
  double rho_out = 0.0;
  double rho_vol = 0.0;
  double bonnesen_rhs = 0.0;
  bool contained_in_disk = false;
  int components = 0;
  bool empty = false;
  bool full = false;
  double h = 0.0;
};

inline double bonnesen_rhs(double area, double rho_out, double rho_in) {
  const double d = rho_out - rho_in;
  return std::sqrt(std::numbers::pi) * std::sqrt(4.0 * area + d * d);
}

/// Geometry of {u > level}. Area is the contour polygon's shoelace area when
/// every loop closes in the plane, otherwise the cell-counting measure.
inline LevelSetGeometry level_set_geometry(const ScalarField& u, double level) {
  const Grid& g = u.grid();
  require_2d(g, "level_set_geometry");
  LevelSetGeometry out;
  out.level = level;
  out.h = g.h();
  const SuperlevelMask sm = superlevel_mask(u, level);
  out.components = sm.components;
  const std::size_t cnt = sm.mask.count();
  if (cnt == 0) {
    out.empty = true;
    return out;
  }
  if (cnt == g.size()) {
    out.full = true;
    out.area = g.total_measure();
    return out;
  }
  const auto segs = contour_segments(u, level);
  out.perimeter = segments_length(segs);
  const auto loops = contour_loops(segs, g.period());
  bool planar = true;
  CompensatedSum area;
  for (const auto& l : loops) {
    planar = planar && l.closed_in_plane;
    area += signed_area(l);
  }
  out.area = planar ? area.value() : static_cast<double>(cnt) * g.cell_measure();
  const Radii r = radii(u, level);
  out.rho_in = r.rho_in;
  out.rho_out = r.rho_out;
  out.contained_in_disk = r.contained_in_disk;
  out.rho_vol = std::sqrt(out.area / std::numbers::pi);
  out.bonnesen_rhs = bonnesen_rhs(out.area, out.rho_out, out.rho_in);
  return out;
}

/// 4 h times the perimeter relative to the equal-area circle's circumference.
inline double bonnesen_tolerance(const LevelSetGeometry& geo) {
  const double circ = 2.0 * std::numbers::pi * geo.rho_vol;
  const double scale = circ > 0.0 ? geo.perimeter / circ : 1.0;
  return 4.0 * geo.h * scale;
}

struct BonnesenCheck {
  bool checked = false;
  bool holds = false;
  double slack = 0.0;
  double tolerance = 0.0;
  std::string reason;
};

inline BonnesenCheck bonnesen_check(const LevelSetGeometry& geo) {
  BonnesenCheck out;
  if (geo.empty) {
    out.reason = "empty superlevel set";
    return out;
  }
  if (geo.full) {
    out.reason = "full superlevel set";
    return out;
  }
  if (!geo.contained_in_disk) {
    out.reason = "set not contained in a disk";
    return out;
  }
  if (geo.components != 1) {
    out.reason = "set has " + std::to_string(geo.components) + " components";
    return out;
  }
  out.checked = true;
  out.slack = geo.perimeter - geo.bonnesen_rhs;
  out.tolerance = bonnesen_tolerance(geo);
  out.holds = out.slack >= -out.tolerance;
  return out;
}

struct RegimeConstants {
  double c0 = 0.0;
  double xi_tilde_2 = 0.0;
  double xi_2 = 0.0;
  double r_omega = 0.0;
  bool xi_in_range = false;  // xi in (xi_tilde_2, xi_2]
  double quadrature_error = 0.0;
};

struct XiThresholds {
  double c0 = 0.0;
  double xi_tilde_2 = 0.0;
  double xi_2 = 0.0;
  double quadrature_error = 0.0;
};

/// c0 = int_{-1}^{1} sqrt(2 G(s)) ds by adaptive Gauss-Kronrod, then the d = 2
/// thresholds of the critical regime.
inline XiThresholds xi_thresholds(const PotentialSpec& pot) {
  XiThresholds out;
  const auto integrand = [&](double s) { return std::sqrt(2.0 * std::max(pot.G(s), 0.0)); };
  double err = 0.0;
  out.c0 = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, -1.0, 1.0, 15, 1e-12,
                                                                          &err);
  out.quadrature_error = err;
  if (!(err <= 1e-10) || !std::isfinite(out.c0)) {
    throw NumericalError("regime constants: quadrature of c0 did not reach 1e-10");
  }
  out.xi_tilde_2 = 3.0 * std::cbrt(out.c0 * out.c0 * std::numbers::pi) / std::pow(2.0, 5.0 / 3.0);
  out.xi_2 = std::numbers::sqrt2 * out.xi_tilde_2;
  return out;
}

/// Midpoint of (xi_tilde_2, xi_2] for the given potential.
inline double mid_range_xi(const PotentialSpec& pot) {
  const XiThresholds t = xi_thresholds(pot);
  return 0.5 * (t.xi_tilde_2 + t.xi_2);
}

inline RegimeConstants regime_constants(const ModelParams& p) {
  const XiThresholds t = xi_thresholds(p.potential);
  RegimeConstants out;
  out.c0 = t.c0;
  out.xi_tilde_2 = t.xi_tilde_2;
  out.xi_2 = t.xi_2;
  out.quadrature_error = t.quadrature_error;
  out.r_omega = std::sqrt(p.omega / std::numbers::pi);
  out.xi_in_range = p.xi > out.xi_tilde_2 && p.xi <= out.xi_2;
  return out;
}

struct SphericityRow {
  LevelSetGeometry geometry;
  double outer_deviation = 0.0;  // rho_out - r_omega
  double inner_deviation = 0.0;  // r_omega - rho_in
  double delta_rho = 0.0;        // rho_out - rho_in
  double area_deviation = 0.0;   // area - omega
  BonnesenCheck bonnesen;
  bool included = false;         // false when not contained in a disk (or empty/full)
};

inline std::vector<SphericityRow> sphericity_report(const ScalarField& u, const ModelParams& p,
                                                    std::span<const double> levels) {
  const RegimeConstants rc = regime_constants(p);
  std::vector<SphericityRow> rows;
  for (double eta : levels) {
    SphericityRow r;
    r.geometry = level_set_geometry(u, eta);
    r.bonnesen = bonnesen_check(r.geometry);
    r.included = !r.geometry.empty && !r.geometry.full && r.geometry.contained_in_disk;
    if (r.included) {
      r.outer_deviation = r.geometry.rho_out - rc.r_omega;
      r.inner_deviation = rc.r_omega - r.geometry.rho_in;
      r.delta_rho = r.geometry.rho_out - r.geometry.rho_in;
      r.area_deviation = r.geometry.area - p.omega;
    }
    rows.push_back(r);
  }
  return rows;
}

inline void write_sphericity_csv(std::ostream& os, std::span<const SphericityRow> rows) {
  os << "eta,area,perimeter,rho_in,rho_out,rho_vol,delta_rho,bonnesen_slack\n";
  os.precision(17);
  for (const auto& r : rows) {
    const auto& g = r.geometry;
    os << g.level << ',' << g.area << ',' << g.perimeter << ',' << g.rho_in << ',' << g.rho_out << ','
       << g.rho_vol << ',' << r.delta_rho << ',' << r.bonnesen.slack << '\n';
  }
}

struct PerimeterDeficit {
  double value = 0.0;  // weighted integral of Per({u > t}) - P_E({u > t})
  double t_lo = 0.0;
  double t_hi = 0.0;
  std::size_t samples = 0;
  std::string weight = "sqrt(2 G(t)), G-tilde taken equal to G";
};

/// Trapezoid rule over t in (-1 + phi^(1/3), 1 - phi^(1/3)) of
/// sqrt(2 G(t)) (Per({u > t}) - 2 sqrt(pi |{u > t}|)). The interface weight of
/// the continuum statement is not available here; G stands in for it. Empty
/// and full sets contribute zero.
inline PerimeterDeficit perimeter_deficit_integral(const ScalarField& u, const ModelParams& p,
                                                   std::size_t samples = 64) {
  require_2d(u.grid(), "perimeter_deficit_integral");
  if (samples < 2) throw ConfigError("perimeter_deficit_integral: need at least 2 samples");
  PerimeterDeficit out;
  const double c = std::cbrt(p.phi);
  out.t_lo = -1.0 + c;
  out.t_hi = 1.0 - c;
  out.samples = samples;
  if (!(out.t_hi > out.t_lo)) return out;
  const Grid& g = u.grid();
  const double dt = (out.t_hi - out.t_lo) / static_cast<double>(samples - 1);
  CompensatedSum acc;
  for (std::size_t k = 0; k < samples; ++k) {
    const double t = out.t_lo + dt * static_cast<double>(k);
    const std::size_t cnt = threshold(u, t).count();
    if (cnt == 0 || cnt == g.size()) continue;
    const double area = static_cast<double>(cnt) * g.cell_measure();
    const double deficit = perimeter(u, t) - 2.0 * std::sqrt(std::numbers::pi * area);
    const double w = (k == 0 || k + 1 == samples) ? 0.5 : 1.0;
    acc += w * dt * std::sqrt(2.0 * std::max(p.potential.G(t), 0.0)) * deficit;
  }
  out.value = acc.value();
  return out;
}

/// Least-squares slope of log(y) against log(x) over positive pairs.
inline double fit_log_exponent(std::span<const double> x, std::span<const double> y) {
  CompensatedSum sx, sy, sxx, sxy;
  double m = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!(x[k] > 0.0) || !(y[k] > 0.0)) continue;
    const double lx = std::log(x[k]);
    const double ly = std::log(y[k]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
    m += 1.0;
  }
  if (m < 2.0) return std::numeric_limits<double>::quiet_NaN();
  const double den = m * sxx.value() - sx.value() * sx.value();
  return den != 0.0 ? (m * sxy.value() - sx.value() * sy.value()) / den
                    : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace torsym
