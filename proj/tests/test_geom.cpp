#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "support.hpp"
#include "torsym/torsym.hpp"

using namespace torsym;
namespace ts = testsupport;

namespace {

ScalarField rectangle(const Grid& g, double a, double b) {
  return sample(g, [&](double x, double y) { return std::min(a - std::abs(x), b - std::abs(y)); });
}

ScalarField band(const Grid& g) {
  return sample(g, [&](double x, double) { return std::cos(std::numbers::pi * x / g.ell()); });
}

BinaryMask random_mask(const Grid& g, std::uint64_t seed, double fill) {
  Rng rng(seed);
  BinaryMask m(g);
  for (auto& c : m.cells) c = rng.uniform() < fill ? 1 : 0;
  return m;
}

// Smallest circle through two or three of the points that contains them all.
double brute_enclosing_radius(const std::vector<Point2>& pts) {
  double best = std::numeric_limits<double>::infinity();
  const auto try_circle = [&](Point2 c, double r) {
    for (const Point2 p : pts) {
      if (std::hypot(p.x - c.x, p.y - c.y) > r * (1 + 1e-12)) return;
    }
    best = std::min(best, r);
  };
  const std::size_t m = pts.size();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const Point2 c{0.5 * (pts[i].x + pts[j].x), 0.5 * (pts[i].y + pts[j].y)};
      try_circle(c, 0.5 * std::hypot(pts[i].x - pts[j].x, pts[i].y - pts[j].y));
      for (std::size_t k = j + 1; k < m; ++k) {
        // Circumcentre by solving the perpendicular-bisector system.
        const double ax = pts[i].x, ay = pts[i].y, bx = pts[j].x, by = pts[j].y, cx = pts[k].x, cy = pts[k].y;
        const double d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
        if (std::abs(d) < 1e-14) continue;
        const double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
        const Point2 o{(a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d,
                       (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d};
        try_circle(o, std::hypot(ax - o.x, ay - o.y));
      }
    }
  }
  return best;
}

}  // namespace

TEST(Components, CountsOnTorus) {
  const Grid g(2, 32, 1.0);
  BinaryMask full(g);
  std::fill(full.cells.begin(), full.cells.end(), 1);
  EXPECT_EQ(label_components(full).count, 1);
  EXPECT_EQ(label_components(BinaryMask(g)).count, 0);
  const ScalarField two = sample(g, [](double x, double y) {
    return std::max(0.3 - std::hypot(x + 0.5, y), 0.3 - std::hypot(x - 0.5, y));
  });
  EXPECT_EQ(superlevel_mask(two, 0.0).components, 2);
  // A blob centred on the corner of the fundamental cell is one set on the torus.
  const ScalarField wrap = sample(g, [](double x, double y) {
    const double dx = 1.0 - std::abs(x), dy = 1.0 - std::abs(y);
    return 0.4 - std::hypot(dx, dy);
  });
  EXPECT_EQ(superlevel_mask(wrap, 0.0).components, 1);
  EXPECT_EQ(superlevel_mask(band(g), 0.0).components, 1);
}

TEST(Perimeter, DiskAndBand) {
  const Grid g(2, 256, 1.0);
  const double r = 0.5;
  EXPECT_NEAR(perimeter(ts::smoothed_disk(g, r), 0.5), 2 * std::numbers::pi * r, 0.015 * 2 * std::numbers::pi * r);
  // Two straight lines of length 2 ell.
  EXPECT_NEAR(perimeter(band(Grid(2, 64, 1.0)), 0.0), 4.0, 1e-9);
}

TEST(Perimeter, ShiftAndSwapInvariant) {
  const Grid g(2, 48, 1.0);
  for (std::uint64_t s = 0; s < 6; ++s) {
    const ScalarField u = band_limited_field(g, 700 + s, 3, 1.0);
    for (double t : {-0.3, 0.0, 0.4}) {
      const double P = perimeter(u, t);
      EXPECT_NEAR(perimeter(shift(u, std::vector<long>{13, 29}), t), P, 1e-10 * std::max(1.0, P));
      ScalarField sw(g);
      for (long i = 0; i < g.n(); ++i) {
        for (long j = 0; j < g.n(); ++j) sw[g.flatten({j, i, 0})] = u.at(i, j);
      }
      EXPECT_NEAR(perimeter(sw, t), P, 1e-10 * std::max(1.0, P));
    }
  }
}

TEST(Contours, LoopsCloseAndEncloseArea) {
  const Grid g(2, 128, 1.0);
  const double r = 0.4;
  const ScalarField u = ts::smoothed_disk(g, r);
  const auto loops = contour_loops(contour_segments(u, 0.5), g.period());
  ASSERT_EQ(loops.size(), 1u);
  EXPECT_TRUE(loops[0].closed_in_plane);
  // Superlevel set on the left: counter-clockwise, positive area.
  EXPECT_NEAR(signed_area(loops[0]), std::numbers::pi * r * r, 0.01 * std::numbers::pi * r * r);
  const auto bl = contour_loops(contour_segments(band(g), 0.0), g.period());
  for (const auto& l : bl) EXPECT_FALSE(l.closed_in_plane);
}

TEST(Radii, DiskAndRectangle) {
  const Grid g(2, 128, 1.0);
  const double r = 0.45;
  const Radii d = radii(ts::smoothed_disk(g, r), 0.5);
  EXPECT_NEAR(d.rho_in, r, g.h());
  EXPECT_NEAR(d.rho_out, r, g.h());
  EXPECT_TRUE(d.contained_in_disk);
  const Radii rr = radii(rectangle(g, 0.6, 0.3), 0.0);
  EXPECT_NEAR(rr.rho_in, 0.3, g.h());
  EXPECT_NEAR(rr.rho_out, std::hypot(0.6, 0.3), g.h());
  EXPECT_TRUE(rr.contained_in_disk);
  EXPECT_FALSE(radii(band(g), 0.0).contained_in_disk);
  EXPECT_THROW(radii(ScalarField(g, -1.0), 0.0), ConfigError);
}

TEST(Bonnesen, RightHandSideLiteral) {
  // Rectangle 1.2 x 0.6: area 0.72, rho_out sqrt(0.45), rho_in 0.3.
  EXPECT_NEAR(bonnesen_rhs(0.72, std::sqrt(0.45), 0.3), 3.078925173447669, 1e-14);
}

TEST(Bonnesen, DiskIsNearEqualityRectangleHasSlack) {
  const Grid g(2, 128, 1.0);
  const LevelSetGeometry disk = level_set_geometry(ts::smoothed_disk(g, 0.45), 0.5);
  const BonnesenCheck bd = bonnesen_check(disk);
  ASSERT_TRUE(bd.checked);
  EXPECT_TRUE(bd.holds);
  EXPECT_LT(std::abs(bd.slack), bd.tolerance);
  const LevelSetGeometry rect = level_set_geometry(rectangle(g, 0.6, 0.3), 0.0);
  EXPECT_NEAR(rect.area, 0.72, 4 * g.h() * 3.6);
  EXPECT_NEAR(rect.perimeter, 3.6, 4 * g.h());
  const BonnesenCheck br = bonnesen_check(rect);
  ASSERT_TRUE(br.checked);
  EXPECT_TRUE(br.holds);
  EXPECT_NEAR(br.slack, 3.6 - 3.078925173447669, 8 * g.h());
}

TEST(Bonnesen, SkipsWithReason) {
  const Grid g(2, 32, 1.0);
  EXPECT_FALSE(bonnesen_check(level_set_geometry(ScalarField(g, -1.0), 0.0)).checked);
  EXPECT_FALSE(bonnesen_check(level_set_geometry(ScalarField(g, 1.0), 0.0)).checked);
  const BonnesenCheck b = bonnesen_check(level_set_geometry(band(g), 0.0));
  EXPECT_FALSE(b.checked);
  EXPECT_EQ(b.reason, "set not contained in a disk");
}

TEST(Regime, Constants) {
  const ModelParams p = ModelParams::from_phi_ell(2, 0.3, 1.85838, 1.0);
  const RegimeConstants rc = regime_constants(p);
  // int_{-1}^{1} (1 - s^2) / sqrt(2) ds
  EXPECT_NEAR(rc.c0, 2.0 * std::numbers::sqrt2 / 3.0, 1e-12);
  const double xt = 3.0 * std::pow(8.0 / 9.0 * std::numbers::pi, 1.0 / 3.0) / std::pow(2.0, 5.0 / 3.0);
  EXPECT_NEAR(rc.xi_tilde_2, xt, 1e-12);
  EXPECT_NEAR(rc.xi_tilde_2, 1.33067, 1e-5);
  EXPECT_NEAR(rc.xi_2 / rc.xi_tilde_2, std::numbers::sqrt2, 1e-14);
  EXPECT_NEAR(mid_range_xi(p.potential), 0.5 * (1 + std::numbers::sqrt2) * xt, 1e-12);
  EXPECT_NEAR(rc.r_omega, std::sqrt(1.0 / std::numbers::pi), 1e-15);
  const double mid = mid_range_xi(p.potential);
  EXPECT_TRUE(regime_constants(ModelParams::from_phi_xi(2, 0.3, mid, 1.0)).xi_in_range);
  EXPECT_FALSE(regime_constants(ModelParams::from_phi_xi(2, 0.3, 1.0, 1.0)).xi_in_range);
}

TEST(Sphericity, SyntheticDisk) {
  const Grid g(2, 128, 1.0);
  const double r = 0.5;
  // tanh profile: every superlevel set in (-1, 1) is a disk of radius near r.
  const ScalarField u = sample(g, [&](double x, double y) { return std::tanh((r - std::hypot(x, y)) / 0.1); });
  const ModelParams p = ModelParams::from_phi_ell(2, 0.3, 1.0, std::numbers::pi * r * r);
  const std::vector<double> levels{-0.5, 0.0, 0.5, 2.0};
  const auto rows = sphericity_report(u, p, levels);
  ASSERT_EQ(rows.size(), 4u);
  for (std::size_t k = 0; k < 3; ++k) {
    const auto& row = rows[k];
    EXPECT_TRUE(row.included);
    EXPECT_LE(row.geometry.rho_in, row.geometry.rho_vol + 1e-12);
    EXPECT_LE(row.geometry.rho_vol, row.geometry.rho_out + 1e-12);
    EXPECT_LE(row.delta_rho, 2 * g.h());
    EXPECT_TRUE(row.bonnesen.holds);
  }
  EXPECT_LE(std::abs(rows[1].outer_deviation), 2 * g.h());
  EXPECT_LE(std::abs(rows[1].inner_deviation), 2 * g.h());
  EXPECT_FALSE(rows[3].included);
  EXPECT_TRUE(rows[3].geometry.empty);
  // Superlevel sets shrink as the level rises.
  EXPECT_GT(rows[0].geometry.area, rows[1].geometry.area);
  EXPECT_GT(rows[1].geometry.area, rows[2].geometry.area);
  const BinaryMask lo = threshold(u, -0.5), hi = threshold(u, 0.5);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (hi[k]) {
      ASSERT_TRUE(lo[k]);
    }
  }
}

TEST(EnclosingCircle, MatchesBruteForce) {
  Rng rng(31);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t m = 1 + rng.below(12);
    std::vector<Point2> pts;
    for (std::size_t k = 0; k < m; ++k) pts.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    const Circle c = min_enclosing_circle(pts);
    const double brute = m == 1 ? 0.0 : brute_enclosing_radius(pts);
    EXPECT_NEAR(c.radius, brute, 1e-9) << "rep " << rep;
    for (const Point2 p : pts) EXPECT_LE(std::hypot(p.x - c.center.x, p.y - c.center.y), c.radius * (1 + 1e-9) + 1e-12);
  }
}

TEST(DistanceTransform, MatchesBruteForce) {
  const Grid g(2, 16, 1.0);
  const long n = g.n();
  for (std::uint64_t s = 0; s < 8; ++s) {
    const BinaryMask m = random_mask(g, s, s % 2 ? 0.9 : 0.6);
    const auto d = distance_to_complement(m);
    for (long i = 0; i < n; ++i) {
      for (long j = 0; j < n; ++j) {
        double best = std::numeric_limits<double>::infinity();
        for (long a = 0; a < n; ++a) {
          for (long b = 0; b < n; ++b) {
            if (m[static_cast<std::size_t>(a * n + b)]) continue;
            const long di = std::min(std::abs(a - i), n - std::abs(a - i));
            const long dj = std::min(std::abs(b - j), n - std::abs(b - j));
            best = std::min(best, std::sqrt(static_cast<double>(di * di + dj * dj)) * g.h());
          }
        }
        EXPECT_NEAR(d[static_cast<std::size_t>(i * n + j)], best, 1e-12);
      }
    }
  }
}

TEST(PerimeterDeficit, SmallForDisksLargerForEllipses) {
  const Grid g(2, 128, 1.0);
  const ModelParams p = ModelParams::from_phi_ell(2, 0.3, 1.0, 0.5);
  const auto profile = [&](double a, double b) {
    return sample(g, [&](double x, double y) { return std::tanh((1.0 - std::hypot(x / a, y / b)) * 4.0); });
  };
  const PerimeterDeficit disk = perimeter_deficit_integral(profile(0.5, 0.5), p);
  const PerimeterDeficit ell = perimeter_deficit_integral(profile(0.7, 0.3), p);
  EXPECT_NEAR(disk.t_lo, -1 + std::cbrt(0.3), 1e-15);
  EXPECT_NEAR(disk.t_hi, 1 - std::cbrt(0.3), 1e-15);
  EXPECT_LT(std::abs(disk.value), 0.2 * ell.value);
  EXPECT_GT(ell.value, 0.0);
}

TEST(FitLogExponent, PowerLaw) {
  const std::vector<double> x{0.1, 0.2, 0.3, 0.5};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, 1.7));
  EXPECT_NEAR(fit_log_exponent(x, y), 1.7, 1e-12);
  const std::vector<double> one{0.2}, bad{-1.0};
  EXPECT_TRUE(std::isnan(fit_log_exponent(one, one)));
  EXPECT_TRUE(std::isnan(fit_log_exponent(std::vector<double>{0.1, 0.2}, std::vector<double>{1.0, -1.0})));
}

TEST(Csv, Headers) {
  const Grid g(2, 32, 1.0);
  const ScalarField u = ts::smoothed_disk(g, 0.4);
  std::ostringstream a, b;
  const ModelParams p = ModelParams::from_phi_ell(2, 0.3, 1.0, 0.5);
  const std::vector<double> lv{0.5};
  write_sphericity_csv(a, sphericity_report(u, p, lv));
  EXPECT_EQ(a.str().substr(0, a.str().find('\n')), "eta,area,perimeter,rho_in,rho_out,rho_vol,delta_rho,bonnesen_slack");
  write_contour_csv(b, contour_loops(contour_segments(u, 0.5), g.period()));
  EXPECT_EQ(b.str().substr(0, b.str().find('\n')), "loop,vertex,x,y");
}

TEST(Geometry, RequiresTwoDimensions) {
  EXPECT_THROW(level_set_geometry(ScalarField(Grid(3, 8, 1.0), 0.0), 0.0), ConfigError);
}
