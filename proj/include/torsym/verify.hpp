#pragma once

// Seeded property suites driven by `torsym verify`. Each check records a
// pass/fail flag, a short detail string and, on failure, a JSON counterexample.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "torsym/energy.hpp"
#include "torsym/field.hpp"
#include "torsym/gallery.hpp"
#include "torsym/geom.hpp"
#include "torsym/random_fields.hpp"
#include "torsym/rearrange.hpp"

namespace torsym {

struct CheckResult {
  CheckResult() = default;
  explicit CheckResult(std::string n) : name(std::move(n)) {}

  std::string name;
  bool passed = true;
  std::string detail;
  nlohmann::json counterexample;  // null unless the check failed
};

struct SuiteResult {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
  }
};

inline nlohmann::json to_json(const SuiteResult& s) {
  nlohmann::json j;
  j["suite"] = s.suite;
  j["passed"] = s.passed();
  j["checks"] = nlohmann::json::array();
  for (const auto& c : s.checks) {
    nlohmann::json cj{{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}};
    if (!c.passed) cj["counterexample"] = c.counterexample;
    j["checks"].push_back(cj);
  }
  return j;
}

namespace detail {

inline nlohmann::json dump_field(const ScalarField& u) {
  const Grid& g = u.grid();
  nlohmann::json j{{"dim", g.dim()}, {"n", g.n()}, {"ell", g.ell()}};
  j["values"] = std::vector<double>(u.values().begin(), u.values().end());
  return j;
}

inline std::string fmt(double x) {
  std::ostringstream os;
  os.precision(6);
  os << x;
  return os.str();
}

// Small fields keep counterexample dumps readable.
inline std::vector<ScalarField> sample_fields(std::uint64_t seed, int count, int n) {
  std::vector<ScalarField> out;
  const Grid g(2, n, 1.0);
  for (int k = 0; k < count; ++k) {
    const std::uint64_t s = seed + static_cast<std::uint64_t>(k);
    switch (k % 3) {
      case 0: out.push_back(band_limited_field(g, s, 3)); break;
      case 1: out.push_back(white_noise_field(g, s)); break;
      default: out.push_back(quantized_field(g, s)); break;
    }
  }
  return out;
}

inline bool same_multiset(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// rearrange

/// Minimum cyclic energy over all arrangements of `v` (brute force, n <= 8).
inline double brute_force_min_cyclic_energy(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    best = std::min(best, cyclic_energy(v));
  } while (std::next_permutation(v.begin(), v.end()));
  return best;
}

inline SuiteResult verify_rearrange(std::uint64_t seed = 1) {
  SuiteResult r{"rearrange", {}};
  {
    CheckResult c{"steiner_column_examples"};
    const std::vector<double> a{0, 1, 3, 2};
    const auto sa = steiner_column(a);
    const std::vector<double> expect{3, 2, 0, 1};
    const std::vector<double> k{5, 5, 5, 5};
    c.passed = sa == expect && steiner_column(k) == k;
    c.detail = "(0,1,3,2) -> (3,2,0,1); constant fixed";
    if (!c.passed) c.counterexample = {{"input", a}, {"output", sa}};
    r.checks.push_back(c);
  }
  {
    CheckResult c{"equimeasurability"};
    int tested = 0;
    for (const auto& u : detail::sample_fields(seed, 12, 16)) {
      for (const ScalarField& v : {steiner_axis(u, 0), steiner_axis(u, 1), iterated_steiner(u)}) {
        ++tested;
        if (!same_column_multisets(u, steiner_axis(u, 1), 1) || sorted_values_hash(u) != sorted_values_hash(v) ||
            sorted_values(u) != sorted_values(v)) {
          c.passed = false;
          c.counterexample = {{"field", detail::dump_field(u)}};
        }
      }
    }
    c.detail = std::to_string(tested) + " rearrangements preserve value multisets";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"polya_szego_bruteforce"};
    Rng rng(seed);
    int cases = 0;
    for (int n = 1; n <= 7 && c.passed; ++n) {
      for (int rep = 0; rep < 40; ++rep) {
        std::vector<double> v(static_cast<std::size_t>(n));
        for (auto& x : v) x = static_cast<double>(rng.below(6));
        const double got = cyclic_energy(steiner_column(v));
        const double best = brute_force_min_cyclic_energy(v);
        ++cases;
        if (got > best) {
          c.passed = false;
          c.counterexample = {{"values", v}, {"steiner_energy", got}, {"minimum", best}};
          break;
        }
      }
    }
    c.detail = std::to_string(cases) + " small multisets attain the brute-force minimum";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"steiner_idempotent_and_monotone"};
    for (const auto& u : detail::sample_fields(seed + 100, 6, 16)) {
      const ScalarField s = iterated_steiner(u);
      if (!(iterated_steiner(s) == s) || !is_symmetric_decreasing(s, 1) || !is_symmetric_decreasing(s, 0)) {
        c.passed = false;
        c.counterexample = {{"field", detail::dump_field(u)}};
        break;
      }
    }
    c.detail = "iterated symmetrization is a fixed point and symmetric-decreasing";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"set_steiner_matches_field_path"};
    const BinaryMask tri = triangle_mask(32);
    ScalarField ind(tri.grid);
    for (std::size_t k = 0; k < ind.size(); ++k) ind[k] = tri[k] ? 1.0 : 0.0;
    for (int axis : {0, 1}) {
      if (!(set_steiner(tri, axis) == threshold(steiner_axis(ind, axis), 0.5))) c.passed = false;
    }
    c.detail = "mask and indicator-field symmetrizations agree";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"distribution_equimeasurable"};
    const auto fields = detail::sample_fields(seed + 200, 3, 16);
    for (const auto& u : fields) {
      const ScalarField s = steiner_axis(u, 1);
      const std::vector<double> levels{-0.5, -0.1, 0.0, 0.3};
      for (std::size_t col = 0; col < fiber_count(u.grid()); ++col) {
        const auto a = distribution(u, col, levels);
        const auto b = distribution(s, col, levels);
        for (std::size_t k = 0; k < a.size(); ++k) {
          if (a[k].mu != b[k].mu) c.passed = false;
        }
      }
    }
    c.detail = "mu identical before and after steiner_axis";
    r.checks.push_back(c);
  }
  return r;
}

// ---------------------------------------------------------------------------
// energy

inline SuiteResult verify_energy(std::uint64_t seed = 2) {
  SuiteResult r{"energy", {}};
  const Grid g(2, 32, 1.5);
  const ModelParams p = ModelParams::from_phi_ell(2, 0.3, g.ell(), 1.0);
  {
    CheckResult c{"gradient_finite_difference"};
    double worst = 0.0;
    for (int k = 0; k < 20; ++k) {
      const ScalarField u = band_limited_field(g, seed + 2 * k, 4);
      const ScalarField v = band_limited_field(g, seed + 2 * k + 1, 4);
      const double eps = 1e-5;
      const double fd = (ch_energy(axpby(1.0, u, eps, v), p) - ch_energy(axpby(1.0, u, -eps, v), p)) / (2 * eps);
      const double an = inner(energy_gradient(u, p), v);
      const double rel = std::abs(fd - an) / std::max(std::abs(an), 1e-300);
      worst = std::max(worst, rel);
      if (rel > 1e-6) {
        c.passed = false;
        c.counterexample = {{"u", detail::dump_field(u)}, {"v", detail::dump_field(v)}, {"fd", fd}, {"analytic", an}};
      }
    }
    c.detail = "worst relative error " + detail::fmt(worst);
    r.checks.push_back(c);
  }
  {
    CheckResult c{"invariance_reflect_shift"};
    const ScalarField u = band_limited_field(g, seed + 50, 4);
    const double E = ch_energy(u, p);
    const double V = volume(u, p.cutoff);
    for (long eta : {0L, 3L, -7L, 16L}) {
      const ScalarField ur = reflect(u, 1, eta);
      const std::vector<long> s{5, -3};
      const ScalarField us = shift(u, s);
      // Reflections and shifts permute cells, so only summation order changes.
      for (const ScalarField* w : {&ur, &us}) {
        if (std::abs(ch_energy(*w, p) - E) > 1e-13 * E || std::abs(volume(*w, p.cutoff) - V) > 1e-13 * (V + 1)) {
          c.passed = false;
          c.counterexample = {{"field", detail::dump_field(u)}, {"eta_index", eta}};
        }
      }
    }
    c.detail = "energy and volume invariant under reflection and shifts";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"multiplier_plant_recover"};
    // The sampled cosine is an eigenvector of the discrete Laplacian,
    // -Lap_h u = kappa u, so with G'(s) = -phi^2 kappa s - phi (a + b zeta'(s)) the
    // residual vanishes exactly at (lambda_phi, lambda_omega) = (a, b).
    const ScalarField u = sample(g, [&](double, double y) { return std::cos(std::numbers::pi * y / g.ell()); });
    const double kh = std::numbers::pi * g.h() / g.ell();
    const double kappa = (2.0 - 2.0 * std::cos(kh)) / (g.h() * g.h());
    const double a = 0.37;
    const double b = -1.9;
    ModelParams q = p;
    q.potential.dG = [&, phi = p.phi, z = p.cutoff](double x) {
      return -phi * phi * kappa * x - phi * (a + b * z.dzeta(x));
    };
    const Multipliers m = fit_multipliers(u, q);
    const double err = std::max(std::abs(m.lambda_phi - a) / std::abs(a), std::abs(m.lambda_omega - b) / std::abs(b));
    c.passed = !m.degenerate && err <= 1e-10;
    c.detail = "planted (0.37, -1.9) recovered to " + detail::fmt(err);
    if (!c.passed) c.counterexample = {{"lambda_phi", m.lambda_phi}, {"lambda_omega", m.lambda_omega}};
    r.checks.push_back(c);
  }
  {
    CheckResult c{"cutoff_invariants"};
    const CutoffSpec z = p.cutoff;
    double prev = -1.0;
    for (int k = 0; k <= 2000; ++k) {
      const double s = -1.5 + 3.0 * k / 2000.0;
      const double v = z.zeta(s);
      if (v < prev || z.dzeta(s) < 0.0 || v < 0.0 || v > 1.0) c.passed = false;
      if ((s <= z.lower || s >= z.upper) && z.dzeta(s) != 0.0) c.passed = false;
      if (s > z.lower && s < z.upper && !(z.dzeta(s) > 0.0)) c.passed = false;
      prev = v;
    }
    c.passed = c.passed && z.zeta(z.lower) == 0.0 && z.zeta(z.upper) == 1.0;
    c.detail = "zeta monotone, 0 below lower, 1 above upper, zeta' supported on [lower, upper]";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"canonical_values"};
    const ScalarField m1(g, -1.0);
    const ScalarField z0(g, 0.0);
    const double e0 = ch_energy(z0, p);
    const double want = 0.25 * g.total_measure() / p.phi;
    c.passed = ch_energy(m1, p) == 0.0 && std::abs(e0 - want) <= 1e-12 * want &&
               norm_linf(energy_gradient(m1, p)) == 0.0;
    c.detail = "E(-1) = 0, E(0) = |T|/(4 phi), grad E(-1) = 0";
    r.checks.push_back(c);
  }
  return r;
}

// ---------------------------------------------------------------------------
// polarization

/// Functor type for the rearrangement under test, so mutation tests can inject
/// a faulty implementation.
using PolarizeFn = std::function<ScalarField(const ScalarField&, int, long)>;

inline PolarizeFn default_polarize() {
  return [](const ScalarField& u, int axis, long eta) { return polarize(u, axis, eta); };
}

/// Mutant with max and min exchanged between the two half-domains.
inline PolarizeFn swapped_polarize() {
  return [](const ScalarField& u, int axis, long eta) { return reflect(polarize(u, axis, eta), axis, eta); };
}

/// Sum over edges along all axes of the cellwise per-edge inequality
/// (Tu(x) - Tu(x'))^2 + (Tu(rx) - Tu(rx'))^2 <= (u(x) - u(x'))^2 + (u(rx) - u(rx'))^2.
/// Returns the index of the first violating cell or -1.
inline long per_edge_violation(const ScalarField& u, const ScalarField& t, int axis, long eta) {
  const Grid& g = u.grid();
  const ScalarField ur = reflect(u, axis, eta);
  const ScalarField tr = reflect(t, axis, eta);
  for (int a = 0; a < g.dim(); ++a) {
    long bad = -1;
    for_each_axis_pair(g, a, [&](std::size_t k, std::size_t kp, std::size_t) {
      if (bad >= 0) return;
      const double d1 = t[k] - t[kp];
      const double d2 = tr[k] - tr[kp];
      const double e1 = u[k] - u[kp];
      const double e2 = ur[k] - ur[kp];
      if (d1 * d1 + d2 * d2 > e1 * e1 + e2 * e2) bad = static_cast<long>(k);
    });
    if (bad >= 0) return bad;
  }
  return -1;
}

inline SuiteResult verify_polarization(const PolarizeFn& pol = default_polarize(), std::uint64_t seed = 3) {
  SuiteResult r{"polarization", {}};
  const auto fields = detail::sample_fields(seed, 9, 16);
  const std::vector<long> etas{-16, -5, 0, 1, 7, 12};
  CheckResult edge{"per_edge_inequality"}, multiset{"column_multisets"}, idem{"idempotence"},
      equiv{"fixed_point_iff_dominates"}, shifted{"shifted_identity"}, energy{"energy_not_increased"};
  for (const auto& u : fields) {
    const ModelParams p = ModelParams::from_phi_ell(2, 0.3, u.grid().ell(), 1.0);
    for (int axis : {0, 1}) {
      for (long eta : etas) {
        const ScalarField t = pol(u, axis, eta);
        const nlohmann::json where{{"field", detail::dump_field(u)}, {"axis", axis}, {"eta_index", eta}};
        if (edge.passed) {
          const long bad = per_edge_violation(u, t, axis, eta);
          if (bad >= 0) {
            edge.passed = false;
            edge.counterexample = where;
            edge.counterexample["cell"] = bad;
          }
        }
        if (multiset.passed && !same_column_multisets(u, t, axis)) {
          multiset.passed = false;
          multiset.counterexample = where;
        }
        if (idem.passed && !(pol(t, axis, eta) == t)) {
          idem.passed = false;
          idem.counterexample = where;
        }
        if (equiv.passed && (pol(u, axis, eta) == u) != dominates_reflection(u, axis, eta)) {
          equiv.passed = false;
          equiv.counterexample = where;
        }
        if (shifted.passed) {
          // After one pass t = T t, so T^{eta+ell} t must equal the reflection of t.
          const long n = u.grid().n();
          const ScalarField lhs = pol(t, axis, eta + n);
          const ScalarField rhs = reflect(t, axis, eta);
          const double disc = norm_linf(axpby(1.0, lhs, -1.0, rhs));
          if (disc != 0.0) {
            shifted.passed = false;
            shifted.counterexample = where;
            shifted.counterexample["discrepancy"] = disc;
          }
        }
        if (energy.passed) {
          const double E = ch_energy(u, p);
          if (ch_energy(t, p) > E + 1e-13 * std::abs(E)) {
            energy.passed = false;
            energy.counterexample = where;
          }
        }
      }
    }
  }
  const std::string scope = std::to_string(fields.size()) + " fields x 2 axes x " + std::to_string(etas.size()) +
                            " reflection centres";
  for (CheckResult* c : {&edge, &multiset, &idem, &equiv, &shifted, &energy}) {
    c->detail = scope;
    r.checks.push_back(*c);
  }
  return r;
}

// ---------------------------------------------------------------------------
// geometry

inline SuiteResult verify_geometry() {
  SuiteResult r{"geometry", {}};
  const Grid g(2, 128, 2.0);
  const double h = g.h();
  {
    CheckResult c{"disk_radii_and_bonnesen"};
    const double rad = 1.0;
    const ScalarField u = sample(g, [&](double x, double y) { return rad - std::hypot(x, y); });
    const LevelSetGeometry geo = level_set_geometry(u, 0.0);
    const BonnesenCheck b = bonnesen_check(geo);
    c.passed = geo.contained_in_disk && geo.components == 1 && std::abs(geo.rho_in - rad) <= h &&
               std::abs(geo.rho_out - rad) <= h && b.checked && b.holds &&
               std::abs(geo.perimeter - 2 * std::numbers::pi * rad) <= 0.015 * 2 * std::numbers::pi * rad &&
               geo.rho_in <= geo.rho_vol + h && geo.rho_vol <= geo.rho_out + h;
    c.detail = "rho_in " + detail::fmt(geo.rho_in) + ", rho_out " + detail::fmt(geo.rho_out) + ", slack " +
               detail::fmt(b.slack);
    r.checks.push_back(c);
  }
  {
    CheckResult c{"rectangle_radii"};
    const ScalarField u = sample(g, [](double x, double y) { return std::min(1.0 - std::abs(x), 0.5 - std::abs(y)); });
    const LevelSetGeometry geo = level_set_geometry(u, 0.0);
    const BonnesenCheck b = bonnesen_check(geo);
    c.passed = std::abs(geo.rho_out - std::sqrt(5.0) / 2) <= h && std::abs(geo.rho_in - 0.5) <= h && b.holds &&
               b.slack > 0.0;
    c.detail = "rho_in " + detail::fmt(geo.rho_in) + ", rho_out " + detail::fmt(geo.rho_out);
    r.checks.push_back(c);
  }
  {
    CheckResult c{"band_perimeter_and_containment"};
    const ScalarField u = sample(g, [](double, double y) { return 0.5 - std::abs(y); });
    const LevelSetGeometry geo = level_set_geometry(u, 0.0);
    c.passed = std::abs(geo.perimeter - 4.0 * g.ell()) <= 1e-6 && !geo.contained_in_disk &&
               !bonnesen_check(geo).checked;
    c.detail = "perimeter " + detail::fmt(geo.perimeter) + " (4 ell = " + detail::fmt(4 * g.ell()) + ")";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"shift_and_swap_invariance"};
    const ScalarField u = sample(g, [](double x, double y) {
      return 0.8 - std::hypot(x - 0.3, 1.3 * (y + 0.2)) - 0.1 * std::sin(3 * x);
    });
    const LevelSetGeometry a = level_set_geometry(u, 0.0);
    const std::vector<long> s{17, -9};
    const LevelSetGeometry b = level_set_geometry(shift(u, s), 0.0);
    ScalarField sw(g);
    for (long i = 0; i < g.n(); ++i) {
      for (long j = 0; j < g.n(); ++j) sw[g.flatten({i, j, 0})] = u.at(j, i);
    }
    const LevelSetGeometry cgeo = level_set_geometry(sw, 0.0);
    double worst = 0.0;
    for (const LevelSetGeometry* o : {&b, &cgeo}) {
      worst = std::max({worst, std::abs(o->perimeter - a.perimeter), std::abs(o->rho_in - a.rho_in),
                        std::abs(o->rho_out - a.rho_out), std::abs(o->area - a.area)});
    }
    c.passed = worst <= 1e-10;
    c.detail = "max deviation " + detail::fmt(worst);
    r.checks.push_back(c);
  }
  {
    CheckResult c{"bonnesen_rectangle_closed_form"};
    const double per = 6.0;
    const double rhs = bonnesen_rhs(2.0, std::sqrt(5.0) / 2, 0.5);
    c.passed = std::abs(rhs - 5.1315) < 1e-3 && per - rhs > 0.0;
    c.detail = "2 x 1 rectangle: 6 vs " + detail::fmt(rhs);
    r.checks.push_back(c);
  }
  {
    CheckResult c{"superlevel_monotone"};
    const ScalarField u = band_limited_field(g, 9, 3);
    const std::vector<double> levels{-0.4, -0.2, 0.0, 0.1, 0.3};
    for (std::size_t k = 1; k < levels.size(); ++k) {
      const BinaryMask lo = threshold(u, levels[k - 1]);
      const BinaryMask hi = threshold(u, levels[k]);
      for (std::size_t q = 0; q < lo.cells.size(); ++q) {
        if (hi[q] && !lo[q]) c.passed = false;
      }
    }
    c.detail = "masks nested across levels";
    r.checks.push_back(c);
  }
  {
    CheckResult c{"regime_constants"};
    const XiThresholds t = xi_thresholds(PotentialSpec::canonical());
    c.passed = std::abs(t.c0 - 2.0 * std::numbers::sqrt2 / 3.0) <= 1e-12 &&
               std::abs(t.xi_2 / t.xi_tilde_2 - std::numbers::sqrt2) <= 1e-15;
    c.detail = "c0 = " + detail::fmt(t.c0);
    r.checks.push_back(c);
  }
  return r;
}

inline std::vector<SuiteResult> run_suites(const std::string& name, const PolarizeFn& pol = default_polarize()) {
  std::vector<SuiteResult> out;
  const bool all = name == "all";
  if (all || name == "rearrange") out.push_back(verify_rearrange());
  if (all || name == "energy") out.push_back(verify_energy());
  if (all || name == "polarization") out.push_back(verify_polarization(pol));
  if (all || name == "geometry") out.push_back(verify_geometry());
  if (out.empty()) throw ConfigError("unknown suite '" + name + "' (rearrange, energy, polarization, geometry, all)");
  return out;
}

}  // namespace torsym
