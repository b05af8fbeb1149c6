// Acceptance run: one PASS/FAIL line per criterion. `--only N` runs a single
// criterion (ctest registers each separately). Exit status is nonzero when any
// selected criterion fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "support.hpp"
#include "torsym/torsym.hpp"

using namespace torsym;
namespace ts = testsupport;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string num(double x) {
  std::ostringstream os;
  os.precision(4);
  os << x;
  return os.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------------
// Shared minimizers, computed on first use.

struct Minimizer {
  ResolvedRun run;
  MinimizeResult result;
  double seconds = 0.0;
};

RunConfig acceptance_config(int n, double phi) {
  RunConfig c;
  c.dim = 2;
  c.n = n;
  c.phi = phi;
  c.xi = mid_range_xi(PotentialSpec::canonical());
  c.omega_fraction = 0.5;
  c.tol_g = 1e-8;
  c.max_iter = 200000;
  return c;
}

const Minimizer& minimizer(int n, double phi = 0.3) {
  static std::map<std::pair<int, double>, Minimizer> cache;
  const auto key = std::make_pair(n, phi);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const auto t0 = std::chrono::steady_clock::now();
  Minimizer m;
  m.run = resolve(acceptance_config(n, phi));
  const ScalarField u0 = init_droplet(m.run.grid, m.run.params, m.run.center);
  DescentOptions opt;
  opt.tol_rel = m.run.config.tol_g;
  opt.max_iter = m.run.config.max_iter;
  opt.trace_stride = 0;
  m.result = constrained_descent(u0, m.run.params, opt);
  m.seconds = seconds_since(t0);
  std::cerr << "  [minimizer n=" << n << " phi=" << phi << ": " << m.result.report.stop_reason << " after "
            << m.result.report.iterations << " iterations, " << num(m.seconds) << " s]\n";
  return cache.emplace(key, std::move(m)).first->second;
}

const SymmetryAudit& audit128() {
  static std::optional<SymmetryAudit> a;
  if (!a) {
    const Minimizer& m = minimizer(128);
    a = symmetry_audit(m.result.field, m.run.params);
  }
  return *a;
}

// ---------------------------------------------------------------------------

Outcome c1_equimeasurability() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid g(2, 128, 1.0);
  int bad = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const ScalarField u = ts::random_field(g, 1000 + s);
    const long eta = static_cast<long>(s % 256) - 128;
    const int axis = static_cast<int>(s % 2);
    const ScalarField sa = steiner_axis(u, axis);
    const ScalarField it = iterated_steiner(u);
    const ScalarField po = polarize(u, axis, eta);
    const bool ok = ts::lines_equimeasurable(u, sa, axis) && ts::same_sorted_values(u, it) &&
                    ts::lines_equimeasurable(u, po, axis) && ts::same_sorted_values(u, sa) &&
                    ts::same_sorted_values(u, po);
    bad += ok ? 0 : 1;
  }
  const double secs = seconds_since(t0);
  return {bad == 0 && secs < 10.0,
          "100 fields at n=128: " + std::to_string(bad) + " multiset mismatches, " + num(secs) + " s"};
}

Outcome c2_polya_szego() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(2024);
  int brute_bad = 0, cases = 0;
  for (int rep = 0; rep < 200; ++rep) {
    for (std::size_t n = 2; n <= 7; ++n) {
      const auto v = ts::random_multiset(rng, n, 1 + static_cast<int>(rng.below(6)));
      const double best = ts::brute_min_cyclic(v);
      const double got = ts::cyclic_sq_diff(steiner_column(v));
      if (got > best + 1e-12 * std::max(1.0, best)) ++brute_bad;
      ++cases;
    }
  }
  const Grid g(2, 128, 1.5);
  const ModelParams p = ModelParams::from_phi_ell(2, 0.3, g.ell(), 1.0);
  int field_bad = 0;
  double worst = -std::numeric_limits<double>::infinity();
  for (std::uint64_t s = 0; s < 10; ++s) {
    const ScalarField u = band_limited_field(g, 500 + s, 4, 1.0);
    const double E = ch_energy(u, p);
    for (const ScalarField& w : {steiner_axis(u, 0), steiner_axis(u, 1), iterated_steiner(u)}) {
      const double Es = ch_energy(w, p);
      worst = std::max(worst, (Es - E) / std::abs(E));
      if (Es > E + 1e-10 * std::abs(E)) ++field_bad;
    }
  }
  const double secs = seconds_since(t0);
  return {brute_bad == 0 && field_bad == 0 && secs < 60.0,
          std::to_string(cases) + " brute-force multisets (" + std::to_string(brute_bad) +
              " misses); 30 field symmetrizations, max relative energy change " + num(worst) + "; " +
              num(secs) + " s"};
}

Outcome c3_polarization() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid g(2, 64, 1.0);
  const PotentialSpec pot = PotentialSpec::canonical();
  int edge_bad = 0, g_bad = 0, idem_bad = 0, shift_bad = 0, total = 0;
  for (std::uint64_t s = 0; s < 12; ++s) {
    const ScalarField u = ts::random_field(g, 300 + s);
    for (int axis : {0, 1}) {
      for (long eta : {-64L, -31L, 0L, 5L, 64L, 100L}) {
        ++total;
        const ScalarField t = polarize(u, axis, eta);
        if (per_edge_violation(u, t, axis, eta) >= 0) ++edge_bad;
        // Per-line G integrals: the G-value multisets must match exactly.
        ScalarField gu(g), gt(g);
        for (std::size_t k = 0; k < u.size(); ++k) {
          gu[k] = pot.G(u[k]);
          gt[k] = pot.G(t[k]);
        }
        if (!ts::lines_equimeasurable(gu, gt, axis)) ++g_bad;
        if (!(polarize(t, axis, eta) == t)) ++idem_bad;
        const ShiftedIdentityReport rep = polarize_shifted_identity_check(t, axis, eta);
        if (!rep.precondition_holds || rep.discrepancy != 0.0) ++shift_bad;
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = edge_bad + g_bad + idem_bad + shift_bad == 0 && secs < 10.0;
  return {ok, std::to_string(total) + " cases: per-edge " + std::to_string(edge_bad) + ", G-integrals " +
                  std::to_string(g_bad) + ", idempotence " + std::to_string(idem_bad) +
                  ", shifted identity " + std::to_string(shift_bad) + " failures; " + num(secs) + " s"};
}

Outcome c4_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid g(2, 64, 1.5);
  const ModelParams p = ModelParams::from_phi_ell(2, 0.3, g.ell(), 1.0);
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ScalarField u = band_limited_field(g, 40 + 2 * s, 4, 1.2);
    const ScalarField v = band_limited_field(g, 41 + 2 * s, 4, 1.0);
    const double fd = ts::fd_directional(u, v, p, 1e-5);
    const double an = inner(energy_gradient(u, p), v);
    worst = std::max(worst, std::abs(fd - an) / std::max(std::abs(an), 1e-300));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-6 && secs < 5.0, "20 pairs at n=64, worst relative error " + num(worst) + ", " + num(secs) + " s"};
}

Outcome c5_symmetry() {
  const Minimizer& a = minimizer(128);
  const Minimizer& b = minimizer(256);
  const SymmetryAudit& au = audit128();
  const SymmetryAudit bu = symmetry_audit(b.result.field, b.run.params);
  const bool conv = a.result.report.converged && b.result.report.converged;
  // Distances at round-off level carry no ordering; compare above a 64 eps floor.
  const double floor = 64.0 * std::numeric_limits<double>::epsilon();
  const bool ok = conv && au.relative_distance <= 1e-2 && bu.relative_distance <= au.relative_distance + floor &&
                  a.seconds < 600.0 && b.seconds < 600.0;
  return {ok, "converged " + std::string(conv ? "yes" : "no") + "; relative aligned distance n=128 " +
                  num(au.relative_distance) + ", n=256 " + num(bu.relative_distance) + "; run times " +
                  num(a.seconds) + " s, " + num(b.seconds) + " s"};
}

Outcome c6_monotonicity() {
  const SymmetryAudit& au = audit128();
  return {au.monotonicity_violations == 0,
          "max centred dy on trimmed upper halves " + num(au.max_upper_dy) + " vs threshold " +
              num(au.monotonicity_threshold) + "; " + std::to_string(au.monotonicity_violations) + " violations"};
}

Outcome c7_multipliers() {
  const Minimizer& m = minimizer(128);
  const MultiplierInvariance mi = multiplier_invariance(m.result.field, m.run.params, 8);
  const bool ok = mi.max_rel_phi <= 1e-10 && mi.max_rel_omega <= 1e-10;
  return {ok, "8 reflections: max relative change lambda_phi " + num(mi.max_rel_phi) + ", lambda_omega " +
                  num(mi.max_rel_omega)};
}

Outcome c8_dichotomy() {
  const SymmetryAudit& au = audit128();
  return {au.dichotomy.size() == 16 && au.max_dichotomy <= 1e-2,
          std::to_string(au.dichotomy.size()) + " reflection centres, max relative min-distance " +
              num(au.max_dichotomy)};
}

Outcome c9_bonnesen() {
  const Minimizer& m = minimizer(128);
  std::string detail;
  bool ok = true;
  int checked = 0;
  for (double eta : {-0.5, 0.0, 0.5}) {
    const LevelSetGeometry geo = level_set_geometry(m.result.field, eta);
    const BonnesenCheck b = bonnesen_check(geo);
    if (b.checked) {
      ++checked;
      ok = ok && b.holds;
      detail += "eta " + num(eta) + " slack " + num(b.slack) + " (tol " + num(b.tolerance) + "); ";
    } else {
      detail += "eta " + num(eta) + " skipped: " + b.reason + "; ";
    }
  }
  const Grid g(2, 256, 2.0);
  const LevelSetGeometry disk = level_set_geometry(ts::smoothed_disk(g, 1.0), 0.5);
  const BonnesenCheck bd = bonnesen_check(disk);
  const double rel = std::abs(bd.slack) / disk.perimeter;
  ok = ok && checked > 0 && bd.checked && rel <= 0.015;
  detail += "disk n=256 relative slack " + num(rel);
  return {ok, detail};
}

Outcome c10_sphericity() {
  const Minimizer& ref = minimizer(128, 0.3);
  const double h_over_phi = ref.run.grid.h() / 0.3;
  std::vector<double> phis{0.4, 0.3, 0.2}, drho, darea;
  std::string detail;
  for (double phi : phis) {
    const int n = n_for_resolution(resolve(acceptance_config(128, phi)).params.ell, phi, h_over_phi);
    const Minimizer& m = minimizer(n, phi);
    const double eta0[] = {0.0};
    const auto rows = sphericity_report(m.result.field, m.run.params, eta0);
    const SphericityRow& r = rows.front();
    drho.push_back(r.included ? r.delta_rho : std::numeric_limits<double>::quiet_NaN());
    darea.push_back(r.included ? std::abs(r.area_deviation) : std::numeric_limits<double>::quiet_NaN());
    detail += "phi " + num(phi) + " (n=" + std::to_string(n) + "): drho " + num(drho.back()) + ", |area-omega| " +
              num(darea.back()) + "; ";
  }
  bool drho_ok = true, area_ok = true;
  for (std::size_t k = 1; k < phis.size(); ++k) {
    drho_ok = drho_ok && drho[k] <= drho[k - 1];
    area_ok = area_ok && darea[k] <= darea[k - 1];
  }
  detail += "drho non-increasing " + std::string(drho_ok ? "yes" : "no") + ", |area-omega| non-increasing " +
            (area_ok ? "yes" : "no") + "; fitted exponents drho " + num(fit_log_exponent(phis, drho)) +
            ", |area-omega| " + num(fit_log_exponent(phis, darea));
  return {drho_ok && area_ok, detail};
}

Outcome c11_gallery() {
  const TwoBumpsReport tb = analyze_two_bumps(two_bumps());
  const LayerCakeReport lc = analyze_layer_cake(layer_cake());
  const TriangleReport tr = analyze_triangle(triangle_mask());
  return {tb.passed() && lc.passed() && tr.passed(),
          "two_bumps gap " + num(tb.comparison.energy_gap) + ", distance " + num(tb.comparison.aligned_distance) +
              " >= delta " + num(tb.delta) + "; layer_cake max mu_sing " + num(lc.max_singular_measure) +
              " on " + std::to_string(lc.columns_with_singular_mass) + " columns; triangle counts " +
              std::to_string(tr.cells_xy) + "/" + std::to_string(tr.cells_yx) + ", difference " +
              std::to_string(tr.difference_cells) + " cells"};
}

Outcome c12_distribution() {
  const double ell = 1.0;
  const Grid g(2, 256, ell);
  const std::size_t col = 77;
  // cos column: d mu / dt at t = 0 is -2 ell / pi.
  const ScalarField c = sample(g, [&](double, double y) { return std::cos(std::numbers::pi * y / ell); });
  const double exact_t = -2.0 * ell / std::numbers::pi;
  const DerivativeCheck dt = mu_t_derivative_check(c, col, 0.0, 1e-3);
  const double et = std::max(std::abs(dt.finite_difference - exact_t), std::abs(dt.crossing_sum - exact_t)) /
                    std::abs(exact_t);
  // Separable f(x) g(y) with g(y) = (1 + cos(pi y / ell)) / 2:
  // mu(x, t) = (2 ell / pi) arccos(2 t / f(x) - 1).
  const auto f = [&](double x) { return 1.0 + 0.3 * std::sin(std::numbers::pi * x / ell); };
  const auto fp = [&](double x) { return 0.3 * std::numbers::pi / ell * std::cos(std::numbers::pi * x / ell); };
  const ScalarField s =
      sample(g, [&](double x, double y) { return f(x) * 0.5 * (1.0 + std::cos(std::numbers::pi * y / ell)); });
  const double t = 0.5;
  const long ci = 90;
  const double x = g.coord(ci);
  const double q = 2.0 * t / f(x) - 1.0;
  const double exact_x = (2.0 * ell / std::numbers::pi) / std::sqrt(1.0 - q * q) * (2.0 * t * fp(x) / (f(x) * f(x)));
  const DerivativeCheck dx = mu_i_derivative_check(s, static_cast<std::size_t>(ci), t, 0);
  const double ex = std::max(std::abs(dx.finite_difference - exact_x), std::abs(dx.crossing_sum - exact_x)) /
                    std::abs(exact_x);
  const RegimeConstants rc = regime_constants(ModelParams::from_phi_ell(2, 0.3, 1.0, 1.0));
  const double ec = std::abs(rc.c0 - 2.0 * std::numbers::sqrt2 / 3.0);
  return {et <= 0.02 && ex <= 0.02 && ec <= 1e-10,
          "d mu/dt relative error " + num(et) + ", d mu/dx relative error " + num(ex) + ", |c0 - 2 sqrt2/3| " +
              num(ec)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  int only = 0;
  app.add_option("--only", only, "run a single criterion (1-12)");
  CLI11_PARSE(app, argc, argv);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"equimeasurability", c1_equimeasurability},
      {"discrete Polya-Szego", c2_polya_szego},
      {"polarization identities", c3_polarization},
      {"gradient correctness", c4_gradient},
      {"minimizer symmetry", c5_symmetry},
      {"monotonicity", c6_monotonicity},
      {"multiplier invariance", c7_multipliers},
      {"rigidity dichotomy", c8_dichotomy},
      {"Bonnesen", c9_bonnesen},
      {"sphericity trend", c10_sphericity},
      {"counterexample gallery", c11_gallery},
      {"distribution formulas", c12_distribution},
  };
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::cerr << "--only must be between 1 and " << criteria.size() << "\n";
    return 2;
  }
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    if (only != 0 && static_cast<std::size_t>(only) != k + 1) continue;
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS " : "FAIL ") << (k + 1) << " " << criteria[k].first << ": " << o.detail
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
