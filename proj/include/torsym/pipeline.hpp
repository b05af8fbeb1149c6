#pragma once

// The minimize pipeline (init, descent, audit, geometry) and its JSON reports.
// Reports carry no timings or paths so that identical configs give
// byte-identical output.

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "torsym/config.hpp"
#include "torsym/field_io.hpp"
#include "torsym/geom.hpp"
#include "torsym/minimize.hpp"

namespace torsym {

enum ExitCode : int { kExitOk = 0, kExitVerification = 1, kExitConfig = 2, kExitNumerical = 3 };

// ---------------------------------------------------------------------------
// JSON views

inline nlohmann::json to_json(const Multipliers& m) {
  return {{"lambda_phi", m.lambda_phi}, {"lambda_omega", m.lambda_omega}, {"degenerate", m.degenerate}};
}

inline nlohmann::json to_json(const ConstraintState& c) {
  return {{"mean_target", c.mean_target},
          {"volume_target", c.volume_target},
          {"mean_error", c.mean_error},
          {"volume_error", c.volume_error}};
}

inline nlohmann::json to_json(const MinimizeReport& r) {
  nlohmann::json j;
  j["iterations"] = r.iterations;
  j["rejected_steps"] = r.rejected_steps;
  j["converged"] = r.converged;
  j["stop_reason"] = r.stop_reason;
  j["initial_energy"] = r.energy_trace.empty() ? 0.0 : r.energy_trace.front();
  j["final_energy"] = r.final_energy;
  j["initial_gradient_norm"] = r.initial_gradient_norm;
  j["final_gradient_norm"] = r.final_gradient_norm;
  j["gradient_target"] = r.gradient_target;
  j["multipliers"] = to_json(r.multipliers);
  j["el_residual_norm"] = r.el_residual_norm;
  j["constraints"] = to_json(r.constraints);
  // Thinned energy trace, at most 200 entries.
  nlohmann::json trace = nlohmann::json::array();
  const std::size_t stride = std::max<std::size_t>(1, r.energy_trace.size() / 200);
  for (std::size_t k = 0; k < r.energy_trace.size(); k += stride) trace.push_back(r.energy_trace[k]);
  j["energy_trace"] = trace;
  return j;
}

inline nlohmann::json to_json(const LevelSetGeometry& g) {
  return {{"level", g.level},
          {"area", g.area},
          {"perimeter", g.perimeter},
          {"rho_in", g.rho_in},
          {"rho_out", g.rho_out},
          {"rho_vol", g.rho_vol},
          {"bonnesen_rhs", g.bonnesen_rhs},
          {"contained_in_disk", g.contained_in_disk},
          {"components", g.components},
          {"empty", g.empty},
          {"full", g.full}};
}

inline nlohmann::json to_json(const BonnesenCheck& b) {
  return {{"checked", b.checked}, {"holds", b.holds}, {"slack", b.slack}, {"tolerance", b.tolerance},
          {"reason", b.reason}};
}

inline nlohmann::json to_json(const SphericityRow& r) {
  nlohmann::json j{{"geometry", to_json(r.geometry)}, {"included", r.included}, {"bonnesen", to_json(r.bonnesen)}};
  if (r.included) {
    j["outer_deviation"] = r.outer_deviation;
    j["inner_deviation"] = r.inner_deviation;
    j["delta_rho"] = r.delta_rho;
    j["area_deviation"] = r.area_deviation;
  } else {
    j["excluded_reason"] = r.geometry.empty ? "empty" : r.geometry.full ? "full" : "not contained in a disk";
  }
  return j;
}

inline nlohmann::json to_json(const RegimeConstants& r) {
  return {{"c0", r.c0},           {"xi_tilde_2", r.xi_tilde_2}, {"xi_2", r.xi_2},
          {"r_omega", r.r_omega}, {"xi_in_range", r.xi_in_range}, {"quadrature_error", r.quadrature_error}};
}

inline nlohmann::json to_json(const PerimeterDeficit& d) {
  return {{"value", d.value}, {"t_lo", d.t_lo}, {"t_hi", d.t_hi}, {"samples", d.samples}, {"weight", d.weight}};
}

inline nlohmann::json model_json(const ModelParams& p) {
  return {{"dim", p.dim},     {"phi", p.phi}, {"L", p.L},
          {"xi", p.xi},       {"ell", p.ell}, {"omega", p.omega},
          {"potential", p.potential.name},
          {"cutoff", {{"lower", p.cutoff.lower}, {"upper", p.cutoff.upper}}}};
}

// ---------------------------------------------------------------------------
// Audit with pass/fail thresholds

struct AuditThresholds {
  double relative_distance = 1e-2;
  double dichotomy = 1e-2;
  double multiplier_rel = 1e-10;
  double energy_gap = -1e-10;  // E(T u) >= E(u) - 1e-10 |E(u)|
};

struct MultiplierInvariance {
  std::vector<long> eta_indices;
  double max_rel_phi = 0.0;
  double max_rel_omega = 0.0;
};

inline double rel_diff(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s > 0.0 ? std::abs(a - b) / s : 0.0;
}

/// Multipliers of u against those of its reflections at `count` grid-aligned eta.
inline MultiplierInvariance multiplier_invariance(const ScalarField& u, const ModelParams& p, std::size_t count = 8,
                                                  int axis = -1) {
  const int ax = detail::resolve_axis(u.grid(), axis);
  const Multipliers m = fit_multipliers(u, p);
  MultiplierInvariance out;
  out.eta_indices = sampled_eta_indices(u.grid().n(), count);
  for (long k : out.eta_indices) {
    const Multipliers mr = fit_multipliers(reflect(u, ax, k), p);
    out.max_rel_phi = std::max(out.max_rel_phi, rel_diff(m.lambda_phi, mr.lambda_phi));
    out.max_rel_omega = std::max(out.max_rel_omega, rel_diff(m.lambda_omega, mr.lambda_omega));
  }
  return out;
}

inline nlohmann::json audit_json(const SymmetryAudit& a, const MultiplierInvariance& mi, const AuditThresholds& t,
                                 bool& passed) {
  nlohmann::json j;
  j["shift"] = a.shift;
  j["aligned_distance"] = a.aligned_distance;
  j["relative_distance"] = a.relative_distance;
  j["max_upper_dy"] = a.max_upper_dy;
  j["monotonicity_threshold"] = a.monotonicity_threshold;
  j["monotonicity_violations"] = a.monotonicity_violations;
  j["max_violation_margin_cells"] = a.max_violation_margin;
  j["max_dichotomy"] = a.max_dichotomy;
  j["min_polarization_energy_gap"] = a.min_energy_gap;
  nlohmann::json d = nlohmann::json::array();
  for (const auto& e : a.dichotomy) {
    d.push_back({{"eta_index", e.eta_index},
                 {"dist_fixed", e.dist_fixed},
                 {"dist_reflected", e.dist_reflected},
                 {"relative_min", e.relative_min},
                 {"energy_gap", e.energy_gap}});
  }
  j["dichotomy"] = d;
  j["multiplier_invariance"] = {{"eta_indices", mi.eta_indices},
                                {"max_rel_lambda_phi", mi.max_rel_phi},
                                {"max_rel_lambda_omega", mi.max_rel_omega}};
  nlohmann::json checks;
  checks["symmetric"] = a.relative_distance <= t.relative_distance;
  checks["monotone"] = a.monotonicity_violations == 0;
  checks["dichotomy"] = a.max_dichotomy <= t.dichotomy;
  checks["multipliers"] = mi.max_rel_phi <= t.multiplier_rel && mi.max_rel_omega <= t.multiplier_rel;
  checks["polarization_energy"] = a.min_energy_gap >= t.energy_gap;
  passed = true;
  for (const auto& [k, v] : checks.items()) passed = passed && v.get<bool>();
  j["checks"] = checks;
  j["passed"] = passed;
  return j;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineOutcome {
  nlohmann::json report;
  int exit_code = kExitOk;
  ScalarField field;
  std::vector<SphericityRow> sphericity;
};

inline std::string level_tag(double eta) { return format_double(eta); }

inline void write_json_file(const std::filesystem::path& path, const nlohmann::json& j) {
  atomic_write(path, j.dump(2) + "\n");
}

/// Runs init, descent, audit and geometry for one resolved config, writing
/// config.json, field.txt, symmetrized.txt, report.json, sphericity.csv and
/// contour CSVs into `out`. On a numerical failure the report so far is written
/// and the outcome carries exit code 3.
inline PipelineOutcome run_pipeline(const ResolvedRun& run, const std::filesystem::path& out,
                                    const AuditThresholds& thresholds = {}) {
  std::filesystem::create_directories(out);
  const nlohmann::json cfg_json = to_json(run.config);
  write_json_file(out / "config.json", cfg_json);

  PipelineOutcome res;
  nlohmann::json& rep = res.report;
  rep["config"] = cfg_json;
  rep["model"] = model_json(run.params);
  rep["center"] = run.center;
  rep["stage"] = "init";

  std::size_t last_checkpoint = 0;
  try {
    const RegimeConstants rc = regime_constants(run.params);
    rep["regime"] = to_json(rc);
    const ScalarField u0 =
        init_droplet(run.grid, run.params, run.center, run.config.noise, run.config.seed);

    rep["stage"] = "descent";
    DescentOptions opt;
    opt.tol_rel = run.config.tol_g;
    opt.max_iter = run.config.max_iter;
    opt.trace_stride = 1;
    opt.checkpoint_every = run.config.checkpoint_every;
    opt.checkpoint = [&](std::size_t it, const ScalarField& u) {
      save_field(out / "checkpoint.txt", u);
      write_json_file(out / "checkpoint.json", {{"accepted_steps", it}, {"energy", ch_energy(u, run.params)}});
      last_checkpoint = it;
    };
    MinimizeResult mr = constrained_descent(u0, run.params, opt);
    rep["minimize"] = to_json(mr.report);
    save_field(out / "field.txt", mr.field);

    rep["stage"] = "audit";
    AuditOptions ao;
    ao.eta_samples = run.config.eta_samples;
    const SymmetryAudit audit = symmetry_audit(mr.field, run.params, ao);
    const MultiplierInvariance mi = multiplier_invariance(mr.field, run.params);
    bool audit_passed = false;
    rep["audit"] = audit_json(audit, mi, thresholds, audit_passed);
    save_field(out / "symmetrized.txt", audit.symmetrized);

    if (run.grid.dim() == 2) {
      rep["stage"] = "geometry";
      res.sphericity = sphericity_report(mr.field, run.params, run.config.levels);
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& r : res.sphericity) {
        rows.push_back(to_json(r));
        if (r.geometry.empty || r.geometry.full) continue;
        const auto loops = contour_loops(contour_segments(mr.field, r.geometry.level), run.grid.period());
        std::ostringstream os;
        write_contour_csv(os, loops);
        atomic_write(out / ("contour_eta_" + level_tag(r.geometry.level) + ".csv"), os.str());
      }
      rep["sphericity"] = rows;
      std::ostringstream os;
      write_sphericity_csv(os, res.sphericity);
      atomic_write(out / "sphericity.csv", os.str());
      rep["perimeter_deficit_diagnostic"] = to_json(perimeter_deficit_integral(mr.field, run.params));
    } else {
      rep["sphericity"] = nullptr;
      rep["sphericity_note"] = "geometry is computed for dim 2 only";
    }
    rep["stage"] = "done";
    res.field = std::move(mr.field);
    if (!mr.report.converged) {
      res.exit_code = kExitNumerical;
    } else if (!audit_passed) {
      res.exit_code = kExitVerification;
    }
  } catch (const NumericalError& e) {
    rep["error"] = e.what();
    rep["last_checkpoint"] = last_checkpoint;
    res.exit_code = kExitNumerical;
  }
  rep["exit_code"] = res.exit_code;
  write_json_file(out / "report.json", rep);
  return res;
}

/// Runs the pipeline for each phi (xi and omega_fraction held fixed) and fits
/// the exponents of delta_rho and |area - omega| at level 0 against phi. With
/// `h_over_phi` set, n is chosen per phi so that h / phi stays constant.
inline nlohmann::json run_sweep(const RunConfig& base, const std::vector<double>& phis,
                                std::optional<double> h_over_phi, const std::filesystem::path& out,
                                int& exit_code) {
  if (phis.size() < 2) throw ConfigError("a phi sweep needs at least two values");
  std::filesystem::create_directories(out);
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> xs, drho, darea;
  exit_code = kExitOk;
  for (double phi : phis) {
    RunConfig c = base;
    c.phi = phi;
    c.L.reset();
    c.ell.reset();
    if (!c.xi) c.xi = mid_range_xi(PotentialSpec::canonical());
    if (c.omega) throw ConfigError("a phi sweep holds omega_fraction fixed; give omega_fraction, not omega");
    if (std::find(c.levels.begin(), c.levels.end(), 0.0) == c.levels.end()) c.levels.push_back(0.0);
    if (h_over_phi) {
      const ResolvedRun probe = resolve(c);
      c.n = n_for_resolution(probe.params.ell, phi, *h_over_phi);
    }
    const ResolvedRun run = resolve(c);
    const PipelineOutcome po = run_pipeline(run, out / ("phi_" + format_double(phi)));
    exit_code = std::max(exit_code, po.exit_code);
    nlohmann::json row{{"phi", phi}, {"n", run.grid.n()}, {"h", run.grid.h()}, {"exit_code", po.exit_code}};
    for (const auto& r : po.sphericity) {
      if (r.geometry.level != 0.0) continue;
      row["included"] = r.included;
      if (r.included) {
        row["delta_rho"] = r.delta_rho;
        row["area_deviation"] = r.area_deviation;
        xs.push_back(phi);
        drho.push_back(r.delta_rho);
        darea.push_back(std::abs(r.area_deviation));
      }
    }
    rows.push_back(row);
  }
  // Trend flags, ordered by decreasing phi.
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] > xs[b]; });
  bool drho_mono = true, area_mono = true;
  for (std::size_t k = 1; k < order.size(); ++k) {
    drho_mono = drho_mono && drho[order[k]] <= drho[order[k - 1]];
    area_mono = area_mono && darea[order[k]] <= darea[order[k - 1]];
  }
  const auto num = [](double x) { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  nlohmann::json j;
  j["runs"] = rows;
  j["level"] = 0.0;
  j["delta_rho_exponent"] = num(fit_log_exponent(xs, drho));
  j["area_deviation_exponent"] = num(fit_log_exponent(xs, darea));
  j["delta_rho_nonincreasing"] = drho_mono;
  j["area_deviation_nonincreasing"] = area_mono;
  j["h_over_phi"] = h_over_phi ? nlohmann::json(*h_over_phi) : nlohmann::json(nullptr);
  write_json_file(out / "sweep.json", j);
  return j;
}

}  // namespace torsym
