// torsym command-line front end. One command per process; reports go to
// stdout as JSON (and to --report if given), progress to stderr.
//
// Exit codes: 0 success, 1 verification failure, 2 configuration or input
// error, 3 numerical failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "torsym/torsym.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace torsym;

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void emit(const json& report, const std::string& path) {
  const std::string text = report.dump(2) + "\n";
  std::cout << text;
  if (!path.empty()) atomic_write(path, text);
}

// Energy parameters for standalone fields: only phi enters the energy.
ModelParams field_params(const Grid& g, double phi) {
  return ModelParams::from_phi_ell(g.dim(), phi, g.ell(), 0.25 * phi * g.total_measure());
}

void write_mask_csv(const fs::path& path, const BinaryMask& m) {
  std::ostringstream os;
  ScalarField f(m.grid);
  for (std::size_t k = 0; k < f.size(); ++k) f[k] = m.cells[k];
  write_field_csv(os, f);
  atomic_write(path, os.str());
}

// ---------------------------------------------------------------------------

struct SymmetrizeArgs {
  std::string input, output, report;
  int axis = -1;
  bool iterated = false;
  double phi = 0.3;
};

int cmd_symmetrize(const SymmetrizeArgs& a, bool axis_given) {
  const ScalarField u = load_field(a.input);
  const Grid& g = u.grid();
  if (axis_given && (a.axis < 0 || a.axis >= g.dim())) throw ConfigError("axis out of range for this field");
  const ScalarField us = axis_given ? steiner_axis(u, a.axis) : iterated_steiner(u);
  save_field(a.output, us);

  const ModelParams p = field_params(g, a.phi);
  const double E0 = ch_energy(u, p);
  const double E1 = ch_energy(us, p);
  const ShiftAlignment al = shift_align(u, us);
  const std::uint64_t h0 = sorted_values_hash(u);
  const std::uint64_t h1 = sorted_values_hash(us);
  json r;
  r["command"] = "symmetrize";
  r["mode"] = axis_given ? "axis" : "iterated";
  if (axis_given) r["axis"] = a.axis;
  r["grid"] = {{"dim", g.dim()}, {"n", g.n()}, {"ell", g.ell()}};
  r["phi"] = a.phi;
  r["energy_before"] = E0;
  r["energy_after"] = E1;
  r["energy_delta"] = E1 - E0;
  r["hash_before"] = hex64(h0);
  r["hash_after"] = hex64(h1);
  r["hash_equal"] = h0 == h1;
  r["shift"] = offsets_of(al);
  r["aligned_distance"] = al.distance;
  r["relative_distance"] = al.distance / std::max(norm_l2(us), 1e-300);
  emit(r, a.report);
  return h0 == h1 ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------

struct PolarizeArgs {
  std::string input, output, report;
  int axis = -1;
  long eta_index = 0;
  double phi = 0.3;
};

int cmd_polarize(const PolarizeArgs& a) {
  const ScalarField u = load_field(a.input);
  const Grid& g = u.grid();
  const int axis = a.axis < 0 ? g.dim() - 1 : a.axis;
  if (axis >= g.dim()) throw ConfigError("axis out of range for this field");
  const ScalarField t = polarize(u, axis, a.eta_index);
  save_field(a.output, t);

  const ModelParams p = field_params(g, a.phi);
  const double E0 = ch_energy(u, p);
  const double E1 = ch_energy(t, p);
  json checks;
  checks["column_multisets"] = same_column_multisets(u, t, axis);
  checks["per_edge_inequality"] = per_edge_violation(u, t, axis, a.eta_index) < 0;
  checks["idempotent"] = polarize(t, axis, a.eta_index) == t;
  checks["energy_not_increased"] = E1 <= E0 + 1e-13 * std::abs(E0);
  bool ok = true;
  for (const auto& [k, v] : checks.items()) ok = ok && v.get<bool>();
  json r;
  r["command"] = "polarize";
  r["axis"] = axis;
  r["eta_index"] = a.eta_index;
  r["phi"] = a.phi;
  r["energy_before"] = E0;
  r["energy_after"] = E1;
  r["input_dominates_reflection"] = dominates_reflection(u, axis, a.eta_index);
  r["distance_moved"] = distance_l2(u, t);
  r["checks"] = checks;
  r["passed"] = ok;
  emit(r, a.report);
  return ok ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------

struct MinimizeArgs {
  std::string config_file, out;
  std::vector<double> sweep_phi;
  double h_over_phi = 0.0;
};

int cmd_minimize(const MinimizeArgs& a, RunConfig cfg) {
  if (!a.sweep_phi.empty()) {
    int code = kExitOk;
    const std::optional<double> hop = a.h_over_phi > 0.0 ? std::optional<double>(a.h_over_phi) : std::nullopt;
    const json s = run_sweep(cfg, a.sweep_phi, hop, a.out, code);
    std::cout << s.dump(2) << "\n";
    return code;
  }
  const ResolvedRun run = resolve(cfg);
  std::cerr << "minimize: n=" << run.grid.n() << " phi=" << run.params.phi << " ell=" << run.params.ell
            << " omega=" << run.params.omega << "\n";
  const PipelineOutcome po = run_pipeline(run, a.out);
  std::cout << po.report.dump(2) << "\n";
  return po.exit_code;
}

// ---------------------------------------------------------------------------

json comparison_json(const EnergyComparison& c) {
  return {{"energy", c.energy},
          {"energy_symmetrized", c.energy_symmetrized},
          {"energy_gap", c.energy_gap},
          {"aligned_distance", c.aligned_distance},
          {"shift", c.shift},
          {"hash_preserved", c.hash_preserved}};
}

int cmd_gallery(const std::string& name, const fs::path& out, const std::string& report_path) {
  fs::create_directories(out);
  json r;
  r["command"] = "gallery";
  r["name"] = name;
  bool ok = false;
  if (name == "two_bumps") {
    const TwoBumps tb = two_bumps();
    const TwoBumpsReport rep = analyze_two_bumps(tb);
    save_field(out / "two_bumps.txt", tb.u);
    save_field(out / "two_bumps_symmetrized.txt", steiner_axis(tb.u, 1));
    r["comparison"] = comparison_json(rep.comparison);
    r["delta"] = rep.delta;
    r["centres_cells"] = {tb.centre_a, tb.centre_b};
    r["radius"] = tb.radius;
    r["energy_equal"] = rep.energy_equal;
    r["separated"] = rep.separated;
    ok = rep.passed();
  } else if (name == "layer_cake") {
    const ScalarField u = layer_cake();
    const LayerCakeReport rep = analyze_layer_cake(u);
    save_field(out / "layer_cake.txt", u);
    save_field(out / "layer_cake_symmetrized.txt", steiner_axis(u, 1));
    std::vector<double> levels;
    for (int k = 0; k <= 40; ++k) levels.push_back(-0.05 + 0.05 * k);
    std::ostringstream os;
    write_distribution_csv(os, distribution(u, rep.first_singular_column, levels));
    atomic_write(out / "layer_cake_distribution.csv", os.str());
    r["comparison"] = comparison_json(rep.comparison);
    r["max_singular_measure"] = rep.max_singular_measure;
    r["columns_with_singular_mass"] = rep.columns_with_singular_mass;
    r["first_singular_column"] = rep.first_singular_column;
    ok = rep.passed();
  } else if (name == "triangle") {
    const BinaryMask tri = triangle_mask();
    const TriangleReport rep = analyze_triangle(tri);
    write_mask_csv(out / "triangle.csv", tri);
    write_mask_csv(out / "triangle_xy.csv", rep.xy);
    write_mask_csv(out / "triangle_yx.csv", rep.yx);
    r["cells"] = rep.cells;
    r["cells_xy"] = rep.cells_xy;
    r["cells_yx"] = rep.cells_yx;
    r["difference_cells"] = rep.difference_cells;
    r["difference_area"] = rep.difference_area;
    ok = rep.passed();
  } else {
    throw ConfigError("unknown gallery entry '" + name + "' (two_bumps, layer_cake, triangle)");
  }
  r["passed"] = ok;
  emit(r, report_path.empty() ? (out / (name + ".json")).string() : report_path);
  return ok ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------

int cmd_verify(const std::string& suite, const std::string& mutation, const std::string& report_path) {
  PolarizeFn pol = default_polarize();
  if (mutation == "polarize-swap") {
    pol = swapped_polarize();
  } else if (mutation != "none") {
    throw ConfigError("unknown mutation '" + mutation + "' (none, polarize-swap)");
  }
  const auto results = run_suites(suite, pol);
  json r;
  r["command"] = "verify";
  r["suite"] = suite;
  r["mutation"] = mutation;
  r["suites"] = json::array();
  bool ok = true;
  for (const auto& s : results) {
    r["suites"].push_back(to_json(s));
    ok = ok && s.passed();
    for (const auto& c : s.checks) {
      std::cerr << (c.passed ? "PASS " : "FAIL ") << s.suite << "/" << c.name << ": " << c.detail << "\n";
    }
  }
  r["passed"] = ok;
  emit(r, report_path);
  return ok ? kExitOk : kExitVerification;
}

// ---------------------------------------------------------------------------

struct GeometryArgs {
  std::string input, csv, contours, report;
  std::vector<double> levels{-0.5, 0.0, 0.5};
  double omega = 0.0;
};

int cmd_geometry(const GeometryArgs& a) {
  const ScalarField u = load_field(a.input);
  if (u.grid().dim() != 2) throw ConfigError("geometry needs a 2-dimensional field");
  std::vector<SphericityRow> rows;
  json r;
  r["command"] = "geometry";
  r["levels"] = json::array();
  const double r_omega = a.omega > 0.0 ? std::sqrt(a.omega / std::numbers::pi) : 0.0;
  if (a.omega > 0.0) r["r_omega"] = r_omega;
  for (double eta : a.levels) {
    SphericityRow row;
    row.geometry = level_set_geometry(u, eta);
    row.bonnesen = bonnesen_check(row.geometry);
    row.included = !row.geometry.empty && !row.geometry.full && row.geometry.contained_in_disk;
    if (row.included) {
      row.delta_rho = row.geometry.rho_out - row.geometry.rho_in;
      if (a.omega > 0.0) {
        row.outer_deviation = row.geometry.rho_out - r_omega;
        row.inner_deviation = r_omega - row.geometry.rho_in;
        row.area_deviation = row.geometry.area - a.omega;
      }
    }
    json jr = to_json(row);
    if (a.omega <= 0.0) {
      jr.erase("outer_deviation");
      jr.erase("inner_deviation");
      jr.erase("area_deviation");
    }
    r["levels"].push_back(jr);
    if (!a.contours.empty() && !row.geometry.empty && !row.geometry.full) {
      fs::create_directories(a.contours);
      std::ostringstream os;
      write_contour_csv(os, contour_loops(contour_segments(u, eta), u.grid().period()));
      atomic_write(fs::path(a.contours) / ("contour_eta_" + level_tag(eta) + ".csv"), os.str());
    }
    rows.push_back(row);
  }
  if (!a.csv.empty()) {
    std::ostringstream os;
    write_sphericity_csv(os, rows);
    atomic_write(a.csv, os.str());
  }
  emit(r, a.report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"torsym: Steiner symmetrization, polarization and constrained phase-field minimization on periodic grids"};
  app.require_subcommand(1);

  SymmetrizeArgs sym;
  auto* s_sym = app.add_subcommand("symmetrize", "Steiner-symmetrize a field (one axis or all axes in order)");
  s_sym->add_option("-i,--input", sym.input, "input field file")->required();
  s_sym->add_option("-o,--output", sym.output, "output field file")->required();
  auto* sym_axis = s_sym->add_option("--axis", sym.axis, "symmetrize along this axis only");
  s_sym->add_flag("--iterated", sym.iterated, "symmetrize along every axis, in order (default)")->excludes(sym_axis);
  s_sym->add_option("--phi", sym.phi, "phi used to evaluate the energy")->capture_default_str();
  s_sym->add_option("--report", sym.report, "also write the JSON report here");

  PolarizeArgs pol;
  auto* s_pol = app.add_subcommand("polarize", "two-point rearrangement about a grid-aligned reflection centre");
  s_pol->add_option("-i,--input", pol.input, "input field file")->required();
  s_pol->add_option("-o,--output", pol.output, "output field file")->required();
  s_pol->add_option("--axis", pol.axis, "reflection axis (-1: last)")->capture_default_str();
  s_pol->add_option("--eta-index", pol.eta_index, "reflection centre in half-cell units")->required();
  s_pol->add_option("--phi", pol.phi, "phi used to evaluate the energy")->capture_default_str();
  s_pol->add_option("--report", pol.report, "also write the JSON report here");

  MinimizeArgs mn;
  RunConfig flags;
  double f_phi = 0, f_L = 0, f_xi = 0, f_ell = 0, f_omega = 0, f_omega_fraction = 0;
  auto* s_min = app.add_subcommand("minimize", "constrained minimization with symmetry audit and geometry report");
  s_min->add_option("--config", mn.config_file, "JSON config file; flags override its keys");
  s_min->add_option("--out", mn.out, "output directory")->required();
  auto* o_dim = s_min->add_option("--dim", flags.dim, "dimension");
  auto* o_n = s_min->add_option("--n", flags.n, "cells per axis");
  auto* o_phi = s_min->add_option("--phi", f_phi, "phi");
  auto* o_L = s_min->add_option("--L", f_L, "L");
  auto* o_xi = s_min->add_option("--xi", f_xi, "xi");
  auto* o_ell = s_min->add_option("--ell", f_ell, "half period");
  auto* o_omega = s_min->add_option("--omega", f_omega, "droplet volume");
  auto* o_omf = s_min->add_option("--omega-fraction", f_omega_fraction, "omega as a fraction of phi |T| / 2");
  auto* o_seed = s_min->add_option("--seed", flags.seed, "seed (0: centred droplet)");
  auto* o_noise = s_min->add_option("--noise", flags.noise, "amplitude of the initial perturbation");
  auto* o_tol = s_min->add_option("--tol-g", flags.tol_g, "relative projected-gradient tolerance");
  auto* o_iter = s_min->add_option("--max-iter", flags.max_iter, "iteration cap");
  auto* o_ckpt = s_min->add_option("--checkpoint-every", flags.checkpoint_every, "checkpoint cadence (accepted steps)");
  auto* o_levels = s_min->add_option("--levels", flags.levels, "superlevel values for the geometry report")->delimiter(',');
  auto* o_eta = s_min->add_option("--eta-samples", flags.eta_samples, "reflection centres sampled by the audit");
  s_min->add_option("--sweep-phi", mn.sweep_phi, "run once per phi and fit the sphericity exponents")->delimiter(',');
  s_min->add_option("--h-over-phi", mn.h_over_phi, "with --sweep-phi: pick n per phi so h / phi is this value");

  std::string gallery_name, gallery_out, gallery_report;
  auto* s_gal = app.add_subcommand("gallery", "counterexample gallery");
  s_gal->add_option("name", gallery_name, "two_bumps | layer_cake | triangle")->required();
  s_gal->add_option("--out", gallery_out, "output directory")->required();
  s_gal->add_option("--report", gallery_report, "report path (default <out>/<name>.json)");

  std::string suite = "all", mutation = "none", verify_report;
  auto* s_ver = app.add_subcommand("verify", "run property suites");
  s_ver->add_option("suite", suite, "rearrange | energy | polarization | geometry | all")->capture_default_str();
  s_ver->add_option("--mutation", mutation, "inject a known bug: none | polarize-swap")->capture_default_str();
  s_ver->add_option("--report", verify_report, "also write the JSON report here");

  GeometryArgs geo;
  auto* s_geo = app.add_subcommand("geometry", "superlevel-set geometry of a 2-d field");
  s_geo->add_option("-i,--input", geo.input, "input field file")->required();
  s_geo->add_option("--levels", geo.levels, "superlevel values")->delimiter(',');
  s_geo->add_option("--omega", geo.omega, "reference area for deviations");
  s_geo->add_option("--csv", geo.csv, "sphericity CSV output");
  s_geo->add_option("--contours", geo.contours, "directory for contour CSVs");
  s_geo->add_option("--report", geo.report, "also write the JSON report here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (s_sym->parsed()) return cmd_symmetrize(sym, sym_axis->count() > 0);
    if (s_pol->parsed()) return cmd_polarize(pol);
    if (s_min->parsed()) {
      RunConfig cfg = mn.config_file.empty() ? RunConfig{} : load_config_file(mn.config_file);
      if (o_dim->count()) cfg.dim = flags.dim;
      if (o_n->count()) cfg.n = flags.n;
      if (o_phi->count()) cfg.phi = f_phi;
      if (o_L->count()) cfg.L = f_L;
      if (o_xi->count()) cfg.xi = f_xi;
      if (o_ell->count()) cfg.ell = f_ell;
      if (o_omega->count()) cfg.omega = f_omega;
      if (o_omf->count()) cfg.omega_fraction = f_omega_fraction;
      if (o_seed->count()) cfg.seed = flags.seed;
      if (o_noise->count()) cfg.noise = flags.noise;
      if (o_tol->count()) cfg.tol_g = flags.tol_g;
      if (o_iter->count()) cfg.max_iter = flags.max_iter;
      if (o_ckpt->count()) cfg.checkpoint_every = flags.checkpoint_every;
      if (o_levels->count()) cfg.levels = flags.levels;
      if (o_eta->count()) cfg.eta_samples = flags.eta_samples;
      return cmd_minimize(mn, cfg);
    }
    if (s_gal->parsed()) return cmd_gallery(gallery_name, gallery_out, gallery_report);
    if (s_ver->parsed()) return cmd_verify(suite, mutation, verify_report);
    if (s_geo->parsed()) return cmd_geometry(geo);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const FormatError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
