#pragma once

// Run configuration: JSON file plus command-line overrides, resolved into
// ModelParams and a grid. Any two of (phi, L, xi, ell) fix the other two; a
// third or fourth value must agree to 1e-12 relative or the configuration is
// rejected with the violated relation named.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "torsym/energy.hpp"
#include "torsym/geom.hpp"
#include "torsym/random_fields.hpp"

namespace torsym {

struct RunConfig {
  int dim = 2;
  int n = 128;
  std::optional<double> phi;
  std::optional<double> L;
  std::optional<double> xi;
  std::optional<double> ell;
  std::optional<double> omega;
  std::optional<double> omega_fraction;  // of the maximal droplet volume phi |T| / 2
  std::uint64_t seed = 0;
  double noise = 0.0;
  double tol_g = 1e-8;  // relative to the initial projected-gradient norm
  std::size_t max_iter = 200000;
  std::size_t checkpoint_every = 0;
  std::vector<double> levels{-0.5, 0.0, 0.5};
  std::size_t eta_samples = 16;
};

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{"dim", "n", "phi", "L", "xi", "ell", "omega", "omega_fraction",
                                             "seed", "noise", "tol_g", "max_iter", "checkpoint_every",
                                             "levels", "eta_samples"};
  return keys;
}

/// Overlays the keys present in `j` onto `cfg`. Unknown keys are rejected.
inline void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  const auto& keys = config_keys();
  for (const auto& [key, value] : j.items()) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError("config: unknown key '" + key + "'");
    }
    try {
      if (key == "dim") cfg.dim = value.get<int>();
      else if (key == "n") cfg.n = value.get<int>();
      else if (key == "phi") cfg.phi = value.get<double>();
      else if (key == "L") cfg.L = value.get<double>();
      else if (key == "xi") cfg.xi = value.get<double>();
      else if (key == "ell") cfg.ell = value.get<double>();
      else if (key == "omega") cfg.omega = value.get<double>();
      else if (key == "omega_fraction") cfg.omega_fraction = value.get<double>();
      else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
      else if (key == "noise") cfg.noise = value.get<double>();
      else if (key == "tol_g") cfg.tol_g = value.get<double>();
      else if (key == "max_iter") cfg.max_iter = value.get<std::size_t>();
      else if (key == "checkpoint_every") cfg.checkpoint_every = value.get<std::size_t>();
      else if (key == "levels") cfg.levels = value.get<std::vector<double>>();
      else if (key == "eta_samples") cfg.eta_samples = value.get<std::size_t>();
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config: bad value for '" + key + "': " + e.what());
    }
  }
}

inline RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file '" + path.string() + "'");
  RunConfig cfg;
  try {
    apply_json(cfg, nlohmann::json::parse(is));
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
  return cfg;
}

struct ResolvedRun {
  RunConfig config;
  ModelParams params;
  Grid grid;
  std::vector<double> center;  // droplet centre, a grid point
};

namespace detail {

inline bool close_rel(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(std::abs(b), 1e-300); }

}  // namespace detail

/// Fills in the regime quadruple and omega, checks consistency, builds the grid.
inline ResolvedRun resolve(const RunConfig& cfg) {
  if (cfg.dim < 1 || cfg.dim > kMaxDim) throw ConfigError("dim must be in [1, 3]");
  for (const auto& [name, v] : {std::pair{"phi", cfg.phi}, std::pair{"L", cfg.L}, std::pair{"xi", cfg.xi},
                                std::pair{"ell", cfg.ell}, std::pair{"omega", cfg.omega},
                                std::pair{"omega_fraction", cfg.omega_fraction}}) {
    if (v && !(*v > 0.0 && std::isfinite(*v))) throw ConfigError(std::string(name) + " must be positive");
  }
  if (!(cfg.tol_g > 0.0)) throw ConfigError("tol_g must be positive");
  if (cfg.noise < 0.0) throw ConfigError("noise must be nonnegative");

  const double e = ModelParams::exponent(cfg.dim);
  std::optional<double> phi = cfg.phi, L = cfg.L, xi = cfg.xi, ell = cfg.ell;
  const int given = (phi ? 1 : 0) + (L ? 1 : 0) + (xi ? 1 : 0) + (ell ? 1 : 0);
  if (given == 0) phi = 0.3;
  if (given <= 1 && !xi) xi = mid_range_xi(PotentialSpec::canonical());
  if (given == 1 && xi && !phi && !L && !ell) phi = 0.3;

  // Solve from the first available independent pair, in a fixed preference order.
  if (phi && xi) {
    const double L_v = std::pow(*xi / *phi, 1.0 / e);
    if (L && !detail::close_rel(*L, L_v)) {
      throw ConfigError("regime relation phi = xi L^(-d/(d+1)) violated by the given phi, xi, L");
    }
    L = L_v;
  } else if (phi && L) {
    xi = *phi * std::pow(*L, e);
  } else if (phi && ell) {
    L = 2.0 * *ell / *phi;
    xi = *phi * std::pow(*L, e);
  } else if (xi && L) {
    phi = *xi * std::pow(*L, -e);
  } else if (L && ell) {
    phi = 2.0 * *ell / *L;
    xi = *phi * std::pow(*L, e);
  } else if (xi && ell) {
    // ell = xi L^(1/(d+1)) / 2
    L = std::pow(2.0 * *ell / *xi, cfg.dim + 1.0);
    phi = *xi * std::pow(*L, -e);
  }
  const double ell_v = 0.5 * *phi * *L;
  if (ell && !detail::close_rel(*ell, ell_v)) {
    throw ConfigError("regime relation ell = phi L / 2 violated by the given values");
  }
  if (!detail::close_rel(*phi, *xi * std::pow(*L, -e))) {
    throw ConfigError("regime relation phi = xi L^(-d/(d+1)) violated by the given values");
  }

  ResolvedRun out;
  out.config = cfg;
  out.config.phi = phi;
  out.config.L = L;
  out.config.xi = xi;
  out.config.ell = ell_v;
  const double domain = std::pow(2.0 * ell_v, cfg.dim);
  const double max_volume = 0.5 * *phi * domain;
  double omega = 0.0;
  if (cfg.omega) {
    omega = *cfg.omega;
    if (cfg.omega_fraction && !detail::close_rel(omega, *cfg.omega_fraction * max_volume)) {
      throw ConfigError("omega and omega_fraction disagree (omega_fraction refers to phi |T| / 2)");
    }
  } else {
    omega = cfg.omega_fraction.value_or(0.5) * max_volume;
  }
  out.config.omega = omega;
  out.config.omega_fraction = omega / max_volume;
  out.params = ModelParams::from_phi_L(cfg.dim, *phi, *L, omega);
  out.grid = Grid(cfg.dim, cfg.n, ell_v);

  // Seed 0 centres the droplet at the origin; other seeds pick a grid point.
  out.center.assign(static_cast<std::size_t>(cfg.dim), 0.0);
  if (cfg.seed != 0) {
    Rng rng(cfg.seed);
    for (auto& c : out.center) c = out.grid.coord(static_cast<long>(rng.below(static_cast<std::uint64_t>(cfg.n))));
  }
  return out;
}

/// Even cell count giving h close to `h_over_phi * phi` on a period 2 ell.
inline int n_for_resolution(double ell, double phi, double h_over_phi) {
  if (!(h_over_phi > 0.0)) throw ConfigError("h_over_phi must be positive");
  const double cells = 2.0 * ell / (h_over_phi * phi);
  const long half = std::lround(0.5 * cells);
  if (half < 2 || half > (1L << 14)) throw ConfigError("h_over_phi gives an unusable cell count");
  return static_cast<int>(2 * half);
}

inline nlohmann::json to_json(const RunConfig& c) {
  nlohmann::json j;
  j["dim"] = c.dim;
  j["n"] = c.n;
  const auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j["phi"] = opt(c.phi);
  j["L"] = opt(c.L);
  j["xi"] = opt(c.xi);
  j["ell"] = opt(c.ell);
  j["omega"] = opt(c.omega);
  j["omega_fraction"] = opt(c.omega_fraction);
  j["seed"] = c.seed;
  j["noise"] = c.noise;
  j["tol_g"] = c.tol_g;
  j["max_iter"] = c.max_iter;
  j["checkpoint_every"] = c.checkpoint_every;
  j["levels"] = c.levels;
  j["eta_samples"] = c.eta_samples;
  return j;
}

}  // namespace torsym
