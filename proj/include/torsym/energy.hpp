#pragma once

// Discrete Cahn-Hilliard energy on the torus with a mean constraint and a
// "volume" constraint int zeta(u) = omega, together with the Euler-Lagrange
// residual and Lagrange multiplier fitting.
//
//   E(u)   = (phi/2) * h^d sum |D+ u|^2 + (1/phi) * h^d sum G(u)
//   grad E = -phi * Lap_h u + (1/phi) G'(u)             (per unit cell measure)
//   r(u)   = -Lap_h u + G'(u)/phi^2 + (lambda_phi + lambda_omega zeta'(u))/phi

#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "torsym/field.hpp"

namespace torsym {

struct PotentialSpec {
  std::function<double(double)> G;
  std::function<double(double)> dG;
  std::function<double(double)> d2G;
  std::string name = "custom";

  /// G(s) = (1 - s^2)^2 / 4.
  static PotentialSpec canonical() {
    PotentialSpec p;
    p.G = [](double s) {
      const double q = 1.0 - s * s;
      return 0.25 * q * q;
    };
    p.dG = [](double s) { return s * s * s - s; };
    p.d2G = [](double s) { return 3.0 * s * s - 1.0; };
    p.name = "canonical";
    return p;
  }

  /// Checks G >= 0, G(+-1) = 0 and dG/d2G against central differences on [-2, 2].
  void validate() const {
    if (!G || !dG || !d2G) throw ConfigError("potential: G, dG and d2G must all be set");
    if (std::abs(G(1.0)) > 1e-14 || std::abs(G(-1.0)) > 1e-14) {
      throw ConfigError("potential: G must vanish at +-1");
    }
    const double eps = 1e-5;
    for (int k = 0; k <= 400; ++k) {
      const double s = -2.0 + 0.01 * k;
      if (G(s) < 0.0) throw ConfigError("potential: G must be nonnegative");
      const double fd1 = (G(s + eps) - G(s - eps)) / (2.0 * eps);
      const double fd2 = (dG(s + eps) - dG(s - eps)) / (2.0 * eps);
      if (std::abs(fd1 - dG(s)) > 1e-6 * std::max(1.0, std::abs(dG(s))) ||
          std::abs(fd2 - d2G(s)) > 1e-6 * std::max(1.0, std::abs(d2G(s)))) {
        throw ConfigError("potential: derivative mismatch near s = " + std::to_string(s));
      }
    }
  }
};

/// Quintic smoothstep from 0 at `lower` = 1 - 2 phi^(1/3) to 1 at `upper` = 1 - phi^(1/3).
struct CutoffSpec {
  double phi = 0.0;
  double lower = 0.0;
  double upper = 0.0;

  static CutoffSpec from_phi(double phi) {
    if (!(phi > 0.0)) throw ConfigError("cutoff: phi must be positive");
    CutoffSpec c;
    c.phi = phi;
    const double r = std::cbrt(phi);
    c.lower = 1.0 - 2.0 * r;
    c.upper = 1.0 - r;
    return c;
  }

  double width() const { return upper - lower; }

  double zeta(double s) const {
    if (s <= lower) return 0.0;
    if (s >= upper) return 1.0;
    const double x = (s - lower) / width();
    return x * x * x * (x * (6.0 * x - 15.0) + 10.0);
  }
  double dzeta(double s) const {
    if (s <= lower || s >= upper) return 0.0;
    const double x = (s - lower) / width();
    const double q = x * (1.0 - x);
    return 30.0 * q * q / width();
  }
  double d2zeta(double s) const {
    if (s <= lower || s >= upper) return 0.0;
    const double x = (s - lower) / width();
    return 60.0 * x * (1.0 - x) * (1.0 - 2.0 * x) / (width() * width());
  }
};

/// Model parameters tied together by ell = phi L / 2 and phi = xi L^(-d/(d+1)).
struct ModelParams {
  int dim = 2;
  double phi = 0.0;
  double omega = 0.0;
  double L = 0.0;
  double xi = 0.0;
  double ell = 0.0;
  PotentialSpec potential = PotentialSpec::canonical();
  CutoffSpec cutoff;

  static double exponent(int dim) { return static_cast<double>(dim) / (dim + 1); }

  static ModelParams from_phi_xi(int dim, double phi, double xi, double omega) {
    if (!(phi > 0.0) || !(xi > 0.0)) throw ConfigError("phi and xi must be positive");
    ModelParams p;
    p.dim = dim;
    p.phi = phi;
    p.xi = xi;
    p.L = std::pow(xi / phi, 1.0 / exponent(dim));
    p.ell = 0.5 * phi * p.L;
    p.omega = omega;
    p.cutoff = CutoffSpec::from_phi(phi);
    p.validate();
    return p;
  }

  static ModelParams from_phi_L(int dim, double phi, double L, double omega) {
    if (!(phi > 0.0) || !(L > 0.0)) throw ConfigError("phi and L must be positive");
    ModelParams p;
    p.dim = dim;
    p.phi = phi;
    p.L = L;
    p.xi = phi * std::pow(L, exponent(dim));
    p.ell = 0.5 * phi * L;
    p.omega = omega;
    p.cutoff = CutoffSpec::from_phi(phi);
    p.validate();
    return p;
  }

  /// Convenience for grids of a given half period: L = 2 ell / phi.
  static ModelParams from_phi_ell(int dim, double phi, double ell, double omega) {
    if (!(ell > 0.0)) throw ConfigError("ell must be positive");
    return from_phi_L(dim, phi, 2.0 * ell / phi, omega);
  }

  static ModelParams from_xi_L(int dim, double xi, double L, double omega) {
    if (!(xi > 0.0) || !(L > 0.0)) throw ConfigError("xi and L must be positive");
    return from_phi_xi(dim, xi * std::pow(L, -exponent(dim)), xi, omega);
  }

  double mean_target() const { return -1.0 + phi; }
  double domain_measure() const { return std::pow(2.0 * ell, dim); }
  /// Volume of a sharp droplet carrying all of the excess mass phi |T|: phi |T| / 2.
  double max_droplet_volume() const { return 0.5 * phi * domain_measure(); }

  void validate() const {
    const auto rel = [](double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); };
    if (rel(ell, 0.5 * phi * L) > 1e-12) {
      throw ConfigError("regime relation ell = phi L / 2 violated");
    }
    if (rel(phi, xi * std::pow(L, -exponent(dim))) > 1e-12) {
      throw ConfigError("regime relation phi = xi L^(-d/(d+1)) violated");
    }
    if (!(omega > 0.0) || !(omega < domain_measure())) {
      throw ConfigError("omega must lie in (0, (2 ell)^d)");
    }
    if (cutoff.phi != phi) throw ConfigError("cutoff built for a different phi");
  }
};

struct Multipliers {
  double lambda_phi = 0.0;
  double lambda_omega = 0.0;
  bool degenerate = false;  // normal matrix near-singular; lambda_omega forced to 0
};

/// h^d * sum over cells and axes of the squared forward difference.
inline double dirichlet_energy(const ScalarField& u) {
  const Grid& g = u.grid();
  CompensatedSum acc;
  const double inv_h = 1.0 / g.h();
  for (int a = 0; a < g.dim(); ++a) {
    for_each_axis_pair(g, a, [&](std::size_t k, std::size_t kp, std::size_t) {
      const double d = (u[kp] - u[k]) * inv_h;
      acc += d * d;
    });
  }
  return acc.value() * g.cell_measure();
}

inline double potential_energy(const ScalarField& u, const PotentialSpec& pot) {
  CompensatedSum acc;
  for (double x : u.values()) acc += pot.G(x);
  return acc.value() * u.grid().cell_measure();
}

inline double ch_energy(const ScalarField& u, const ModelParams& p) {
  return 0.5 * p.phi * dirichlet_energy(u) + potential_energy(u, p.potential) / p.phi;
}

/// h^d * sum zeta(u).
inline double volume(const ScalarField& u, const CutoffSpec& c) {
  CompensatedSum acc;
  for (double x : u.values()) acc += c.zeta(x);
  return acc.value() * u.grid().cell_measure();
}

/// True iff zeta'(u) vanishes on at least one cell.
inline bool support_check(const ScalarField& u, const CutoffSpec& c) {
  for (double x : u.values()) {
    if (c.dzeta(x) == 0.0) return true;
  }
  return false;
}

/// L2 variational derivative of ch_energy: -phi Lap_h u + G'(u)/phi.
inline ScalarField energy_gradient(const ScalarField& u, const ModelParams& p) {
  ScalarField lap = laplacian(u);
  ScalarField out(u.grid());
  for (std::size_t k = 0; k < u.size(); ++k) out[k] = -p.phi * lap[k] + p.potential.dG(u[k]) / p.phi;
  return out;
}

inline ScalarField dzeta_field(const ScalarField& u, const CutoffSpec& c) {
  return map_values(u, [&](double x) { return c.dzeta(x); });
}

struct Residual {
  ScalarField field;
  double norm = 0.0;
};

inline Residual el_residual(const ScalarField& u, const ModelParams& p, const Multipliers& m) {
  ScalarField lap = laplacian(u);
  Residual r{ScalarField(u.grid()), 0.0};
  const double inv_phi = 1.0 / p.phi;
  for (std::size_t k = 0; k < u.size(); ++k) {
    r.field[k] = -lap[k] + p.potential.dG(u[k]) * inv_phi * inv_phi +
                 inv_phi * (m.lambda_phi + m.lambda_omega * p.cutoff.dzeta(u[k]));
  }
  r.norm = norm_l2(r.field);
  return r;
}

/// Least-squares multipliers minimising ||el_residual||_2. When the normal
/// matrix of {1, zeta'(u)} is near-singular the fit is flagged degenerate and
/// lambda_omega is set to 0.
inline Multipliers fit_multipliers(const ScalarField& u, const ModelParams& p) {
  const ScalarField lap = laplacian(u);
  const double inv_phi = 1.0 / p.phi;
  CompensatedSum s11, s12, s22, b1, b2;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double base = -lap[k] + p.potential.dG(u[k]) * inv_phi * inv_phi;
    const double z = p.cutoff.dzeta(u[k]);
    s11 += 1.0;
    s12 += z;
    s22 += z * z;
    b1 += base;
    b2 += base * z;
  }
  // Residual = base + (1/phi) (lambda_phi * 1 + lambda_omega * z); solve for
  // mu = lambda / phi, then scale back.
  const double a11 = s11.value();
  const double a12 = s12.value();
  const double a22 = s22.value();
  const double det = a11 * a22 - a12 * a12;
  Multipliers m;
  if (!(det > 1e-12 * a11 * a22) || a22 == 0.0) {
    m.degenerate = true;
    m.lambda_phi = -p.phi * b1.value() / a11;
    m.lambda_omega = 0.0;
    return m;
  }
  const double mu1 = -(a22 * b1.value() - a12 * b2.value()) / det;
  const double mu2 = -(a11 * b2.value() - a12 * b1.value()) / det;
  m.lambda_phi = p.phi * mu1;
  m.lambda_omega = p.phi * mu2;
  return m;
}

/// ||-Lap_h w + f'(u) w||_2 with w the centred partial of u along `axis` and
/// f'(u) = G''(u)/phi^2 + (lambda_omega/phi) zeta''(u).
inline double linearized_residual(const ScalarField& u, const ModelParams& p, const Multipliers& m,
                                  int axis) {
  const ScalarField w = centered_partial(u, axis);
  const ScalarField lap = laplacian(w);
  ScalarField r(u.grid());
  const double inv_phi = 1.0 / p.phi;
  for (std::size_t k = 0; k < u.size(); ++k) {
    const double fp = p.potential.d2G(u[k]) * inv_phi * inv_phi +
                      m.lambda_omega * inv_phi * p.cutoff.d2zeta(u[k]);
    r[k] = -lap[k] + fp * w[k];
  }
  return norm_l2(r);
}

}  // namespace torsym
