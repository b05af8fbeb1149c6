#pragma once

// Minimisation of the discrete Cahn-Hilliard energy over fields with prescribed
// mean -1 + phi and prescribed volume omega = h^d sum zeta(u).

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "torsym/energy.hpp"
#include "torsym/random_fields.hpp"
#include "torsym/field.hpp"
#include "torsym/rearrange.hpp"

namespace torsym {

struct ConstraintState {
  double mean_target = 0.0;
  double volume_target = 0.0;
  double mean_error = 0.0;
  double volume_error = 0.0;

  static constexpr double kMeanTol = 1e-10;
  static constexpr double kVolumeTol = 1e-8;

  bool satisfied() const {
    return std::abs(mean_error) <= kMeanTol * std::abs(mean_target) &&
           std::abs(volume_error) <= kVolumeTol * volume_target;
  }
};

inline ConstraintState constraint_state(const ScalarField& u, const ModelParams& p) {
  ConstraintState s;
  s.mean_target = p.mean_target();
  s.volume_target = p.omega;
  s.mean_error = mean(u) - s.mean_target;
  s.volume_error = volume(u, p.cutoff) - p.omega;
  return s;
}

/// Raised when the two-constraint Newton iteration fails.
class ProjectionError : public NumericalError {
 public:
  ProjectionError(const std::string& what, ScalarField last, double condition)
      : NumericalError(what), last_iterate(std::move(last)), jacobian_condition(condition) {}
  ScalarField last_iterate;
  double jacobian_condition;
};

struct Projection {
  ScalarField field;
  double a = 0.0;
  double b = 0.0;
  int iterations = 0;
};

/// Finds (a, b) with w = u + a + b zeta'(u) satisfying both constraints, by
/// damped 2x2 Newton (at most 50 steps). zeta'(u) is frozen at the input.
inline Projection project_constraints_detailed(const ScalarField& u, const ModelParams& p) {
  const Grid& g = u.grid();
  const double cell = g.cell_measure();
  const ScalarField z = dzeta_field(u, p.cutoff);
  const double mean_z = mean(z);
  const double mt = p.mean_target();
  const double mscale = std::max(std::abs(mt), 1e-300);

  Projection out{u, 0.0, 0.0, 0};
  ScalarField w = u;
  const auto evaluate = [&](double a, double b, ScalarField& into, double& f1, double& f2) {
    for (std::size_t k = 0; k < u.size(); ++k) into[k] = u[k] + a + b * z[k];
    f1 = mean(into) - mt;
    f2 = volume(into, p.cutoff) - p.omega;
  };
  const auto merit = [&](double f1, double f2) {
    const double x = f1 / mscale;
    const double y = f2 / p.omega;
    return x * x + y * y;
  };

  double a = 0.0, b = 0.0, f1 = 0.0, f2 = 0.0;
  evaluate(a, b, w, f1, f2);
  double cond = 0.0;
  for (int it = 0; it <= 50; ++it) {
    const ConstraintState st{mt, p.omega, f1, f2};
    if (st.satisfied()) {
      out.field = std::move(w);
      out.a = a;
      out.b = b;
      out.iterations = it;
      return out;
    }
    if (it == 50) break;
    CompensatedSum j21, j22;
    for (std::size_t k = 0; k < u.size(); ++k) {
      const double dz = p.cutoff.dzeta(w[k]);
      j21 += dz;
      j22 += dz * z[k];
    }
    const double J11 = 1.0;
    const double J12 = mean_z;
    const double J21 = j21.value() * cell;
    const double J22 = j22.value() * cell;
    const double det = J11 * J22 - J12 * J21;
    const double scale = std::abs(J11 * J22) + std::abs(J12 * J21);
    cond = scale > 0.0 ? std::abs(det) / scale : 0.0;
    if (!(std::abs(det) > 1e-14 * scale) || scale == 0.0) {
      throw ProjectionError("project_constraints: singular constraint Jacobian", w, cond);
    }
    const double da = -(J22 * f1 - J12 * f2) / det;
    const double db = -(J11 * f2 - J21 * f1) / det;
    const double m0 = merit(f1, f2);
    double step = 1.0;
    ScalarField trial(g);
    double t1 = 0.0, t2 = 0.0;
    bool improved = false;
    for (int halving = 0; halving < 40; ++halving) {
      evaluate(a + step * da, b + step * db, trial, t1, t2);
      if (merit(t1, t2) < m0) {
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      throw ProjectionError("project_constraints: damped Newton made no progress", w, cond);
    }
    a += step * da;
    b += step * db;
    w = std::move(trial);
    f1 = t1;
    f2 = t2;
  }
  std::ostringstream os;
  os << "project_constraints: no convergence in 50 Newton steps (mean error " << f1
     << ", volume error " << f2 << ")";
  throw ProjectionError(os.str(), w, cond);
}

inline ScalarField project_constraints(const ScalarField& u, const ModelParams& p) {
  return project_constraints_detailed(u, p).field;
}

/// Volume of the d-ball of radius r.
inline double ball_volume(int dim, double r) {
  switch (dim) {
    case 1: return 2.0 * r;
    case 2: return std::numbers::pi * r * r;
    default: return 4.0 / 3.0 * std::numbers::pi * r * r * r;
  }
}

inline double ball_radius(int dim, double vol) {
  switch (dim) {
    case 1: return 0.5 * vol;
    case 2: return std::sqrt(vol / std::numbers::pi);
    default: return std::cbrt(3.0 * vol / (4.0 * std::numbers::pi));
  }
}

/// Minimum-image distance on the torus.
inline double periodic_distance(const Grid& g, std::span<const double> x, std::span<const double> c) {
  double acc = 0.0;
  const double period = g.period();
  for (int a = 0; a < g.dim(); ++a) {
    double d = x[static_cast<std::size_t>(a)] - c[static_cast<std::size_t>(a)];
    d -= period * std::round(d / period);
    acc += d * d;
  }
  return std::sqrt(acc);
}

/// tanh profile of the ball with volume omega around `center`, interface width
/// sqrt(2) phi. Not projected.
inline ScalarField droplet_profile(const Grid& g, const ModelParams& p, std::span<const double> center) {
  const double R = ball_radius(g.dim(), p.omega);
  const double width = std::numbers::sqrt2 * p.phi;
  return sample(g, [&](std::span<const double> x) {
    return std::tanh((R - periodic_distance(g, x, center)) / width);
  });
}

/// Droplet initial state projected onto both constraints. `noise` adds a seeded
/// band-limited perturbation (wave numbers up to 3 per axis, sup norm <= noise)
/// before projection; being smooth, it means the same thing at every n.
inline ScalarField init_droplet(const Grid& g, const ModelParams& p, std::span<const double> center,
                                double noise = 0.0, unsigned long long seed = 0) {
  if (g.dim() != p.dim) throw ConfigError("init_droplet: grid and model dimensions differ");
  if (!(p.omega > 0.0) || !(p.omega < g.total_measure())) {
    throw ConfigError("init_droplet: omega must lie in (0, (2 ell)^d)");
  }
  ScalarField u = droplet_profile(g, p, center);
  if (noise > 0.0) {
    const ScalarField w = band_limited_field(g, seed, 3, noise);
    for (std::size_t k = 0; k < u.size(); ++k) u[k] += w[k];
  }
  const double shift_mean = p.mean_target() - mean(u);
  for (std::size_t k = 0; k < u.size(); ++k) u[k] += shift_mean;
  try {
    return project_constraints(u, p);
  } catch (const ProjectionError& e) {
    throw ConfigError(std::string("init_droplet: requested omega incompatible with the domain (") +
                      e.what() + ")");
  }
}

struct TangentGradient {
  ScalarField field;
  double norm = 0.0;
};

/// Energy gradient with its L2 projection onto span{1, zeta'(u)} removed.
inline TangentGradient projected_gradient(const ScalarField& u, const ModelParams& p) {
  ScalarField g = energy_gradient(u, p);
  const ScalarField z = dzeta_field(u, p.cutoff);
  CompensatedSum s11, s12, s22, b1, b2;
  for (std::size_t k = 0; k < u.size(); ++k) {
    s11 += 1.0;
    s12 += z[k];
    s22 += z[k] * z[k];
    b1 += g[k];
    b2 += g[k] * z[k];
  }
  const double a11 = s11.value(), a12 = s12.value(), a22 = s22.value();
  const double det = a11 * a22 - a12 * a12;
  double c1, c2;
  if (!(det > 1e-12 * a11 * a22) || a22 == 0.0) {
    c1 = b1.value() / a11;
    c2 = 0.0;
  } else {
    c1 = (a22 * b1.value() - a12 * b2.value()) / det;
    c2 = (a11 * b2.value() - a12 * b1.value()) / det;
  }
  for (std::size_t k = 0; k < u.size(); ++k) g[k] -= c1 + c2 * z[k];
  const double nrm = norm_l2(g);
  return {std::move(g), nrm};
}

struct DescentOptions {
  double tol_rel = 1e-8;     // stop when ||P grad|| <= tol_rel * initial
  double tol_abs = 0.0;      // if > 0, overrides tol_rel
  std::size_t max_iter = 200000;
  double tau0 = 0.0;         // 0: 1 / (stiffness estimate)
  double grow = 1.2;
  double shrink = 0.5;
  std::size_t trace_stride = 1;
  std::size_t checkpoint_every = 0;
  std::function<void(std::size_t, const ScalarField&)> checkpoint;
};

struct MinimizeReport {
  std::size_t iterations = 0;
  std::size_t rejected_steps = 0;
  std::vector<double> energy_trace;
  std::vector<double> step_trace;
  Multipliers multipliers;
  double el_residual_norm = 0.0;
  double initial_gradient_norm = 0.0;
  double final_gradient_norm = 0.0;
  double gradient_target = 0.0;
  double final_energy = 0.0;
  ConstraintState constraints;
  bool converged = false;
  std::string stop_reason;
};

struct MinimizeResult {
  ScalarField field;
  MinimizeReport report;
};

/// Projected gradient descent with backtracking. A trial step is accepted when
/// the energy drops; once energy differences sink below the rounding floor of
/// the energy sum, a step is accepted when it does not raise the energy beyond
/// that floor and it reduces the projected gradient norm.
inline MinimizeResult constrained_descent(const ScalarField& u0, const ModelParams& p,
                                          const DescentOptions& opt = {}) {
  const Grid& g = u0.grid();
  require_finite(u0, "constrained_descent: initial state");
  ScalarField u = project_constraints(u0, p);
  double E = ch_energy(u, p);
  TangentGradient gt = projected_gradient(u, p);

  MinimizeReport rep;
  rep.initial_gradient_norm = gt.norm;
  rep.gradient_target = opt.tol_abs > 0.0 ? opt.tol_abs : opt.tol_rel * gt.norm;
  rep.energy_trace.push_back(E);

  double max_g2 = 0.0;
  for (double x : u.values()) max_g2 = std::max(max_g2, std::abs(p.potential.d2G(x)));
  const double stiffness = p.phi * 4.0 * g.dim() / (g.h() * g.h()) + max_g2 / p.phi;
  double tau = opt.tau0 > 0.0 ? opt.tau0 : 1.0 / stiffness;
  const double tau_floor = tau * 1e-14;
  const double noise_scale = 64.0 * std::numeric_limits<double>::epsilon();

  std::size_t accepted = 0;
  std::size_t it = 0;
  rep.stop_reason = "max_iter";
  while (true) {
    if (gt.norm <= rep.gradient_target) {
      rep.converged = true;
      rep.stop_reason = "gradient_tolerance";
      break;
    }
    if (it >= opt.max_iter) break;
    ++it;

    ScalarField trial(g);
    for (std::size_t k = 0; k < u.size(); ++k) trial[k] = u[k] - tau * gt.field[k];
    bool ok = true;
    double E_new = 0.0;
    try {
      trial = project_constraints(trial, p);
      E_new = ch_energy(trial, p);
    } catch (const ProjectionError&) {
      ok = false;
    }
    if (ok && !std::isfinite(E_new)) {
      std::ostringstream os;
      os << "constrained_descent: non-finite energy at iteration " << it << " (tau " << tau
         << ", last energy " << E << ", gradient norm " << gt.norm << ")";
      throw NumericalError(os.str());
    }
    TangentGradient gt_new;
    if (ok) {
      const double noise = noise_scale * std::max(std::abs(E), 1e-300);
      if (E_new < E - noise) {
        gt_new = projected_gradient(trial, p);
      } else if (E_new <= E + noise) {
        gt_new = projected_gradient(trial, p);
        ok = gt_new.norm < gt.norm;
      } else {
        ok = false;
      }
    }
    if (!ok) {
      ++rep.rejected_steps;
      tau *= opt.shrink;
      if (tau < tau_floor) {
        rep.stop_reason = "step_underflow";
        break;
      }
      continue;
    }
    u = std::move(trial);
    E = E_new;
    gt = std::move(gt_new);
    ++accepted;
    if (opt.trace_stride > 0 && accepted % opt.trace_stride == 0) {
      rep.energy_trace.push_back(E);
      rep.step_trace.push_back(tau);
    }
    if (opt.checkpoint && opt.checkpoint_every > 0 && accepted % opt.checkpoint_every == 0) {
      opt.checkpoint(accepted, u);
    }
    tau *= opt.grow;
  }
  rep.iterations = it;
  rep.final_energy = E;
  rep.final_gradient_norm = gt.norm;
  rep.multipliers = fit_multipliers(u, p);
  rep.el_residual_norm = el_residual(u, p, rep.multipliers).norm;
  rep.constraints = constraint_state(u, p);
  return {std::move(u), std::move(rep)};
}

// ---------------------------------------------------------------------------
// Symmetry audit

struct DichotomyEntry {
  long eta_index = 0;
  double dist_fixed = 0.0;      // ||u - T^eta u||
  double dist_reflected = 0.0;  // ||u^eta - T^eta u||
  double relative_min = 0.0;    // min of the two / ||u||
  double energy_gap = 0.0;      // (E(T^eta u) - E(u)) / |E(u)|
};

struct SymmetryAudit {
  std::vector<long> shift;
  double aligned_distance = 0.0;
  double relative_distance = 0.0;
  double max_upper_dy = 0.0;           // max centred dy over the trimmed open upper half
  double monotonicity_threshold = 0.0;
  std::size_t monotonicity_violations = 0;  // trimmed region cells above threshold
  long max_violation_margin = 0;            // for untrimmed violations: max distance in cells from centre/antipode
  std::vector<DichotomyEntry> dichotomy;
  double max_dichotomy = 0.0;
  double min_energy_gap = 0.0;
  ScalarField symmetrized;
  ScalarField aligned;
};

struct AuditOptions {
  int axis = -1;               // polarization / monotonicity axis; -1 = last axis
  std::size_t eta_samples = 16;
  long trim = 2;               // cells excluded at each end of the open upper half
  double mono_factor = 1e-6;   // threshold = mono_factor * (value range) / ell
};

inline std::vector<long> sampled_eta_indices(long n, std::size_t count) {
  std::vector<long> out;
  for (std::size_t i = 0; i < count; ++i) {
    out.push_back(-n + static_cast<long>((2 * static_cast<std::size_t>(n) * i) / count));
  }
  return out;
}

inline SymmetryAudit symmetry_audit(const ScalarField& u, const ModelParams& p, const AuditOptions& opt = {}) {
  const Grid& g = u.grid();
  const int axis = opt.axis < 0 ? g.dim() - 1 : opt.axis;
  const long n = g.n();
  SymmetryAudit out;
  out.symmetrized = iterated_steiner(u);
  const ShiftAlignment al = shift_align(u, out.symmetrized);
  out.shift = offsets_of(al);
  out.aligned_distance = al.distance;
  out.relative_distance = al.distance / std::max(norm_l2(out.symmetrized), 1e-300);
  out.aligned = shift(u, out.shift);

  const auto [lo, hi] = std::minmax_element(u.values().begin(), u.values().end());
  out.monotonicity_threshold = opt.mono_factor * (*hi - *lo) / g.ell();
  out.max_upper_dy = -std::numeric_limits<double>::infinity();
  const ScalarField dy = centered_partial(out.aligned, axis);
  for_each_fiber(g, axis, [&](std::size_t base, std::size_t s) {
    for (long m = 1; m <= n / 2 - 1; ++m) {
      const double v = dy[base + static_cast<std::size_t>(g.wrap(n / 2 + m)) * s];
      const bool trimmed = m > opt.trim && m < n / 2 - opt.trim;
      if (trimmed) {
        out.max_upper_dy = std::max(out.max_upper_dy, v);
        if (v > out.monotonicity_threshold) ++out.monotonicity_violations;
      }
      if (v >= 0.0) {
        out.max_violation_margin = std::max(out.max_violation_margin, std::min(m, n / 2 - m));
      }
    }
  });

  const double unorm = std::max(norm_l2(u), 1e-300);
  const double E = ch_energy(u, p);
  out.min_energy_gap = std::numeric_limits<double>::infinity();
  for (long k : sampled_eta_indices(n, opt.eta_samples)) {
    const ScalarField t = polarize(u, axis, k);
    const ScalarField ur = reflect(u, axis, k);
    DichotomyEntry e;
    e.eta_index = k;
    e.dist_fixed = distance_l2(u, t);
    e.dist_reflected = distance_l2(ur, t);
    e.relative_min = std::min(e.dist_fixed, e.dist_reflected) / unorm;
    e.energy_gap = (ch_energy(t, p) - E) / std::max(std::abs(E), 1e-300);
    out.max_dichotomy = std::max(out.max_dichotomy, e.relative_min);
    out.min_energy_gap = std::min(out.min_energy_gap, e.energy_gap);
    out.dichotomy.push_back(e);
  }
  return out;
}

}  // namespace torsym
