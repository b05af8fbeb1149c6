#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support.hpp"
#include "torsym/torsym.hpp"

using namespace torsym;
namespace ts = testsupport;

namespace {

ModelParams params_for(const Grid& g, double phi = 0.3) {
  return ModelParams::from_phi_ell(g.dim(), phi, g.ell(), 0.2 * phi * g.total_measure());
}

}  // namespace

TEST(Dirichlet, ConstantIsZero) {
  EXPECT_EQ(dirichlet_energy(ScalarField(Grid(2, 16, 1.0), 0.7)), 0.0);
  EXPECT_EQ(dirichlet_energy(ScalarField(Grid(3, 8, 2.0), -1.0)), 0.0);
}

TEST(Dirichlet, SineMatchesContinuum) {
  // int_{-l}^{l} |d/dx sin(pi x / l)|^2 dx = pi^2 / l
  const double ell = 1.3;
  const Grid g(1, 128, ell);
  const ScalarField u = sample(g, [&](double x) { return std::sin(std::numbers::pi * x / ell); });
  const double exact = std::numbers::pi * std::numbers::pi / ell;
  EXPECT_NEAR(dirichlet_energy(u), exact, 0.01 * exact);
}

TEST(Dirichlet, ReflectAndShiftInvariant) {
  const Grid g(2, 24, 1.0);
  for (std::uint64_t s = 0; s < 9; ++s) {
    const ScalarField u = ts::random_field(g, s);
    const double D = dirichlet_energy(u);
    for (long eta : {-7L, 0L, 13L, 24L}) {
      EXPECT_NEAR(dirichlet_energy(reflect(u, 1, eta)), D, 1e-13 * D);
      EXPECT_NEAR(dirichlet_energy(reflect(u, 0, eta)), D, 1e-13 * D);
    }
    const std::vector<long> off{5, 17};
    EXPECT_NEAR(dirichlet_energy(shift(u, off)), D, 1e-13 * D);
  }
}

TEST(ChEnergy, PureStates) {
  const Grid g(2, 16, 1.5);
  const ModelParams p = params_for(g);
  EXPECT_EQ(ch_energy(ScalarField(g, -1.0), p), 0.0);
  EXPECT_EQ(ch_energy(ScalarField(g, 1.0), p), 0.0);
  // G(0) = 1/4 everywhere.
  EXPECT_NEAR(ch_energy(ScalarField(g, 0.0), p), std::pow(2 * 1.5, 2) / (4 * 0.3), 1e-12);
}

TEST(Volume, ExtremesAndRearrangementInvariance) {
  const Grid g(2, 32, 1.0);
  const CutoffSpec c = CutoffSpec::from_phi(0.3);
  EXPECT_NEAR(volume(ScalarField(g, 1.0), c), 4.0, 1e-13);
  EXPECT_EQ(volume(ScalarField(g, -1.0), c), 0.0);
  for (std::uint64_t s = 0; s < 9; ++s) {
    const ScalarField u = ts::random_field(g, 40 + s);
    const double V = volume(u, c);
    EXPECT_NEAR(volume(iterated_steiner(u), c), V, 1e-13 * std::max(1.0, V));
    EXPECT_NEAR(volume(polarize(u, 1, 9), c), V, 1e-13 * std::max(1.0, V));
  }
}

TEST(Volume, SupportCheck) {
  const Grid g(2, 8, 1.0);
  const CutoffSpec c = CutoffSpec::from_phi(0.3);
  EXPECT_TRUE(support_check(ScalarField(g, -1.0), c));
  EXPECT_FALSE(support_check(ScalarField(g, 1.0 - 1.5 * std::cbrt(0.3)), c));
  ScalarField u(g, 1.0 - 1.5 * std::cbrt(0.3));
  u[5] = 1.0;
  EXPECT_TRUE(support_check(u, c));
}

TEST(Cutoff, SmoothStepShape) {
  for (double phi : {0.05, 0.2, 0.3}) {
    const CutoffSpec c = CutoffSpec::from_phi(phi);
    EXPECT_NEAR(c.lower, 1.0 - 2.0 * std::cbrt(phi), 1e-15);
    EXPECT_NEAR(c.upper, 1.0 - std::cbrt(phi), 1e-15);
    EXPECT_EQ(c.zeta(c.lower), 0.0);
    EXPECT_EQ(c.zeta(c.upper), 1.0);
    EXPECT_NEAR(c.zeta(0.5 * (c.lower + c.upper)), 0.5, 1e-14);
    double prev = 0.0;
    const double eps = 1e-6;
    for (int k = 1; k < 100; ++k) {
      const double s = c.lower + c.width() * k / 100.0;
      EXPECT_GE(c.zeta(s), prev);
      prev = c.zeta(s);
      EXPECT_NEAR((c.zeta(s + eps) - c.zeta(s - eps)) / (2 * eps), c.dzeta(s), 1e-6 * (1 + c.dzeta(s)));
      EXPECT_NEAR((c.dzeta(s + eps) - c.dzeta(s - eps)) / (2 * eps), c.d2zeta(s),
                  1e-5 * (1 + std::abs(c.d2zeta(s))));
    }
  }
  EXPECT_THROW(CutoffSpec::from_phi(0.0), ConfigError);
}

TEST(Potential, Validate) {
  EXPECT_NO_THROW(PotentialSpec::canonical().validate());
  PotentialSpec bad = PotentialSpec::canonical();
  bad.G = [](double s) { return 0.25 * (1 - s * s) * (1 - s * s) + 0.01; };
  EXPECT_THROW(bad.validate(), ConfigError);
  PotentialSpec wrong = PotentialSpec::canonical();
  wrong.dG = [](double s) { return s * s * s; };
  EXPECT_THROW(wrong.validate(), ConfigError);
  PotentialSpec missing;
  EXPECT_THROW(missing.validate(), ConfigError);
}

TEST(Gradient, VanishesAtPureState) {
  const Grid g(2, 16, 1.0);
  const ScalarField gr = energy_gradient(ScalarField(g, -1.0), params_for(g));
  EXPECT_EQ(norm_linf(gr), 0.0);
}

TEST(Gradient, MatchesFiniteDifferences) {
  const Grid g(2, 32, 1.5);
  const ModelParams p = params_for(g);
  for (std::uint64_t s = 0; s < 20; ++s) {
    const ScalarField u = band_limited_field(g, 200 + 2 * s, 3, 1.2);
    const ScalarField v = band_limited_field(g, 201 + 2 * s, 3, 1.0);
    const double an = inner(energy_gradient(u, p), v);
    EXPECT_NEAR(ts::fd_directional(u, v, p, 1e-5), an, 1e-6 * std::abs(an)) << "seed " << s;
  }
}

TEST(Gradient, ShiftEquivariant) {
  const Grid g(2, 20, 1.0);
  const ModelParams p = params_for(g);
  const std::vector<long> off{3, 11};
  for (std::uint64_t s = 0; s < 6; ++s) {
    const ScalarField u = ts::random_field(g, s);
    EXPECT_EQ(energy_gradient(shift(u, off), p), shift(energy_gradient(u, p), off));
  }
}

TEST(ElResidual, ConstantWithMatchingMultiplier) {
  const Grid g(1, 32, 1.0);
  const ModelParams p = ModelParams::from_phi_ell(1, 0.3, 1.0, 0.3);
  for (double c : {-0.7, -0.2, 0.1}) {
    Multipliers m;
    m.lambda_phi = -p.potential.dG(c) / p.phi;
    EXPECT_LT(el_residual(ScalarField(g, c), p, m).norm, 1e-13);
  }
}

TEST(ElResidual, ReflectEquivariant) {
  const Grid g(2, 20, 1.0);
  const ModelParams p = params_for(g);
  Multipliers m;
  m.lambda_phi = 0.3;
  m.lambda_omega = -0.8;
  for (std::uint64_t s = 0; s < 6; ++s) {
    const ScalarField u = ts::random_field(g, 10 + s);
    const Residual r = el_residual(u, p, m);
    const Residual rr = el_residual(reflect(u, 1, 7), p, m);
    EXPECT_EQ(rr.field, reflect(r.field, 1, 7));
  }
}

TEST(FitMultipliers, RecoversPlantedValues) {
  // u = eps cos(pi x / l) is a discrete eigenfunction: -Lap u = mu u. With
  // dG(s) = phi^2 (-mu s + a + b zeta'(s)) the residual is a + b zeta'(u) +
  // (lambda_phi + lambda_omega zeta'(u)) / phi, zero at lambda = -phi (a, b).
  const double ell = 1.0, phi = 0.3, a = 0.7, b = -0.05;
  const Grid g(1, 64, ell);
  const double k = std::numbers::pi / ell;
  const double mu = 4.0 * std::pow(std::sin(0.5 * k * g.h()), 2) / (g.h() * g.h());
  const ScalarField u = sample(g, [&](double x) { return 0.3 * std::cos(k * x); });
  ModelParams p = ModelParams::from_phi_ell(1, phi, ell, 0.3);
  const CutoffSpec cut = p.cutoff;
  p.potential.dG = [=](double s) { return phi * phi * (-mu * s + a + b * cut.dzeta(s)); };
  const Multipliers m = fit_multipliers(u, p);
  EXPECT_FALSE(m.degenerate);
  EXPECT_NEAR(m.lambda_phi, -phi * a, 1e-9);
  EXPECT_NEAR(m.lambda_omega, -phi * b, 1e-9);
  EXPECT_LT(el_residual(u, p, m).norm, 1e-8);
}

TEST(FitMultipliers, DegenerateWhenCutoffInactive) {
  const Grid g(2, 16, 1.0);
  const ModelParams p = params_for(g);
  const ScalarField u = sample(g, [](double x, double y) { return -0.95 + 0.01 * std::cos(x) * std::sin(y); });
  const Multipliers m = fit_multipliers(u, p);
  EXPECT_TRUE(m.degenerate);
  EXPECT_EQ(m.lambda_omega, 0.0);
}

TEST(FitMultipliers, ReflectAndShiftInvariant) {
  const Grid g(2, 24, 1.5);
  const ModelParams p = params_for(g);
  for (std::uint64_t s = 0; s < 6; ++s) {
    const ScalarField u = band_limited_field(g, 60 + s, 3, 0.6);
    const Multipliers m = fit_multipliers(u, p);
    for (const ScalarField& w : {reflect(u, 1, 5), reflect(u, 0, 24), shift(u, std::vector<long>{7, 2})}) {
      const Multipliers mw = fit_multipliers(w, p);
      EXPECT_NEAR(mw.lambda_phi, m.lambda_phi, 1e-10 * std::abs(m.lambda_phi));
      EXPECT_NEAR(mw.lambda_omega, m.lambda_omega, 1e-10 * std::abs(m.lambda_omega));
    }
  }
}

TEST(LinearizedResidual, ConstantIsZero) {
  const Grid g(2, 12, 1.0);
  const ModelParams p = params_for(g);
  EXPECT_EQ(linearized_residual(ScalarField(g, 0.2), p, Multipliers{1.0, 2.0, false}, 0), 0.0);
  EXPECT_EQ(linearized_residual(ScalarField(g, 0.2), p, Multipliers{1.0, 2.0, false}, 1), 0.0);
}

TEST(ChEnergy, SteinerDoesNotIncrease) {
  const Grid g(2, 32, 1.5);
  const ModelParams p = params_for(g);
  for (std::uint64_t s = 0; s < 12; ++s) {
    const ScalarField u = ts::random_field(g, 90 + s);
    const double E = ch_energy(u, p);
    EXPECT_LE(ch_energy(steiner_axis(u, 0), p), E + 1e-12 * std::abs(E));
    EXPECT_LE(ch_energy(steiner_axis(u, 1), p), E + 1e-12 * std::abs(E));
    EXPECT_LE(ch_energy(iterated_steiner(u), p), E + 1e-12 * std::abs(E));
  }
}
