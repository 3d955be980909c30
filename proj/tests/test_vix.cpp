#include <gtest/gtest.h>

#include <random>

#include "ctc/simulation.hpp"
#include "ctc/vix.hpp"
#include "models.hpp"
#include "oracles.hpp"

using namespace ctc;

TEST(VixSpot, OrdinaryHestonClosedForm) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> uk(0.1, 20.0), ut(0.01, 0.5), uu(0.001, 1.0);
  for (int i = 0; i < 100; ++i) {
    ModelSpec s = fixtures::heston();
    s.u.kappa = uk(gen);
    s.u.theta = ut(gen);
    const double u = uu(gen), k = s.u.kappa, th = s.u.theta, tau = kVixTenor;
    const double want = th + (u - th) * (1 - std::exp(-k * tau)) / (k * tau);
    const double got = vix_spot_ordinary(s, u);
    EXPECT_NEAR(got * got, want, 1e-10);
  }
}

TEST(VixSpot, ScalesWithTheBrownianVariance) {
  ModelSpec s = fixtures::heston();
  const double base = vix_spot_ordinary(s, 0.04);
  s.base = BrownianExponent{2.0};
  EXPECT_NEAR(vix_spot_ordinary(s, 0.04), 2.0 * base, 1e-12);
}

TEST(VixSpot, DegenerateClockReducesToOrdinary) {
  const ModelSpec h = fixtures::heston();
  const ModelSpec d = fixtures::degenerate_composite(h);
  const VixAffine affine(d);
  for (double u : {0.01, 0.04, 0.3}) EXPECT_NEAR(affine.vix(u, 1.0), vix_spot_ordinary(h, u), 1e-10);
}

TEST(VixSpot, AffineFormulaMatchesLaplaceDerivative) {
  for (const ModelSpec& s : {fixtures::composite_heston(), fixtures::composite_jh(), fixtures::jh()}) {
    const VixAffine affine(s);
    for (double u : {0.02, 0.1})
      for (double v : {0.5, 1.3}) {
        const double x = affine.radicand(u, v);
        EXPECT_NEAR(x, vix_squared_laplace(s, u, v), 1e-6 * x) << to_string(s.kind);
      }
  }
}

TEST(VixSpot, RejectsCompositeInTheOrdinaryFormula) {
  EXPECT_THROW(vix_spot_ordinary(fixtures::composite_heston(), 0.02), ValidationError);
  ModelSpec s = fixtures::composite_heston();
  s.rho_u = -0.3;
  s.rho_v = 0.3;
  EXPECT_THROW(VixAffine{s}, ValidationError);
}

TEST(VixFourier, MatchesQuadratureOverTheCirLaw) {
  const ModelSpec s = fixtures::heston();
  const VixLinear lin = vix_linear(s);
  const double T = 0.25;
  for (double K : {0.2, 0.27, 0.4}) {
    const double want = oracle::cir_sqrt_call(s.u.kappa, s.u.theta, s.u.sigma, s.u0, T, lin.a_coef, lin.b_coef, K);
    EXPECT_NEAR(vix_call_fourier_ordinary(s, K, T), want, 2e-6) << K;
  }
}

TEST(VixFourier, AgreesWithExactSimulation) {
  const ModelSpec s = fixtures::heston();
  const double T = 0.5;
  SimPlan plan;
  plan.paths = 20000;
  plan.seed = 5;
  const std::vector<double> strikes{0.2, 0.25, 0.3};
  const auto mc = price_vix_options_exact(s, strikes, T, 0.01, plan);
  for (std::size_t i = 0; i < strikes.size(); ++i) {
    const double f = vix_call_fourier_ordinary(s, strikes[i], T, 0.01);
    EXPECT_LT(std::abs(f - mc.prices[i].value), 4 * mc.prices[i].std_error) << strikes[i];
  }
}

TEST(VixFourier, DiscountsAndRejectsCompositeModels) {
  const ModelSpec s = fixtures::heston();
  EXPECT_NEAR(vix_call_fourier_ordinary(s, 0.25, 0.5, 0.05), std::exp(-0.025) * vix_call_fourier_ordinary(s, 0.25, 0.5),
              1e-8);
  EXPECT_THROW(vix_call_fourier_ordinary(fixtures::composite_heston(), 0.25, 0.5), ValidationError);
}

TEST(SmallTau, DifferenceToLeadingTermIsFirstOrder) {
  const ModelSpec s = fixtures::composite_heston();
  std::vector<double> taus;
  for (int d = 1; d <= 30; ++d) taus.push_back(d / 365.0);
  const SmallTauReport r = smalltau_diagnostics(s, 0.02, 1.3, taus);
  EXPECT_GT(r.r_squared, 0.99);
  for (std::size_t i = 0; i < taus.size(); ++i) EXPECT_LE(std::abs(r.difference[i]), 1.1 * r.first_order_slope * taus[i]);

  for (double& t : taus) t /= 100;
  const SmallTauReport tiny = smalltau_diagnostics(s, 0.02, 1.3, taus);
  EXPECT_NEAR(tiny.difference.front() / taus.front(), tiny.first_order_slope, 1e-3 * tiny.first_order_slope);
  EXPECT_NEAR(tiny.slope, tiny.first_order_slope, 0.01 * tiny.first_order_slope);
}
