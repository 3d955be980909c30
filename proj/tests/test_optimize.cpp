#include <gtest/gtest.h>

#include <cmath>

#include "ctc/optimize.hpp"

using namespace ctc;

namespace {

double rosenbrock(const std::vector<double>& x) {
  return 100 * std::pow(x[1] - x[0] * x[0], 2) + std::pow(1 - x[0], 2);
}

// Data fit in which only the product a*b is determined; c is pinned separately.
double product_fit(const std::vector<double>& x) {
  const double xs[] = {1, 2, 3, 4}, ys[] = {2.1, 3.9, 6.2, 7.7};
  double s = 0;
  for (int i = 0; i < 4; ++i) s += std::pow(ys[i] - x[0] * x[1] * xs[i], 2);
  return s + std::pow(x[2] - 1, 2);
}

}  // namespace

TEST(Minimize, Rosenbrock) {
  OptimizeOptions o;
  o.budget = 4000;
  const auto r = minimize(rosenbrock, {-1.2, 1.0}, {-3, -3}, {3, 3}, o);
  EXPECT_LT(r.loss, 1e-10);
  EXPECT_NEAR(r.x[0], 1.0, 1e-4);
  EXPECT_NEAR(r.x[1], 1.0, 1e-4);
  EXPECT_TRUE(r.converged);
  EXPECT_LE(r.evaluations, o.budget);
}

TEST(Minimize, NelderMeadOnly) {
  OptimizeOptions o;
  o.budget = 3000;
  o.de_fraction = 0;
  const auto r = minimize(rosenbrock, {-1.2, 1.0}, {-3, -3}, {3, 3}, o);
  EXPECT_LT(r.loss, 1e-10);
}

TEST(Minimize, StaysInBox) {
  // Unconstrained minimum at (5, -5) lies outside the box.
  auto f = [](const std::vector<double>& x) { return std::pow(x[0] - 5, 2) + std::pow(x[1] + 5, 2); };
  OptimizeOptions o;
  o.budget = 3000;
  std::vector<std::vector<double>> seen;
  auto g = [&](const std::vector<double>& x) {
    seen.push_back(x);
    return f(x);
  };
  const auto r = minimize(g, {0, 0}, {-1, -1}, {1, 1}, o);
  for (const auto& x : seen)
    for (double v : x) {
      EXPECT_GE(v, -1.0);
      EXPECT_LE(v, 1.0);
    }
  EXPECT_NEAR(r.x[0], 1.0, 1e-5);
  EXPECT_NEAR(r.x[1], -1.0, 1e-5);
}

TEST(Minimize, Deterministic) {
  OptimizeOptions o;
  o.budget = 500;
  const auto a = minimize(rosenbrock, {-1.2, 1.0}, {-3, -3}, {3, 3}, o);
  const auto b = minimize(rosenbrock, {-1.2, 1.0}, {-3, -3}, {3, 3}, o);
  EXPECT_EQ(a.x, b.x);
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.evaluations, b.evaluations);
  o.seed = 2;
  const auto c = minimize(rosenbrock, {-1.2, 1.0}, {-3, -3}, {3, 3}, o);
  EXPECT_NE(a.x, c.x);
}

TEST(Minimize, TargetLossStopsEarly) {
  OptimizeOptions o;
  o.target_loss = 1e-2;
  o.de_fraction = 0;
  const auto r = minimize(rosenbrock, {-1.2, 1.0}, {-3, -3}, {3, 3}, o);
  EXPECT_LE(r.loss, 1e-2);
  EXPECT_TRUE(r.converged);
  EXPECT_LT(r.evaluations, 1000u);

  o.target_loss = 0.5;
  const auto at_start = minimize([](const std::vector<double>&) { return 0.1; }, {0.0}, {-1}, {1}, o);
  EXPECT_EQ(at_start.evaluations, 1u);
  EXPECT_EQ(at_start.x, std::vector<double>{0.0});
}

TEST(Minimize, BudgetExhaustion) {
  OptimizeOptions o;
  o.budget = 40;
  const auto r = minimize(rosenbrock, {-1.2, 1.0}, {-3, -3}, {3, 3}, o);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.evaluations, o.budget + 2);  // a Nelder-Mead shrink may finish its step
  EXPECT_LE(r.loss, rosenbrock({-1.2, 1.0}));
  ASSERT_GE(r.trace.size(), 2u);
  for (std::size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].loss, r.trace[i - 1].loss);
}

TEST(Minimize, NanTreatedAsInfinite) {
  auto f = [](const std::vector<double>& x) { return x[0] > 0.5 ? std::nan("") : (x[0] - 0.3) * (x[0] - 0.3); };
  OptimizeOptions o;
  o.budget = 1000;
  const auto r = minimize(f, {0.0}, {-1}, {1}, o);
  EXPECT_NEAR(r.x[0], 0.3, 1e-5);
  EXPECT_TRUE(std::isfinite(r.loss));
}

TEST(Minimize, RejectsBadBox) {
  EXPECT_THROW(minimize(rosenbrock, {0, 0}, {-1}, {1, 1}), ValidationError);
  EXPECT_THROW(minimize(rosenbrock, {2, 0}, {-1, -1}, {1, 1}), ValidationError);
  EXPECT_THROW(minimize(rosenbrock, {0, 0}, {1, -1}, {-1, 1}), ValidationError);
  OptimizeOptions o;
  o.budget = 3;
  EXPECT_THROW(minimize(rosenbrock, {0, 0}, {-1, -1}, {1, 1}, o), ValidationError);
}

TEST(Identifiability, WellPosedQuadratic) {
  auto f = [](const std::vector<double>& x) { return x[0] * x[0] + 2 * x[1] * x[1] + 0.5 * x[0] * x[1]; };
  const auto id = identifiability(f, {0, 0}, {"a", "b"});
  EXPECT_TRUE(id.identifiable);
  EXPECT_TRUE(id.correlated.empty());
  ASSERT_EQ(id.eigenvalues.size(), 2u);
  // Hessian [[2, 0.5], [0.5, 4]].
  EXPECT_NEAR(id.eigenvalues[0], 3 - std::sqrt(1.25), 1e-5);
  EXPECT_NEAR(id.eigenvalues[1], 3 + std::sqrt(1.25), 1e-5);
  EXPECT_THROW(identifiability(f, {0, 0}, {"a"}), ValidationError);
}

TEST(Identifiability, ProductRidgeFlagged) {
  OptimizeOptions o;
  o.budget = 6000;
  const auto r = minimize(product_fit, {1.0, 1.0, 0.0}, {0.2, 0.2, -3}, {5, 5, 3}, o);
  // Profile over the product c = a*b: least squares slope through the origin.
  const double xs[] = {1, 2, 3, 4}, ys[] = {2.1, 3.9, 6.2, 7.7};
  double sxy = 0, sxx = 0, syy = 0;
  for (int i = 0; i < 4; ++i) {
    sxy += xs[i] * ys[i];
    sxx += xs[i] * xs[i];
    syy += ys[i] * ys[i];
  }
  const double profile_min = syy - sxy * sxy / sxx;
  EXPECT_NEAR(r.loss, profile_min, 1e-8);
  EXPECT_NEAR(r.x[0] * r.x[1], sxy / sxx, 1e-5);

  const auto id = identifiability(product_fit, r.x, {"a", "b", "c"});
  EXPECT_FALSE(id.identifiable);
  ASSERT_EQ(id.correlated.size(), 1u);
  EXPECT_EQ(id.correlated[0], (std::pair<std::string, std::string>{"a", "b"}));
  ASSERT_EQ(id.weak_directions.size(), 1u);
  EXPECT_LT(std::abs(id.weak_directions[0][2]), 1e-3);
}
