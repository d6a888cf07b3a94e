#include "chainrisk/optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace chainrisk;

TEST(NumericalGradient, QuadraticIsExact) {
  const Objective f = [](const Eigen::VectorXd& x) { return 3 * x(0) * x(0) + x(0) * x(1) + 0.5 * x(1) * x(1); };
  Eigen::VectorXd x(2);
  x << 1.5, -2.0;
  const auto g = numerical_gradient(f, x);
  EXPECT_NEAR(g(0), 6 * 1.5 - 2.0, 1e-8);
  EXPECT_NEAR(g(1), 1.5 - 2.0, 1e-8);
}

TEST(Bfgs, Rosenbrock) {
  const Objective f = [](const Eigen::VectorXd& x) {
    return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  const auto r = bfgs_minimize(f, x0);
  EXPECT_TRUE(r.converged) << r.reason;
  EXPECT_NEAR(r.x(0), 1.0, 1e-4);
  EXPECT_NEAR(r.x(1), 1.0, 1e-4);
  EXPECT_LE(r.value, r.initial_value);
}

TEST(Bfgs, ShiftedQuadraticInFiveDimensions) {
  const Objective f = [](const Eigen::VectorXd& x) {
    double s = 0.0;
    for (int i = 0; i < x.size(); ++i) s += (i + 1) * std::pow(x(i) - i, 2);
    return s;
  };
  const auto r = bfgs_minimize(f, Eigen::VectorXd::Zero(5));
  EXPECT_TRUE(r.converged);
  for (int i = 0; i < 5; ++i) EXPECT_NEAR(r.x(i), i, 1e-5);
}

TEST(Bfgs, BacksAwayFromPenaltyRegion) {
  // minimum at the boundary-adjacent point x = 1; outside x > 2 returns a penalty
  const Objective f = [](const Eigen::VectorXd& x) {
    if (x(0) > 2.0) return 1e10;
    return std::pow(x(0) - 1.0, 2);
  };
  Eigen::VectorXd x0(1);
  x0 << -5.0;
  const auto r = bfgs_minimize(f, x0);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_LT(r.value, 1e-9);
}

TEST(Bfgs, NeverWorseThanStart) {
  const Objective f = [](const Eigen::VectorXd& x) { return std::abs(x(0)) + std::cos(3 * x(1)); };
  Eigen::VectorXd x0(2);
  x0 << 0.3, 0.2;
  const auto r = bfgs_minimize(f, x0);
  EXPECT_LE(r.value, r.initial_value);
  EXPECT_GE(r.iterations, 1);
  EXPECT_FALSE(r.reason.empty());
}

TEST(Bfgs, IterationCapReported) {
  const Objective f = [](const Eigen::VectorXd& x) {
    return 100 * std::pow(x(1) - x(0) * x(0), 2) + std::pow(1 - x(0), 2);
  };
  Eigen::VectorXd x0(2);
  x0 << -1.2, 1.0;
  BfgsOptions opts;
  opts.max_iterations = 3;
  const auto r = bfgs_minimize(f, x0, opts);
  EXPECT_FALSE(r.converged);
  EXPECT_LE(r.iterations, 3);
}
