#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>

namespace chainrisk {

using Objective = std::function<double(const Eigen::VectorXd&)>;

struct BfgsOptions {
  int max_iterations = 500;
  double gradient_tolerance = 1e-6; // infinity norm
  double relative_tolerance = 1e-10; // |Δf| / max(1, |f|)
  double fd_step = 1e-5;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  double initial_value = 0.0;
  double gradient_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string reason;
};

/// Central-difference gradient with step h·max(1, |x_i|).
Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double h = 1e-5);

/// Quasi-Newton minimisation with an inverse-Hessian BFGS update, finite-difference
/// gradients and backtracking Armijo line search. The objective may return a large
/// finite penalty outside its domain; the line search backs away from it.
BfgsResult bfgs_minimize(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options = {});

} // namespace chainrisk
