#include "chainrisk/optimizer.hpp"

#include <cmath>

namespace chainrisk {

Eigen::VectorXd numerical_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double step = h * std::max(1.0, std::abs(x(i)));
    probe(i) = x(i) + step;
    const double fp = f(probe);
    probe(i) = x(i) - step;
    const double fm = f(probe);
    probe(i) = x(i);
    g(i) = (fp - fm) / (2.0 * step);
  }
  return g;
}

BfgsResult bfgs_minimize(const Objective& f, Eigen::VectorXd x0, const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  int evals = 0;
  const auto eval = [&](const Eigen::VectorXd& x) {
    ++evals;
    const double v = f(x);
    return std::isfinite(v) ? v : 1e300;
  };
  const auto grad = [&](const Eigen::VectorXd& x) {
    evals += static_cast<int>(2 * n);
    return numerical_gradient(f, x, options.fd_step);
  };

  Eigen::VectorXd x = std::move(x0);
  double fx = eval(x);
  res.initial_value = fx;
  Eigen::VectorXd g = grad(x);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  bool identity_h = true;

  int iter = 0;
  for (; iter < options.max_iterations; ++iter) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (!std::isfinite(gnorm)) {
      res.reason = "non-finite gradient";
      break;
    }
    if (gnorm < options.gradient_tolerance) {
      res.converged = true;
      res.reason = "gradient norm below tolerance";
      break;
    }

    Eigen::VectorXd dir = -H * g;
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      H.setIdentity();
      identity_h = true;
      dir = -g;
      slope = -g.squaredNorm();
    }

    // Cap the trial step so a single move never exceeds 10 units in any coordinate.
    double step = 1.0;
    const double max_move = dir.lpNorm<Eigen::Infinity>();
    if (max_move > 10.0) step = 10.0 / max_move;

    double f_new = fx;
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = x + step * dir;
      f_new = eval(x_new);
      if (f_new <= fx + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= ls < 2 ? 0.5 : 0.25;
    }
    if (!accepted) {
      if (!identity_h) {
        H.setIdentity();
        identity_h = true;
        continue;
      }
      res.converged = gnorm < 1e-3;
      res.reason = "line search stalled";
      break;
    }

    const Eigen::VectorXd g_new = grad(x_new);
    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double change = std::abs(fx - f_new);
    x = x_new;
    g = g_new;
    const double f_old = fx;
    fx = f_new;

    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      if (identity_h) {
        H *= sy / yv.squaredNorm();
        identity_h = false;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * yv;
      H += (rho * rho * yv.dot(Hy) + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
    }

    if (change <= options.relative_tolerance * std::max(1.0, std::abs(f_old))) {
      res.converged = true;
      res.reason = "relative objective change below tolerance";
      ++iter;
      break;
    }
  }
  if (iter >= options.max_iterations && res.reason.empty()) res.reason = "iteration limit";

  res.x = std::move(x);
  res.value = fx;
  res.gradient_norm = g.lpNorm<Eigen::Infinity>();
  res.iterations = iter;
  res.evaluations = evals;
  return res;
}

} // namespace chainrisk
