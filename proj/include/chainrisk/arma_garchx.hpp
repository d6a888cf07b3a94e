#pragma once

#include "chainrisk/optimizer.hpp"
#include "chainrisk/skew_t.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainrisk {

inline constexpr double kSigma2Floor = 1e-12;
inline constexpr double kPenaltyNll = 1e10;

/// ARMA(p,q) mean with GARCH(1,1) variance and k exogenous variance regressors.
struct ModelSpec {
  int p = 0;
  int q = 0;
  int k = 0;
  Innovation distribution = Innovation::SkewT;

  /// Number of free parameters under this spec.
  int parameter_count() const noexcept;
  void validate() const;
};

struct ArmaGarchXParams {
  double mu = 0.0;
  std::vector<double> phi;   // AR, length p
  std::vector<double> theta; // MA, length q
  double alpha0 = 1e-4;
  double alpha1 = 0.05;
  double beta = 0.9;
  std::vector<double> beta_x; // length k, sign unconstrained
  double nu = 8.0;
  double xi = 1.0;

  /// Empty when the parameters satisfy every invariant for `spec`, otherwise the first violation.
  std::string violation(const ModelSpec& spec) const;
  bool valid(const ModelSpec& spec) const { return violation(spec).empty(); }
  InnovationLaw law(const ModelSpec& spec) const;
};

class FitError : public std::runtime_error {
public:
  FitError(const std::string& what, ArmaGarchXParams best, double best_nll)
      : std::runtime_error(what), best_(std::move(best)), best_nll_(best_nll) {}
  const ArmaGarchXParams& best() const noexcept { return best_; }
  double best_nll() const noexcept { return best_nll_; }

private:
  ArmaGarchXParams best_;
  double best_nll_;
};

struct FilterOutput {
  std::vector<double> u;      // mean-equation residuals
  std::vector<double> sigma2; // conditional variances, floored
};

/// Runs the mean and variance recursions over y. `x` is k×T (ignored when k = 0).
/// Pre-sample residuals are zero, pre-sample returns equal the sample mean of y,
/// and the pre-sample variance is the sample variance of y.
FilterOutput filter(std::span<const double> y, const Eigen::MatrixXd& x, const ArmaGarchXParams& params,
                    const ModelSpec& spec);

/// −Σ [ln f(u_t/σ_t) − ln σ_t]; returns kPenaltyNll (plus a distance term) for invalid parameters.
double neg_log_likelihood(std::span<const double> y, const Eigen::MatrixXd& x, const ArmaGarchXParams& params,
                          const ModelSpec& spec);

/// Maps parameters to the unconstrained optimisation space and back. Positive
/// quantities live on a log scale; persistence α₁+β and the α₁ share are logistic.
class ParameterTransform {
public:
  ParameterTransform(const ModelSpec& spec, double y_mean, double y_var);
  Eigen::VectorXd to_unconstrained(const ArmaGarchXParams& params) const;
  ArmaGarchXParams from_unconstrained(const Eigen::VectorXd& theta) const;
  int size() const noexcept { return size_; }

private:
  ModelSpec spec_;
  double y_mean_;
  double y_sd_;
  double y_var_;
  int size_;
};

struct FitConfig {
  int restarts = 5;
  std::uint64_t seed = 1;
  std::size_t min_observations = 50;
  BfgsOptions optimizer{};
  std::optional<ArmaGarchXParams> start;
  double restart_spread = 0.5; // std. dev. of perturbations in unconstrained space
  bool parallel = true;
};

struct FitResult {
  ModelSpec spec;
  ArmaGarchXParams params;
  double loglik = 0.0;
  double initial_nll = 0.0; // NLL at the deterministic starting point
  bool converged = false;
  int iterations = 0;
  int restarts_converged = 0;
  std::string reason;
  std::vector<double> residuals;
  std::vector<double> sigma;
  std::vector<double> std_resid;
  std::vector<double> y; // series the model was fitted to
  double aic = 0.0;
  double bic = 0.0;
};

/// Default starting point for `spec` given the sample moments of y.
ArmaGarchXParams default_start(const ModelSpec& spec, std::span<const double> y);

FitResult fit(std::span<const double> y, const Eigen::MatrixXd& x, const ModelSpec& spec,
              const FitConfig& config = {});

/// Evaluates a fixed parameter set on y without optimising, producing the same summary as fit.
FitResult evaluate(std::span<const double> y, const Eigen::MatrixXd& x, const ModelSpec& spec,
                   const ArmaGarchXParams& params);

/// Simulates T returns. Initial state: residuals zero, returns at the ARMA mean,
/// variance at α₀/(1−α₁−β) (plus the mean exogenous contribution when k > 0).
std::vector<double> simulate(const ArmaGarchXParams& params, const ModelSpec& spec, const Eigen::MatrixXd& x,
                             std::size_t T, std::uint64_t seed);

/// Draws n independent innovations from a zero-mean unit-variance law.
std::vector<double> draw_innovations(const InnovationLaw& law, std::size_t n, std::uint64_t seed);

struct OneStepForecast {
  double sigma = 0.0;
  double sigma2 = 0.0;
  double mean = 0.0;
};

/// One-step-ahead forecast from recent history (most recent value last).
/// `y_recent` needs at least p values and `u_recent` at least max(q, 1); shorter
/// histories are padded with `y_fill` and zero residuals respectively.
OneStepForecast forecast_one_step(const ArmaGarchXParams& params, const ModelSpec& spec,
                                  std::span<const double> y_recent, std::span<const double> u_recent,
                                  double sigma2_last, std::span<const double> x_next, double y_fill = 0.0);

/// Forecast for the day after the fitted sample.
OneStepForecast forecast_sigma(const FitResult& fit, std::span<const double> x_next);

struct AicEntry {
  int p = 0;
  int q = 0;
  double loglik = 0.0;
  double aic = 0.0;
  bool converged = false;
};

std::vector<AicEntry> aic_grid(std::span<const double> y, const Eigen::MatrixXd& x, const ModelSpec& base,
                               const std::vector<std::pair<int, int>>& orders, const FitConfig& config = {});

} // namespace chainrisk
