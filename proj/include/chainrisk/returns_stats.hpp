#pragma once

#include "chainrisk/data_ingest.hpp"

#include <Eigen/Dense>

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chainrisk {

class InsufficientDataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class DegenerateSeriesError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class SingularityError : public std::runtime_error {
public:
  SingularityError(const std::string& what, std::string column)
      : std::runtime_error(what), column_(std::move(column)) {}
  const std::string& column() const noexcept { return column_; }

private:
  std::string column_;
};

/// r[t] = ln(P[t+1]/P[t]) dated at day t; L = -r.
struct ReturnSeries {
  std::vector<Date> dates;
  std::vector<double> r;
  std::vector<double> L;
  std::vector<double> r_sq;

  std::size_t size() const noexcept { return r.size(); }
};

ReturnSeries log_returns(const PriceSeries& prices);

struct Standardized {
  std::vector<double> z;
  double mean = 0.0;
  double std = 0.0; // sample standard deviation (n-1)
};

Standardized standardize(std::span<const double> x);

struct OlsReport {
  std::vector<std::string> names; // "(Intercept)" first when fitted with an intercept
  std::vector<double> coef;
  std::vector<double> se;
  std::vector<double> t_value;
  std::vector<double> p_value;
  std::vector<double> residuals;
  std::size_t n = 0;
  std::size_t k = 0; // regressors, excluding the intercept
  double sigma2 = 0.0;
  double r_squared = 0.0;
};

/// Classical least squares of y on the columns of X. Column names label the
/// report and name the offending column when X is rank deficient.
OlsReport ols_fit(std::span<const double> y, const Eigen::MatrixXd& X,
                  const std::vector<std::string>& column_names, bool intercept = true);

/// Significance code for a p-value: "***" < 0.001, "**" < 0.01, "*" < 0.05, "." < 0.1.
std::string significance_stars(double p);

double student_t_two_sided_p(double t, double dof);

struct DensityMoments {
  double mean = 0.0;
  double std_dev = 0.0;  // sample (n-1) standard deviation
  double skewness = 0.0; // m3 / m2^1.5
  double kurtosis = 0.0; // m4 / m2^2, raw (Gaussian = 3)
  std::size_t n = 0;
};

DensityMoments moments(std::span<const double> x);

enum class Tail { Lower, Upper };

/// Subset of `losses` on days whose conditioning value lies strictly beyond the
/// empirical alpha (Lower) or 1 - alpha (Upper) quantile of `conditioning`.
std::vector<double> tail_subset(std::span<const double> losses, std::span<const double> conditioning,
                                double alpha, Tail tail);

DensityMoments conditional_moments(std::span<const double> losses, std::span<const double> conditioning,
                                   double alpha, Tail tail);

/// Type-7 quantile: linear interpolation between order statistics at h = (n-1)q.
double empirical_quantile(std::span<const double> x, double q);

double silverman_bandwidth(std::span<const double> x);

struct DensityCurve {
  std::vector<double> grid;
  std::vector<double> density;
  double bandwidth = 0.0;
};

/// Gaussian kernel density of `sample` on `grid`; bandwidth <= 0 selects Silverman's rule.
DensityCurve gaussian_kde(std::span<const double> sample, std::span<const double> grid, double bandwidth = 0.0);

std::vector<double> linspace(double lo, double hi, std::size_t points);

} // namespace chainrisk
