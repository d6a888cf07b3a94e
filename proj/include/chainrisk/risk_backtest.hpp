#pragma once

#include "chainrisk/arma_garchx.hpp"
#include "chainrisk/data_ingest.hpp"

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace chainrisk {

double chi_square_quantile(double probability, double dof);
/// Upper-tail probability P(X > stat) for X ~ chi-square(dof).
double chi_square_p_value(double stat, double dof);

struct KupiecResult {
  double lr_uc = 0.0;
  double p_value = 1.0;
};

/// Unconditional coverage likelihood ratio for x breaches in n days at tail level alpha.
KupiecResult kupiec_test(std::size_t n, std::size_t x, double alpha);

struct ChristoffersenResult {
  double lr_uc = 0.0;
  double lr_ind = 0.0;
  double lr_cc = 0.0;
  double p_value = 1.0; // chi-square(2) on lr_cc
  std::size_t n00 = 0, n01 = 0, n10 = 0, n11 = 0;
};

ChristoffersenResult christoffersen_test(const std::vector<bool>& breaches, double alpha);

/// VaR as a positive loss threshold from a one-step location/scale forecast.
double var_from_forecast(double sigma_next, double mean_next, const InnovationLaw& law, double level);
double var_from_fit(double sigma_next, double mean_next, const ArmaGarchXParams& params, const ModelSpec& spec,
                    double level);

/// A breach is a realised return below the negated VaR threshold.
inline bool is_breach(double var_value, double realized_return) noexcept { return realized_return < -var_value; }

struct VarSeries {
  std::vector<Date> dates;
  double var_level = 0.01;
  std::vector<double> var_value;
  std::vector<double> realized_return;
  std::vector<bool> breach;
  std::vector<double> sigma_forecast;
  std::vector<double> mean_forecast;

  std::size_t size() const noexcept { return dates.size(); }
};

struct VarBacktestReport {
  std::size_t n = 0;
  std::size_t x = 0;
  double alpha = 0.01;
  double expected = 0.0;
  double expected_display = 0.0; // rounded to one decimal
  double lr_uc = 0.0;
  double lr_uc_crit = 0.0;
  double lr_uc_p = 1.0;
  double lr_ind = 0.0;
  double lr_cc = 0.0;
  double lr_cc_crit = 0.0;
  double lr_cc_p = 1.0;
  bool reject_uc = false;
  bool reject_cc = false;
};

/// Kupiec and Christoffersen tests at the 95% confidence level.
VarBacktestReport coverage_report(const std::vector<bool>& breaches, double alpha);

struct BacktestConfig {
  std::size_t window = 250;
  std::size_t refit_every = 7;
  double level = 0.01;
  bool expanding = false;
  FitConfig fit{};
  /// Skip fitting and forecast with these parameters throughout.
  std::optional<ArmaGarchXParams> fixed_params;
};

struct RefitRecord {
  std::size_t index = 0; // forecast index at which the refit happened
  Date date{};
  bool ok = true;
  bool converged = true;
  double loglik = 0.0;
  std::string message;
};

struct BacktestRun {
  VarSeries series;
  std::vector<RefitRecord> refits;
  std::vector<bool> stale_params; // forecast day used parameters from a failed refit fallback
  ArmaGarchXParams last_params;
};

/// Rolling one-day-ahead VaR. Day f is forecast from the trailing window ending
/// at f-1 and the regressor column f. `dates`, `y` and the columns of `x` align.
BacktestRun rolling_backtest(std::span<const Date> dates, std::span<const double> y, const Eigen::MatrixXd& x,
                             const ModelSpec& spec, const BacktestConfig& config);

enum class LongRunVariance { Rectangular, NeweyWest };

struct DmReport {
  double statistic = 0.0;
  double p_value = 1.0;
  std::string loss = "quadratic";
  std::size_t n = 0;
  bool no_difference = false;
};

/// Diebold-Mariano test on d_t = e1² - e2²; positive statistics favour model 2.
DmReport diebold_mariano(std::span<const double> e1, std::span<const double> e2, int horizon = 1,
                         LongRunVariance lrv = LongRunVariance::Rectangular);

} // namespace chainrisk
