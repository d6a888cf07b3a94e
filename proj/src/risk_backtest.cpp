#include "chainrisk/risk_backtest.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>

namespace chainrisk {

namespace {

// k·ln(p) with the 0·ln0 = 0 convention
double xlogy(double k, double p) { return k == 0.0 ? 0.0 : k * std::log(p); }

} // namespace

double chi_square_quantile(double probability, double dof) {
  return boost::math::quantile(boost::math::chi_squared(dof), probability);
}

double chi_square_p_value(double stat, double dof) {
  if (!(stat > 0.0)) return 1.0;
  if (!std::isfinite(stat)) return 0.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), stat));
}

KupiecResult kupiec_test(std::size_t n, std::size_t x, double alpha) {
  if (n == 0) throw std::invalid_argument("kupiec_test needs at least one day");
  if (x > n) throw std::invalid_argument("breach count exceeds day count");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("VaR level must lie in (0,1)");
  const double nd = static_cast<double>(n), xd = static_cast<double>(x);
  const double phat = xd / nd;
  const double null_ll = xlogy(nd - xd, 1.0 - alpha) + xlogy(xd, alpha);
  const double alt_ll = xlogy(nd - xd, 1.0 - phat) + xlogy(xd, phat);
  KupiecResult r;
  r.lr_uc = std::max(0.0, -2.0 * null_ll + 2.0 * alt_ll);
  r.p_value = chi_square_p_value(r.lr_uc, 1.0);
  return r;
}

ChristoffersenResult christoffersen_test(const std::vector<bool>& breaches, double alpha) {
  if (breaches.size() < 2) throw std::invalid_argument("christoffersen_test needs at least 2 days");
  ChristoffersenResult r;
  for (std::size_t t = 1; t < breaches.size(); ++t) {
    const bool prev = breaches[t - 1], cur = breaches[t];
    if (!prev && !cur) ++r.n00;
    else if (!prev && cur) ++r.n01;
    else if (prev && !cur) ++r.n10;
    else ++r.n11;
  }
  const auto x = static_cast<std::size_t>(std::count(breaches.begin(), breaches.end(), true));
  r.lr_uc = kupiec_test(breaches.size(), x, alpha).lr_uc;

  const double n00 = static_cast<double>(r.n00), n01 = static_cast<double>(r.n01);
  const double n10 = static_cast<double>(r.n10), n11 = static_cast<double>(r.n11);
  const double pi = (n01 + n11) / (n00 + n01 + n10 + n11);
  const double pi01 = n00 + n01 > 0.0 ? n01 / (n00 + n01) : 0.0;
  const double pi11 = n10 + n11 > 0.0 ? n11 / (n10 + n11) : 0.0;
  const double restricted = xlogy(n00 + n10, 1.0 - pi) + xlogy(n01 + n11, pi);
  const double unrestricted = xlogy(n00, 1.0 - pi01) + xlogy(n01, pi01) + xlogy(n10, 1.0 - pi11) + xlogy(n11, pi11);
  r.lr_ind = std::max(0.0, -2.0 * restricted + 2.0 * unrestricted);
  r.lr_cc = r.lr_uc + r.lr_ind;
  r.p_value = chi_square_p_value(r.lr_cc, 2.0);
  return r;
}

double var_from_forecast(double sigma_next, double mean_next, const InnovationLaw& law, double level) {
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("VaR level must lie in (0,1)");
  return -(mean_next + sigma_next * law.quantile(level));
}

double var_from_fit(double sigma_next, double mean_next, const ArmaGarchXParams& params, const ModelSpec& spec,
                    double level) {
  return var_from_forecast(sigma_next, mean_next, params.law(spec), level);
}

VarBacktestReport coverage_report(const std::vector<bool>& breaches, double alpha) {
  VarBacktestReport rep;
  rep.n = breaches.size();
  rep.x = static_cast<std::size_t>(std::count(breaches.begin(), breaches.end(), true));
  rep.alpha = alpha;
  rep.expected = static_cast<double>(rep.n) * alpha;
  rep.expected_display = std::round(rep.expected * 10.0) / 10.0;
  rep.lr_uc_crit = chi_square_quantile(0.95, 1.0);
  rep.lr_cc_crit = chi_square_quantile(0.95, 2.0);
  if (rep.n >= 2) {
    const auto cc = christoffersen_test(breaches, alpha);
    rep.lr_uc = cc.lr_uc;
    rep.lr_ind = cc.lr_ind;
    rep.lr_cc = cc.lr_cc;
    rep.lr_cc_p = cc.p_value;
  } else if (rep.n == 1) {
    rep.lr_uc = kupiec_test(rep.n, rep.x, alpha).lr_uc;
    rep.lr_cc = rep.lr_uc;
    rep.lr_cc_p = chi_square_p_value(rep.lr_cc, 2.0);
  }
  rep.lr_uc_p = chi_square_p_value(rep.lr_uc, 1.0);
  rep.reject_uc = rep.lr_uc > rep.lr_uc_crit;
  rep.reject_cc = rep.lr_cc > rep.lr_cc_crit;
  return rep;
}

BacktestRun rolling_backtest(std::span<const Date> dates, std::span<const double> y, const Eigen::MatrixXd& x,
                             const ModelSpec& spec, const BacktestConfig& config) {
  const std::size_t T = y.size();
  if (dates.size() != T) throw std::invalid_argument("dates and returns differ in length");
  if (spec.k > 0 && (x.rows() != spec.k || x.cols() != static_cast<Eigen::Index>(T)))
    throw std::invalid_argument("exogenous matrix must be k x T");
  if (config.window < 10 || T < config.window + 1)
    throw std::invalid_argument("series of length " + std::to_string(T) + " is too short for window " +
                                std::to_string(config.window));
  if (config.refit_every == 0) throw std::invalid_argument("refit_every must be at least 1");
  if (config.fixed_params) {
    if (const auto why = config.fixed_params->violation(spec); !why.empty())
      throw std::invalid_argument("fixed parameters invalid: " + why);
  }

  BacktestRun run;
  run.series.var_level = config.level;
  ArmaGarchXParams params;
  bool have_params = false;
  bool stale = false;
  std::optional<InnovationLaw> law;

  for (std::size_t f = config.window; f < T; ++f) {
    const std::size_t begin = config.expanding ? 0 : f - config.window;
    const std::size_t len = f - begin;
    const auto y_win = y.subspan(begin, len);
    Eigen::MatrixXd x_win;
    if (spec.k > 0) x_win = x.middleCols(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(len));

    const bool refit_day = (f - config.window) % config.refit_every == 0;
    if (config.fixed_params) {
      if (!have_params) {
        params = *config.fixed_params;
        have_params = true;
        law = params.law(spec);
      }
    } else if (refit_day) {
      RefitRecord rec;
      rec.index = f - config.window;
      rec.date = dates[f];
      try {
        FitConfig fc = config.fit;
        fc.seed = config.fit.seed + rec.index;
        const auto result = fit(y_win, x_win, spec, fc);
        params = result.params;
        rec.converged = result.converged;
        rec.loglik = result.loglik;
        have_params = true;
        stale = false;
        law = params.law(spec);
      } catch (const std::exception& e) {
        rec.ok = false;
        rec.message = e.what();
        if (!have_params) {
          run.refits.push_back(rec);
          throw FitError("first fit failed at " + format_date(dates[f]) + ": " + e.what(), ArmaGarchXParams{},
                         kPenaltyNll);
        }
        stale = true;
      }
      run.refits.push_back(std::move(rec));
    }

    const auto state = filter(y_win, x_win, params, spec);
    std::vector<double> x_next;
    for (int l = 0; l < spec.k; ++l) x_next.push_back(x(l, static_cast<Eigen::Index>(f)));
    double y_fill = 0.0;
    for (double v : y_win) y_fill += v;
    y_fill /= static_cast<double>(len);
    const auto fc = forecast_one_step(params, spec, y_win, state.u, state.sigma2.back(), x_next, y_fill);
    const double var = var_from_forecast(fc.sigma, fc.mean, *law, config.level);

    run.series.dates.push_back(dates[f]);
    run.series.var_value.push_back(var);
    run.series.realized_return.push_back(y[f]);
    run.series.breach.push_back(is_breach(var, y[f]));
    run.series.sigma_forecast.push_back(fc.sigma);
    run.series.mean_forecast.push_back(fc.mean);
    run.stale_params.push_back(stale);
  }
  run.last_params = params;
  return run;
}

DmReport diebold_mariano(std::span<const double> e1, std::span<const double> e2, int horizon, LongRunVariance lrv) {
  if (e1.size() != e2.size()) throw std::invalid_argument("forecast error series differ in length");
  if (e1.size() < 10) throw std::invalid_argument("Diebold-Mariano needs at least 10 observations");
  if (horizon < 1) throw std::invalid_argument("forecast horizon must be at least 1");
  const std::size_t n = e1.size();
  std::vector<double> d(n);
  for (std::size_t t = 0; t < n; ++t) d[t] = e1[t] * e1[t] - e2[t] * e2[t];

  DmReport rep;
  rep.n = n;
  if (std::all_of(d.begin(), d.end(), [](double v) { return v == 0.0; })) {
    rep.no_difference = true;
    return rep;
  }
  const double nd = static_cast<double>(n);
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= nd;
  const auto autocov = [&](std::size_t lag) {
    double acc = 0.0;
    for (std::size_t t = lag; t < n; ++t) acc += (d[t] - mean) * (d[t - lag] - mean);
    return acc / nd;
  };
  const double gamma0 = autocov(0);
  double lr = gamma0;
  const auto max_lag = static_cast<std::size_t>(horizon - 1);
  for (std::size_t k = 1; k <= max_lag && k < n; ++k) {
    const double w = lrv == LongRunVariance::NeweyWest ? 1.0 - static_cast<double>(k) / static_cast<double>(max_lag + 1) : 1.0;
    lr += 2.0 * w * autocov(k);
  }
  if (!(lr > 0.0)) lr = gamma0;
  if (!(lr > 0.0)) {
    rep.statistic = mean > 0.0 ? INFINITY : -INFINITY;
    rep.p_value = 0.0;
    return rep;
  }
  rep.statistic = mean / std::sqrt(lr / nd);
  rep.p_value = std::clamp(2.0 * boost::math::cdf(boost::math::complement(boost::math::normal(), std::abs(rep.statistic))),
                           0.0, 1.0);
  return rep;
}

} // namespace chainrisk
