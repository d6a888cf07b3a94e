#include "chainrisk/arma_garchx.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <random>

namespace chainrisk {

namespace {

double logistic(double v) { return 1.0 / (1.0 + std::exp(-v)); }
double logit(double p) {
  p = std::clamp(p, 1e-10, 1.0 - 1e-10);
  return std::log(p / (1.0 - p));
}

constexpr double kMaxPersistence = 1.0 - 1e-6;
constexpr double kMinNu = 2.01;

struct SampleMoments {
  double mean = 0.0;
  double var = 0.0;
};

SampleMoments sample_moments(std::span<const double> y) {
  SampleMoments m;
  if (y.empty()) return m;
  m.mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  double ss = 0.0;
  for (double v : y) ss += (v - m.mean) * (v - m.mean);
  m.var = y.size() > 1 ? ss / static_cast<double>(y.size() - 1) : 0.0;
  if (!(m.var > 0.0)) m.var = 1e-8;
  return m;
}

void check_inputs(std::span<const double> y, const Eigen::MatrixXd& x, const ModelSpec& spec) {
  spec.validate();
  const auto T = y.size();
  if (T < static_cast<std::size_t>(std::max(spec.p, spec.q) + 2))
    throw std::invalid_argument("series of length " + std::to_string(T) + " is too short for ARMA(" +
                                std::to_string(spec.p) + "," + std::to_string(spec.q) + ")");
  if (spec.k > 0 && (x.rows() != spec.k || x.cols() != static_cast<Eigen::Index>(T)))
    throw std::invalid_argument("exogenous matrix must be " + std::to_string(spec.k) + "x" + std::to_string(T) +
                                ", got " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()));
}

} // namespace

int ModelSpec::parameter_count() const noexcept {
  int n = 1 + p + q + 3 + k;
  if (distribution == Innovation::StudentT) n += 1;
  if (distribution == Innovation::SkewT) n += 2;
  return n;
}

void ModelSpec::validate() const {
  if (p < 0 || q < 0 || k < 0) throw std::invalid_argument("model orders must be non-negative");
}

std::string ArmaGarchXParams::violation(const ModelSpec& spec) const {
  if (phi.size() != static_cast<std::size_t>(spec.p)) return "phi has wrong length";
  if (theta.size() != static_cast<std::size_t>(spec.q)) return "theta has wrong length";
  if (beta_x.size() != static_cast<std::size_t>(spec.k)) return "beta_x has wrong length";
  if (!(alpha0 > 0.0)) return "alpha0 must be positive";
  if (!(alpha1 >= 0.0)) return "alpha1 must be non-negative";
  if (!(beta >= 0.0)) return "beta must be non-negative";
  if (!(alpha1 + beta < 1.0)) return "alpha1 + beta must be below 1";
  if (spec.distribution != Innovation::Normal && !(nu > 2.0)) return "nu must exceed 2";
  if (spec.distribution == Innovation::SkewT && !(xi > 0.0)) return "xi must be positive";
  const auto finite = [](double v) { return std::isfinite(v); };
  if (!finite(mu) || !std::all_of(phi.begin(), phi.end(), finite) ||
      !std::all_of(theta.begin(), theta.end(), finite) || !std::all_of(beta_x.begin(), beta_x.end(), finite) ||
      !finite(alpha0) || !finite(nu) || !finite(xi))
    return "non-finite parameter";
  return {};
}

InnovationLaw ArmaGarchXParams::law(const ModelSpec& spec) const {
  switch (spec.distribution) {
  case Innovation::Normal: return InnovationLaw::normal();
  case Innovation::StudentT: return InnovationLaw::student_t(nu);
  case Innovation::SkewT: return InnovationLaw::skew_t(nu, xi);
  }
  return InnovationLaw::normal();
}

FilterOutput filter(std::span<const double> y, const Eigen::MatrixXd& x, const ArmaGarchXParams& params,
                    const ModelSpec& spec) {
  check_inputs(y, x, spec);
  const auto T = y.size();
  const auto m = sample_moments(y);
  FilterOutput out;
  out.u.resize(T);
  out.sigma2.resize(T);
  double u_prev = 0.0;
  double s2_prev = m.var;
  for (std::size_t t = 0; t < T; ++t) {
    double mean = params.mu;
    for (int i = 1; i <= spec.p; ++i)
      mean += params.phi[static_cast<std::size_t>(i - 1)] * (t >= static_cast<std::size_t>(i) ? y[t - i] : m.mean);
    for (int j = 1; j <= spec.q; ++j)
      if (t >= static_cast<std::size_t>(j)) mean += params.theta[static_cast<std::size_t>(j - 1)] * out.u[t - j];
    const double u = y[t] - mean;

    double s2 = params.alpha0 + params.alpha1 * u_prev * u_prev + params.beta * s2_prev;
    for (int l = 0; l < spec.k; ++l) s2 += params.beta_x[static_cast<std::size_t>(l)] * x(l, static_cast<Eigen::Index>(t));
    if (!std::isfinite(u) || !std::isfinite(s2))
      throw NumericalError("non-finite filter state at index " + std::to_string(t));
    s2 = std::max(s2, kSigma2Floor);

    out.u[t] = u;
    out.sigma2[t] = s2;
    u_prev = u;
    s2_prev = s2;
  }
  return out;
}

double neg_log_likelihood(std::span<const double> y, const Eigen::MatrixXd& x, const ArmaGarchXParams& params,
                          const ModelSpec& spec) {
  if (!params.valid(spec)) return kPenaltyNll;
  FilterOutput f;
  try {
    f = filter(y, x, params, spec);
  } catch (const NumericalError&) {
    return kPenaltyNll;
  }
  const InnovationLaw law = params.law(spec);
  double nll = 0.0;
  for (std::size_t t = 0; t < f.u.size(); ++t) {
    const double sigma = std::sqrt(f.sigma2[t]);
    nll -= law.log_density(f.u[t] / sigma) - std::log(sigma);
  }
  if (!std::isfinite(nll) || nll > kPenaltyNll) return kPenaltyNll;
  return nll;
}

ParameterTransform::ParameterTransform(const ModelSpec& spec, double y_mean, double y_var)
    : spec_(spec), y_mean_(y_mean), y_sd_(std::sqrt(y_var)), y_var_(y_var), size_(spec.parameter_count()) {}

Eigen::VectorXd ParameterTransform::to_unconstrained(const ArmaGarchXParams& p) const {
  Eigen::VectorXd th(size_);
  int c = 0;
  th(c++) = (p.mu - y_mean_) / y_sd_;
  for (double v : p.phi) th(c++) = v;
  for (double v : p.theta) th(c++) = v;
  th(c++) = std::log(std::max(p.alpha0, 1e-300) / y_var_);
  const double persistence = std::clamp(p.alpha1 + p.beta, 1e-8, kMaxPersistence * (1.0 - 1e-9));
  th(c++) = logit(persistence / kMaxPersistence);
  th(c++) = logit(std::clamp(p.alpha1 / persistence, 1e-8, 1.0 - 1e-8));
  for (double v : p.beta_x) th(c++) = v / y_var_;
  if (spec_.distribution != Innovation::Normal) th(c++) = std::log(std::max(p.nu - kMinNu, 1e-6));
  if (spec_.distribution == Innovation::SkewT) th(c++) = std::log(p.xi);
  return th;
}

ArmaGarchXParams ParameterTransform::from_unconstrained(const Eigen::VectorXd& th) const {
  ArmaGarchXParams p;
  int c = 0;
  p.mu = y_mean_ + y_sd_ * th(c++);
  p.phi.resize(static_cast<std::size_t>(spec_.p));
  for (auto& v : p.phi) v = th(c++);
  p.theta.resize(static_cast<std::size_t>(spec_.q));
  for (auto& v : p.theta) v = th(c++);
  p.alpha0 = y_var_ * std::exp(std::clamp(th(c++), -700.0, 700.0));
  const double persistence = kMaxPersistence * logistic(th(c++));
  const double share = logistic(th(c++));
  p.alpha1 = persistence * share;
  p.beta = persistence * (1.0 - share);
  p.beta_x.resize(static_cast<std::size_t>(spec_.k));
  for (auto& v : p.beta_x) v = y_var_ * th(c++);
  if (spec_.distribution != Innovation::Normal) p.nu = kMinNu + std::exp(std::clamp(th(c++), -30.0, 30.0));
  else p.nu = 0.0;
  if (spec_.distribution == Innovation::SkewT) p.xi = std::exp(std::clamp(th(c++), -30.0, 30.0));
  else p.xi = 1.0;
  return p;
}

ArmaGarchXParams default_start(const ModelSpec& spec, std::span<const double> y) {
  const auto m = sample_moments(y);
  ArmaGarchXParams p;
  p.mu = m.mean;
  p.phi.assign(static_cast<std::size_t>(spec.p), 0.0);
  p.theta.assign(static_cast<std::size_t>(spec.q), 0.0);
  p.alpha1 = 0.05;
  p.beta = 0.90;
  p.alpha0 = m.var * (1.0 - p.alpha1 - p.beta);
  p.beta_x.assign(static_cast<std::size_t>(spec.k), 0.0);
  p.nu = spec.distribution == Innovation::Normal ? 0.0 : 8.0;
  p.xi = 1.0;
  return p;
}

FitResult evaluate(std::span<const double> y, const Eigen::MatrixXd& x, const ModelSpec& spec,
                   const ArmaGarchXParams& params) {
  check_inputs(y, x, spec);
  if (const auto why = params.violation(spec); !why.empty()) throw std::invalid_argument(why);
  const auto f = filter(y, x, params, spec);
  FitResult r;
  r.spec = spec;
  r.params = params;
  r.loglik = -neg_log_likelihood(y, x, params, spec);
  r.initial_nll = -r.loglik;
  r.converged = true;
  r.residuals = f.u;
  r.sigma.resize(f.sigma2.size());
  r.std_resid.resize(f.sigma2.size());
  for (std::size_t t = 0; t < f.sigma2.size(); ++t) {
    r.sigma[t] = std::sqrt(f.sigma2[t]);
    r.std_resid[t] = f.u[t] / r.sigma[t];
  }
  r.y.assign(y.begin(), y.end());
  const double npar = spec.parameter_count();
  r.aic = 2.0 * npar - 2.0 * r.loglik;
  r.bic = npar * std::log(static_cast<double>(y.size())) - 2.0 * r.loglik;
  return r;
}

FitResult fit(std::span<const double> y, const Eigen::MatrixXd& x, const ModelSpec& spec, const FitConfig& config) {
  check_inputs(y, x, spec);
  if (y.size() < config.min_observations)
    throw std::invalid_argument("fit needs at least " + std::to_string(config.min_observations) +
                                " observations, got " + std::to_string(y.size()));
  const auto m = sample_moments(y);
  const ParameterTransform transform(spec, m.mean, m.var);
  const ArmaGarchXParams start = config.start ? *config.start : default_start(spec, y);
  if (const auto why = start.violation(spec); !why.empty())
    throw std::invalid_argument("invalid starting parameters: " + why);
  const Eigen::VectorXd theta0 = transform.to_unconstrained(start);

  const Objective objective = [&](const Eigen::VectorXd& th) {
    return neg_log_likelihood(y, x, transform.from_unconstrained(th), spec);
  };
  const double start_nll = objective(theta0);

  const int restarts = std::max(1, config.restarts);
  std::vector<Eigen::VectorXd> starts;
  starts.push_back(theta0);
  for (int r = 1; r < restarts; ++r) {
    std::mt19937_64 rng(config.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(r));
    std::normal_distribution<double> jitter(0.0, config.restart_spread);
    Eigen::VectorXd th = theta0;
    for (Eigen::Index i = 0; i < th.size(); ++i) th(i) += jitter(rng);
    starts.push_back(std::move(th));
  }

  std::vector<BfgsResult> runs(starts.size());
  if (config.parallel && starts.size() > 1) {
    std::vector<std::future<BfgsResult>> jobs;
    for (const auto& s : starts)
      jobs.push_back(std::async(std::launch::async, [&, s] { return bfgs_minimize(objective, s, config.optimizer); }));
    for (std::size_t r = 0; r < jobs.size(); ++r) runs[r] = jobs[r].get();
  } else {
    for (std::size_t r = 0; r < starts.size(); ++r) runs[r] = bfgs_minimize(objective, starts[r], config.optimizer);
  }

  std::size_t best = 0;
  int converged_count = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const bool usable = std::isfinite(runs[r].value) && runs[r].value < kPenaltyNll;
    if (usable && runs[r].converged) ++converged_count;
    if (runs[r].value < runs[best].value) best = r;
  }
  BfgsResult chosen = runs[best];
  if (converged_count == 0) {
    throw FitError("all " + std::to_string(runs.size()) + " restarts failed to converge (best NLL " +
                       std::to_string(chosen.value) + ", " + chosen.reason + ")",
                   transform.from_unconstrained(chosen.x), chosen.value);
  }
  if (!chosen.converged) {
    auto polished = bfgs_minimize(objective, chosen.x, config.optimizer);
    if (polished.value <= chosen.value) {
      polished.iterations += chosen.iterations;
      chosen = std::move(polished);
    }
  }
  // never report a point worse than the deterministic start
  if (chosen.value > start_nll) {
    chosen.x = theta0;
    chosen.value = start_nll;
  }

  FitResult result = evaluate(y, x, spec, transform.from_unconstrained(chosen.x));
  result.initial_nll = start_nll;
  result.converged = chosen.converged;
  result.iterations = chosen.iterations;
  result.restarts_converged = converged_count;
  result.reason = chosen.reason;
  return result;
}

std::vector<double> draw_innovations(const InnovationLaw& law, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> z(n);
  if (law.kind() == Innovation::Normal) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& v : z) v = normal(rng);
    return z;
  }
  const double nu = law.nu();
  const double xi = law.xi();
  std::student_t_distribution<double> student(nu);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double unit = std::sqrt((nu - 2.0) / nu);
  const double p_right = xi * xi / (1.0 + xi * xi);
  const double shift = law.skew_shift();
  const double sigma = law.skew_scale();
  for (auto& v : z) {
    const double a = std::abs(student(rng) * unit);
    const double w = unif(rng) < p_right ? a * xi : -a / xi;
    v = (w - shift) / sigma;
  }
  return z;
}

std::vector<double> simulate(const ArmaGarchXParams& params, const ModelSpec& spec, const Eigen::MatrixXd& x,
                             std::size_t T, std::uint64_t seed) {
  spec.validate();
  if (const auto why = params.violation(spec); !why.empty()) throw std::invalid_argument(why);
  if (spec.k > 0 && (x.rows() != spec.k || x.cols() < static_cast<Eigen::Index>(T)))
    throw std::invalid_argument("exogenous matrix must have k rows and at least T columns");
  const auto z = draw_innovations(params.law(spec), T, seed);

  const double persistence = params.alpha1 + params.beta;
  double exo_mean = 0.0;
  if (spec.k > 0 && T > 0) {
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(T); ++t)
      for (int l = 0; l < spec.k; ++l) exo_mean += params.beta_x[static_cast<std::size_t>(l)] * x(l, t);
    exo_mean /= static_cast<double>(T);
  }
  double s2_prev = std::max((params.alpha0 + exo_mean) / (1.0 - persistence), kSigma2Floor);
  const double ar_sum = std::accumulate(params.phi.begin(), params.phi.end(), 0.0);
  const double y_level = std::abs(1.0 - ar_sum) > 1e-8 ? params.mu / (1.0 - ar_sum) : params.mu;

  std::vector<double> y(T), u(T);
  double u_prev = 0.0;
  for (std::size_t t = 0; t < T; ++t) {
    double s2 = params.alpha0 + params.alpha1 * u_prev * u_prev + params.beta * s2_prev;
    for (int l = 0; l < spec.k; ++l) s2 += params.beta_x[static_cast<std::size_t>(l)] * x(l, static_cast<Eigen::Index>(t));
    s2 = std::max(s2, kSigma2Floor);
    const double shock = std::sqrt(s2) * z[t];
    double mean = params.mu;
    for (int i = 1; i <= spec.p; ++i)
      mean += params.phi[static_cast<std::size_t>(i - 1)] * (t >= static_cast<std::size_t>(i) ? y[t - i] : y_level);
    for (int j = 1; j <= spec.q; ++j)
      if (t >= static_cast<std::size_t>(j)) mean += params.theta[static_cast<std::size_t>(j - 1)] * u[t - j];
    u[t] = shock;
    y[t] = mean + shock;
    u_prev = shock;
    s2_prev = s2;
  }
  return y;
}

OneStepForecast forecast_one_step(const ArmaGarchXParams& params, const ModelSpec& spec,
                                  std::span<const double> y_recent, std::span<const double> u_recent,
                                  double sigma2_last, std::span<const double> x_next, double y_fill) {
  if (spec.k > 0 && x_next.size() != static_cast<std::size_t>(spec.k))
    throw std::invalid_argument("forecast needs " + std::to_string(spec.k) + " next-day regressor values, got " +
                                std::to_string(x_next.size()));
  const auto y_lag = [&](int i) {
    return y_recent.size() >= static_cast<std::size_t>(i) ? y_recent[y_recent.size() - static_cast<std::size_t>(i)] : y_fill;
  };
  const auto u_lag = [&](int j) {
    return u_recent.size() >= static_cast<std::size_t>(j) ? u_recent[u_recent.size() - static_cast<std::size_t>(j)] : 0.0;
  };
  OneStepForecast f;
  const double u_last = u_lag(1);
  f.sigma2 = params.alpha0 + params.alpha1 * u_last * u_last + params.beta * sigma2_last;
  for (int l = 0; l < spec.k; ++l) f.sigma2 += params.beta_x[static_cast<std::size_t>(l)] * x_next[static_cast<std::size_t>(l)];
  f.sigma2 = std::max(f.sigma2, kSigma2Floor);
  f.sigma = std::sqrt(f.sigma2);
  f.mean = params.mu;
  for (int i = 1; i <= spec.p; ++i) f.mean += params.phi[static_cast<std::size_t>(i - 1)] * y_lag(i);
  for (int j = 1; j <= spec.q; ++j) f.mean += params.theta[static_cast<std::size_t>(j - 1)] * u_lag(j);
  return f;
}

OneStepForecast forecast_sigma(const FitResult& fit, std::span<const double> x_next) {
  if (fit.sigma.empty()) throw std::invalid_argument("forecast from an empty fit");
  const double s = fit.sigma.back();
  return forecast_one_step(fit.params, fit.spec, fit.y, fit.residuals, s * s, x_next);
}

std::vector<AicEntry> aic_grid(std::span<const double> y, const Eigen::MatrixXd& x, const ModelSpec& base,
                               const std::vector<std::pair<int, int>>& orders, const FitConfig& config) {
  std::vector<AicEntry> out;
  for (const auto& [p, q] : orders) {
    ModelSpec spec = base;
    spec.p = p;
    spec.q = q;
    AicEntry e{p, q, 0.0, 0.0, false};
    try {
      const auto r = fit(y, x, spec, config);
      e.loglik = r.loglik;
      e.aic = r.aic;
      e.converged = r.converged;
    } catch (const FitError& err) {
      e.loglik = -err.best_nll();
      e.aic = 2.0 * spec.parameter_count() + 2.0 * err.best_nll();
    }
    out.push_back(e);
  }
  return out;
}

} // namespace chainrisk
