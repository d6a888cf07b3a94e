#include "chainrisk/skew_t.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstdint>
#include <numbers>

namespace chainrisk {

std::string to_string(Innovation d) {
  switch (d) {
  case Innovation::SkewT: return "skew-t";
  case Innovation::StudentT: return "student-t";
  case Innovation::Normal: return "normal";
  }
  return "unknown";
}

Innovation innovation_from_string(const std::string& name) {
  if (name == "skew-t" || name == "sstd" || name == "skewt") return Innovation::SkewT;
  if (name == "student-t" || name == "std" || name == "t") return Innovation::StudentT;
  if (name == "normal" || name == "norm" || name == "gaussian") return Innovation::Normal;
  throw std::invalid_argument("unknown innovation distribution '" + name + "'");
}

InnovationLaw::InnovationLaw(Innovation kind, double nu, double xi) : kind_(kind), nu_(nu), xi_(xi) {
  if (kind == Innovation::Normal) {
    nu_ = 0.0;
    xi_ = 1.0;
    return;
  }
  if (!(nu > 2.0) || !std::isfinite(nu)) throw DomainError("tail parameter nu must exceed 2");
  if (kind == Innovation::StudentT) xi_ = 1.0;
  if (!(xi_ > 0.0) || !std::isfinite(xi_)) throw DomainError("skew parameter xi must be positive");

  scale2_ = nu - 2.0;
  const double lg_half_nu1 = std::lgamma(0.5 * (nu + 1.0));
  const double lg_half_nu = std::lgamma(0.5 * nu);
  log_norm_ = lg_half_nu1 - lg_half_nu - 0.5 * std::log(std::numbers::pi * scale2_);

  // E|X| for the unit-variance Student-t
  const double m1 = 2.0 * std::sqrt(scale2_) / (nu - 1.0) *
                    std::exp(lg_half_nu1 - lg_half_nu) / std::sqrt(std::numbers::pi);
  const double x = xi_, ix = 1.0 / xi_;
  log_skew_ = std::log(2.0 / (x + ix));
  shift_ = m1 * (x - ix);
  sigma_ = std::sqrt((1.0 - m1 * m1) * (x * x + ix * ix) + 2.0 * m1 * m1 - 1.0);
  log_sigma_ = std::log(sigma_);
}

double InnovationLaw::std_t_log_density(double x) const noexcept {
  return log_norm_ - 0.5 * (nu_ + 1.0) * std::log1p(x * x / scale2_);
}

double InnovationLaw::std_t_cdf(double x) const {
  const boost::math::students_t dist(nu_);
  const double t = x * std::sqrt(nu_ / scale2_);
  return t < 0.0 ? boost::math::cdf(dist, t) : 1.0 - boost::math::cdf(dist, -t);
}

double InnovationLaw::log_density(double z) const noexcept {
  if (kind_ == Innovation::Normal) return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi);
  const double w = z * sigma_ + shift_;
  const double folded = w >= 0.0 ? w / xi_ : w * xi_;
  return log_skew_ + std_t_log_density(folded) + log_sigma_;
}

double InnovationLaw::density(double z) const noexcept { return std::exp(log_density(z)); }

double InnovationLaw::cdf(double z) const {
  if (kind_ == Innovation::Normal) return boost::math::cdf(boost::math::normal(), z);
  const double w = z * sigma_ + shift_;
  const double g = 2.0 / (xi_ + 1.0 / xi_);
  if (w < 0.0) return g / xi_ * std_t_cdf(w * xi_);
  return 1.0 - g * xi_ * std_t_cdf(-w / xi_);
}

double InnovationLaw::quantile(double p) const {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile probability must lie in (0,1)");
  if (kind_ == Innovation::Normal) return boost::math::quantile(boost::math::normal(), p);

  double lo = -4.0, hi = 4.0;
  int expansions = 0;
  while (cdf(lo) > p || cdf(hi) < p) {
    if (++expansions > 60)
      throw NumericalError("quantile bracket [" + std::to_string(lo) + ", " + std::to_string(hi) +
                           "] failed to enclose p=" + std::to_string(p) + " (cdf " +
                           std::to_string(cdf(lo)) + ", " + std::to_string(cdf(hi)) + ")");
    if (cdf(lo) > p) lo *= 2.0;
    if (cdf(hi) < p) hi *= 2.0;
  }
  const auto f = [&](double z) { return cdf(z) - p; };
  std::uintmax_t max_iter = 200;
  const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, f(lo), f(hi), tol, max_iter);
  if (max_iter >= 200)
    throw NumericalError("quantile root search did not converge in bracket [" + std::to_string(a) + ", " +
                         std::to_string(b) + "]");
  return 0.5 * (a + b);
}

double skewt_density(double z, double nu, double xi) { return InnovationLaw::skew_t(nu, xi).density(z); }
double skewt_cdf(double z, double nu, double xi) { return InnovationLaw::skew_t(nu, xi).cdf(z); }
double skewt_quantile(double p, double nu, double xi) { return InnovationLaw::skew_t(nu, xi).quantile(p); }

} // namespace chainrisk
