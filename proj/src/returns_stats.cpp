#include "chainrisk/returns_stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace chainrisk {

ReturnSeries log_returns(const PriceSeries& prices) {
  if (prices.size() < 2) throw InsufficientDataError("log returns need at least 2 prices");
  ReturnSeries out;
  const std::size_t n = prices.size() - 1;
  out.dates.reserve(n);
  out.r.reserve(n);
  out.L.reserve(n);
  out.r_sq.reserve(n);
  for (std::size_t t = 0; t < n; ++t) {
    if (!(prices.close[t] > 0.0) || !(prices.close[t + 1] > 0.0))
      throw ValidationError("non-positive price at " + format_date(prices.dates[t]));
    const double r = std::log(prices.close[t + 1] / prices.close[t]);
    out.dates.push_back(prices.dates[t]);
    out.r.push_back(r);
    out.L.push_back(-r);
    out.r_sq.push_back(r * r);
  }
  return out;
}

Standardized standardize(std::span<const double> x) {
  if (x.size() < 2) throw InsufficientDataError("standardize needs at least 2 observations");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0) || sd <= 1e-300 || sd < 1e-14 * std::max(1.0, std::abs(mean)))
    throw DegenerateSeriesError("series has zero variance");
  Standardized out{{}, mean, sd};
  out.z.reserve(x.size());
  for (double v : x) out.z.push_back((v - mean) / sd);
  return out;
}

double student_t_two_sided_p(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  const boost::math::students_t dist(dof);
  return std::clamp(2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))), 0.0, 1.0);
}

std::string significance_stars(double p) {
  if (p < 0.001) return "***";
  if (p < 0.01) return "**";
  if (p < 0.05) return "*";
  if (p < 0.1) return ".";
  return "";
}

OlsReport ols_fit(std::span<const double> y, const Eigen::MatrixXd& X,
                  const std::vector<std::string>& column_names, bool intercept) {
  const auto n = static_cast<Eigen::Index>(y.size());
  if (X.rows() != n) throw std::invalid_argument("ols_fit: X has " + std::to_string(X.rows()) +
                                                 " rows but y has " + std::to_string(n) + " observations");
  if (static_cast<Eigen::Index>(column_names.size()) != X.cols())
    throw std::invalid_argument("ols_fit: column name count does not match X");
  const Eigen::Index k = X.cols();
  const Eigen::Index p = k + (intercept ? 1 : 0);
  if (n <= p) throw InsufficientDataError("ols_fit needs more observations than coefficients");

  Eigen::MatrixXd D(n, p);
  std::vector<std::string> names;
  if (intercept) {
    D.col(0).setOnes();
    names.push_back("(Intercept)");
  }
  D.rightCols(k) = X;
  names.insert(names.end(), column_names.begin(), column_names.end());

  // Incremental Gram-Schmidt: a column whose remainder vanishes is spanned by its predecessors.
  {
    Eigen::MatrixXd Q(n, p);
    for (Eigen::Index j = 0; j < p; ++j) {
      Eigen::VectorXd v = D.col(j);
      const double norm0 = v.norm();
      for (int pass = 0; pass < 2; ++pass)
        for (Eigen::Index c = 0; c < j; ++c) v -= Q.col(c).dot(v) * Q.col(c);
      const double norm = v.norm();
      if (!(norm0 > 0.0) || norm <= 1e-10 * norm0)
        throw SingularityError("design matrix is rank deficient at column '" + names[static_cast<std::size_t>(j)] + "'",
                               names[static_cast<std::size_t>(j)]);
      Q.col(j) = v / norm;
    }
  }

  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), n);
  const Eigen::HouseholderQR<Eigen::MatrixXd> qr(D);
  const Eigen::VectorXd beta = qr.solve(yv);
  const Eigen::VectorXd resid = yv - D * beta;
  const double dof = static_cast<double>(n - p);
  const double sigma2 = resid.squaredNorm() / dof;

  const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd Rinv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd cov = sigma2 * Rinv * Rinv.transpose();

  OlsReport rep;
  rep.names = std::move(names);
  rep.n = static_cast<std::size_t>(n);
  rep.k = static_cast<std::size_t>(k);
  rep.sigma2 = sigma2;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double se = std::sqrt(cov(j, j));
    const double t = beta(j) / se;
    rep.coef.push_back(beta(j));
    rep.se.push_back(se);
    rep.t_value.push_back(t);
    rep.p_value.push_back(student_t_two_sided_p(t, dof));
  }
  rep.residuals.assign(resid.data(), resid.data() + n);
  const double ybar = yv.mean();
  const double tss = (yv.array() - ybar).square().sum();
  rep.r_squared = tss > 0.0 ? 1.0 - resid.squaredNorm() / tss : 0.0;
  return rep;
}

DensityMoments moments(std::span<const double> x) {
  if (x.size() < 2) throw InsufficientDataError("moments need at least 2 observations");
  const double n = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double m2 = 0.0, m3 = 0.0, m4 = 0.0;
  for (double v : x) {
    const double d = v - mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  DensityMoments out;
  out.n = x.size();
  out.mean = mean;
  out.std_dev = std::sqrt(m2 / (n - 1.0));
  m2 /= n;
  m3 /= n;
  m4 /= n;
  if (m2 > 0.0) {
    out.skewness = m3 / std::pow(m2, 1.5);
    out.kurtosis = m4 / (m2 * m2);
  }
  return out;
}

double empirical_quantile(std::span<const double> x, double q) {
  if (x.empty()) throw InsufficientDataError("quantile of an empty series");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile fraction must lie in [0,1]");
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = static_cast<double>(sorted.size() - 1) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<double> tail_subset(std::span<const double> losses, std::span<const double> conditioning,
                                double alpha, Tail tail) {
  if (losses.size() != conditioning.size())
    throw std::invalid_argument("loss and conditioning series differ in length");
  if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("tail fraction must lie in (0, 0.5)");
  const double cut = empirical_quantile(conditioning, tail == Tail::Lower ? alpha : 1.0 - alpha);
  std::vector<double> selected;
  for (std::size_t t = 0; t < losses.size(); ++t) {
    const bool keep = tail == Tail::Lower ? conditioning[t] < cut : conditioning[t] > cut;
    if (keep) selected.push_back(losses[t]);
  }
  return selected;
}

DensityMoments conditional_moments(std::span<const double> losses, std::span<const double> conditioning,
                                   double alpha, Tail tail) {
  const auto selected = tail_subset(losses, conditioning, alpha, tail);
  if (selected.size() < 4)
    throw InsufficientDataError("tail subsample has " + std::to_string(selected.size()) +
                                " observations, need at least 4");
  return moments(selected);
}

double silverman_bandwidth(std::span<const double> x) {
  if (x.size() < 2) throw InsufficientDataError("bandwidth needs at least 2 observations");
  const auto m = moments(x);
  const double iqr = empirical_quantile(x, 0.75) - empirical_quantile(x, 0.25);
  double spread = m.std_dev;
  if (iqr > 0.0) spread = std::min(spread, iqr / 1.34);
  if (!(spread > 0.0)) spread = m.std_dev > 0.0 ? m.std_dev : 1.0;
  return 0.9 * spread * std::pow(static_cast<double>(x.size()), -0.2);
}

DensityCurve gaussian_kde(std::span<const double> sample, std::span<const double> grid, double bandwidth) {
  if (sample.empty()) throw InsufficientDataError("density of an empty sample");
  DensityCurve curve;
  curve.bandwidth = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(sample);
  const double h = curve.bandwidth;
  const double norm = 1.0 / (static_cast<double>(sample.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  curve.grid.assign(grid.begin(), grid.end());
  curve.density.reserve(grid.size());
  for (double g : grid) {
    double acc = 0.0;
    for (double s : sample) {
      const double u = (g - s) / h;
      acc += std::exp(-0.5 * u * u);
    }
    curve.density.push_back(acc * norm);
  }
  return curve;
}

std::vector<double> linspace(double lo, double hi, std::size_t points) {
  std::vector<double> out;
  if (points == 0) return out;
  if (points == 1) return {lo};
  out.reserve(points);
  for (std::size_t i = 0; i < points; ++i)
    out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1));
  return out;
}

} // namespace chainrisk
