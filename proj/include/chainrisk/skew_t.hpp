#pragma once

#include <stdexcept>
#include <string>

namespace chainrisk {

class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Innovation { SkewT, StudentT, Normal };

std::string to_string(Innovation d);
Innovation innovation_from_string(const std::string& name);

/// Zero-mean, unit-variance innovation law. The skewed Student-t is the
/// Fernández–Steel construction on a unit-variance Student-t, shifted and
/// rescaled so that its first two moments are (0, 1). xi = 1 is symmetric.
class InnovationLaw {
public:
  InnovationLaw() = default;
  InnovationLaw(Innovation kind, double nu, double xi);

  static InnovationLaw normal() { return {Innovation::Normal, 0.0, 1.0}; }
  static InnovationLaw student_t(double nu) { return {Innovation::StudentT, nu, 1.0}; }
  static InnovationLaw skew_t(double nu, double xi) { return {Innovation::SkewT, nu, xi}; }

  Innovation kind() const noexcept { return kind_; }
  double nu() const noexcept { return nu_; }
  double xi() const noexcept { return xi_; }
  /// Location and scale mapping the raw Fernández–Steel variate w to z = (w - shift) / scale.
  double skew_shift() const noexcept { return shift_; }
  double skew_scale() const noexcept { return sigma_; }

  double log_density(double z) const noexcept;
  double density(double z) const noexcept;
  double cdf(double z) const;
  double quantile(double p) const;

private:
  Innovation kind_ = Innovation::Normal;
  double nu_ = 0.0;
  double xi_ = 1.0;
  // unit-variance Student-t: log normaliser and squared scale (nu - 2)
  double log_norm_ = 0.0;
  double scale2_ = 1.0;
  // skewing: log(2 / (xi + 1/xi)), location shift and scale of the standardised law
  double log_skew_ = 0.0;
  double shift_ = 0.0;
  double sigma_ = 1.0;
  double log_sigma_ = 0.0;

  double std_t_log_density(double x) const noexcept;
  double std_t_cdf(double x) const;
};

double skewt_density(double z, double nu, double xi);
double skewt_cdf(double z, double nu, double xi);
double skewt_quantile(double p, double nu, double xi);

} // namespace chainrisk
