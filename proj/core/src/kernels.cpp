#include "mtvgp/kernels.hpp"

#include <cmath>
#include <string>

#include "mtvgp/errors.hpp"

namespace mtvgp {

namespace {

constexpr double kOriginFloor = 1e-14;

int closed_form_code(double nu) {
  if (nu == 0.5) return 1;
  if (nu == 1.5) return 3;
  if (nu == 2.5) return 5;
  return 0;
}

double closed_form(int code, double r) {
  switch (code) {
    case 1:
      return std::exp(-r);
    case 3:
      return (1.0 + r) * std::exp(-r);
    case 5:
      return (1.0 + r + r * r / 3.0) * std::exp(-r);
    default:
      return 0.0;
  }
}

double log_normalizer(double nu) { return -(nu - 1.0) * std::log(2.0) - std::lgamma(nu); }

double bessel_form(double r, double nu, double log_norm) {
  return std::exp(log_norm + nu * std::log(r)) * bessel_k(nu, r);
}

}  // namespace

void MaternParams::validate() const {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("Matern range phi must be positive, got " + std::to_string(phi));
  if (!(nu > 0.0) || !std::isfinite(nu)) throw DomainError("Matern smoothness nu must be positive, got " + std::to_string(nu));
}

MaternKernel::MaternKernel(const MaternParams& params)
    : params_(params), log_norm_(0.0), closed_form_(closed_form_code(params.nu)) {
  params_.validate();
  log_norm_ = log_normalizer(params_.nu);
}

double MaternKernel::operator()(double d) const {
  if (d < kOriginFloor * params_.phi) return 1.0;
  const double r = d / params_.phi;
  if (closed_form_ != 0) return closed_form(closed_form_, r);
  return bessel_form(r, params_.nu, log_norm_);
}

double matern(double d, const MaternParams& params) { return MaternKernel(params)(d); }

double matern_bessel(double d, const MaternParams& params) {
  params.validate();
  if (d < kOriginFloor * params.phi) return 1.0;
  return bessel_form(d / params.phi, params.nu, log_normalizer(params.nu));
}

Eigen::MatrixXd correlation_submatrix(const SiteSet& sites, std::span<const Index> rows,
                                      std::span<const Index> cols, const MaternParams& params) {
  const MaternKernel kernel(params);
  Eigen::MatrixXd k(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t j = 0; j < cols.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      k(static_cast<Index>(i), static_cast<Index>(j)) = kernel(sites.distance(rows[i], cols[j]));
    }
  }
  return k;
}

Eigen::MatrixXd correlation_matrix(const SiteSet& sites, const MaternParams& params) {
  const MaternKernel kernel(params);
  const Index n = sites.size();
  Eigen::MatrixXd k(n, n);
  for (Index j = 0; j < n; ++j) {
    k(j, j) = 1.0;
    for (Index i = j + 1; i < n; ++i) {
      k(i, j) = kernel(sites.distance(i, j));
      k(j, i) = k(i, j);
    }
  }
  return k;
}

double range_for_correlation(double distance, double nu, double target) {
  if (!(distance > 0.0)) throw ConfigError("range_for_correlation needs a positive distance");
  if (!(target > 0.0 && target < 1.0)) throw ConfigError("target correlation must lie in (0, 1)");
  // correlation at fixed distance increases with phi
  double lo = 1e-6 * distance;
  double hi = 1e3 * distance;
  auto f = [&](double phi) { return matern(distance, {phi, nu}) - target; };
  if (f(lo) > 0.0 || f(hi) < 0.0) throw NumericError("target correlation not bracketed by the range search interval");
  for (int it = 0; it < 200 && (hi - lo) > 1e-14 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace mtvgp
