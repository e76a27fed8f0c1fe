#pragma once

#include <span>

#include <Eigen/Core>

#include "mtvgp/geometry.hpp"

namespace mtvgp {

/// Default diagonal jitter consumers add to local correlation blocks.
inline constexpr double kDefaultJitter = 1e-8;

/// Matern range phi and smoothness nu, both strictly positive.
struct MaternParams {
  double phi = 1.0;
  double nu = 0.5;

  /// Throws DomainError unless phi > 0 and nu > 0.
  void validate() const;
};

/// Modified Bessel function of the second kind K_nu(x) for real order and
/// x > 0. Uses K_{-nu} = K_nu, Temme's series for x < 2 and Steed's
/// continued fraction above, followed by upward recurrence in the order.
double bessel_k(double nu, double x);

/// Matern correlation at distance d. Exactly 1 for d < 1e-14 * phi.
/// Half-integer smoothness 0.5, 1.5 and 2.5 use the closed forms.
double matern(double d, const MaternParams& params);

/// Same as matern() but always through the Bessel representation.
double matern_bessel(double d, const MaternParams& params);

/// Matern kernel with the normalizing constant precomputed.
class MaternKernel {
 public:
  explicit MaternKernel(const MaternParams& params);

  double operator()(double d) const;
  const MaternParams& params() const noexcept { return params_; }

 private:
  MaternParams params_;
  double log_norm_;
  int closed_form_;  // 0: none, 1: nu=1/2, 3: nu=3/2, 5: nu=5/2
};

/// Correlation block between the sites listed in rows and cols.
Eigen::MatrixXd correlation_submatrix(const SiteSet& sites, std::span<const Index> rows,
                                      std::span<const Index> cols, const MaternParams& params);

/// Full n x n correlation matrix (no jitter).
Eigen::MatrixXd correlation_matrix(const SiteSet& sites, const MaternParams& params);

/// Range phi at which the correlation at `distance` equals `target`
/// (bisection over [1e-6, 1e3] * distance).
double range_for_correlation(double distance, double nu, double target);

}  // namespace mtvgp
