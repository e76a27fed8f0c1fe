#pragma once

#include <Eigen/Core>

#include "mtvgp/random.hpp"

namespace mtvgp {

/// How MatrixNormalParams::row_factor relates to the row covariance U.
enum class RowFactor {
  kCovarianceLower,  // L lower triangular, U = L L^T
  kPrecisionUpper,   // R upper triangular, U^{-1} = R^T R
};

/// MN(mean, U, V): vec(X) ~ N(vec(mean), V (x) U).
struct MatrixNormalParams {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd row_factor;
  RowFactor factor_kind = RowFactor::kCovarianceLower;
  Eigen::MatrixXd col_cov;
};

struct InverseWishartParams {
  Eigen::MatrixXd scale;
  double dof = 0.0;
};

/// Lower factor L with L L^T = A for symmetric positive semi-definite A.
/// Falls back to a pivoted LDL^T when A is singular.
Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& a);

/// Lower Cholesky factor; throws NumericError if `a` is not positive definite.
Eigen::MatrixXd spd_cholesky(const Eigen::MatrixXd& a, const char* what);

Eigen::MatrixXd sample_matrix_normal(const MatrixNormalParams& params, Rng& rng);

/// Log density; log-determinants come from the triangular factors.
double matrix_normal_logdensity(const Eigen::MatrixXd& x, const MatrixNormalParams& params);

/// Bartlett draw of the Wishart of scale^{-1}, inverted through triangular solves.
Eigen::MatrixXd sample_inverse_wishart(const InverseWishartParams& params, Rng& rng);

double normal_cdf(double z);
double log_normal_cdf(double z);
double normal_quantile(double p);

/// Draw from N(mean, sd^2) restricted to (low, high). Bounds may be infinite.
double sample_truncated_normal(double mean, double sd, double low, double high, Rng& rng);

/// log(Phi((high - mean)/sd) - Phi((low - mean)/sd)).
double log_trunc_mass(double mean, double sd, double low, double high);

}  // namespace mtvgp
