#include "mtvgp/matrixvariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include <Eigen/Cholesky>

#include "mtvgp/errors.hpp"

namespace mtvgp {

using Index = Eigen::Index;

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

void require_square(const Eigen::MatrixXd& a, const char* what) {
  if (a.rows() != a.cols()) throw ConfigError(std::string(what) + " must be square");
}

// sum of log |diag|
double log_abs_diag(const Eigen::MatrixXd& t) { return t.diagonal().array().abs().log().sum(); }

}  // namespace

Eigen::MatrixXd spd_cholesky(const Eigen::MatrixXd& a, const char* what) {
  require_square(a, what);
  if (!a.allFinite()) throw NumericError(std::string(what) + " has non-finite entries");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + " is not positive definite");
  return llt.matrixL();
}

Eigen::MatrixXd psd_factor(const Eigen::MatrixXd& a) {
  require_square(a, "covariance");
  if (!a.allFinite()) throw NumericError("covariance has non-finite entries");
  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Eigen::LDLT<Eigen::MatrixXd> ldlt(a);
  if (ldlt.info() != Eigen::Success) throw NumericError("covariance factorization failed");
  const Eigen::VectorXd d = ldlt.vectorD().cwiseMax(0.0);
  if ((ldlt.vectorD().array() < -1e-12 * std::max(1.0, a.diagonal().cwiseAbs().maxCoeff())).any()) {
    throw NumericError("covariance is not positive semi-definite");
  }
  Eigen::MatrixXd l = ldlt.matrixL();
  l = l * d.cwiseSqrt().asDiagonal();
  // P^T L D^{1/2}
  return ldlt.transpositionsP().transpose() * l;
}

Eigen::MatrixXd sample_matrix_normal(const MatrixNormalParams& params, Rng& rng) {
  const Index r = params.mean.rows();
  const Index c = params.mean.cols();
  if (params.row_factor.rows() != r || params.row_factor.cols() != r || params.col_cov.rows() != c ||
      params.col_cov.cols() != c) {
    throw ConfigError("matrix-normal dimensions do not match the mean");
  }
  if (!params.row_factor.allFinite()) throw NumericError("matrix-normal row factor has non-finite entries");
  const Eigen::MatrixXd col_factor = psd_factor(params.col_cov);
  Eigen::MatrixXd z = standard_normal_matrix(r, c, rng) * col_factor.transpose();
  if (params.factor_kind == RowFactor::kCovarianceLower) {
    z = params.row_factor.triangularView<Eigen::Lower>() * z;
  } else {
    params.row_factor.triangularView<Eigen::Upper>().solveInPlace(z);
  }
  return params.mean + z;
}

double matrix_normal_logdensity(const Eigen::MatrixXd& x, const MatrixNormalParams& params) {
  const Index r = params.mean.rows();
  const Index c = params.mean.cols();
  if (x.rows() != r || x.cols() != c || params.row_factor.rows() != r || params.row_factor.cols() != r ||
      params.col_cov.rows() != c || params.col_cov.cols() != c) {
    throw ConfigError("matrix-normal dimension mismatch");
  }
  const Eigen::MatrixXd col_l = spd_cholesky(params.col_cov, "column covariance");
  Eigen::MatrixXd a = x - params.mean;
  double log_det_row = 0.0;
  if (params.factor_kind == RowFactor::kCovarianceLower) {
    params.row_factor.triangularView<Eigen::Lower>().solveInPlace(a);
    log_det_row = 2.0 * log_abs_diag(params.row_factor);
  } else {
    a = params.row_factor.triangularView<Eigen::Upper>() * a;
    log_det_row = -2.0 * log_abs_diag(params.row_factor);
  }
  // tr(V^{-1} A^T A) = || L_V^{-1} A^T ||_F^2
  Eigen::MatrixXd at = a.transpose();
  col_l.triangularView<Eigen::Lower>().solveInPlace(at);
  const double log_det_col = 2.0 * log_abs_diag(col_l);
  return -0.5 * static_cast<double>(r * c) * kLog2Pi - 0.5 * static_cast<double>(c) * log_det_row -
         0.5 * static_cast<double>(r) * log_det_col - 0.5 * at.squaredNorm();
}

Eigen::MatrixXd sample_inverse_wishart(const InverseWishartParams& params, Rng& rng) {
  const Index q = params.scale.rows();
  require_square(params.scale, "inverse-Wishart scale");
  if (!(params.dof > static_cast<double>(q) - 1.0)) {
    throw ConfigError("inverse-Wishart degrees of freedom must exceed q - 1");
  }
  const Eigen::MatrixXd l = spd_cholesky(params.scale, "inverse-Wishart scale");
  // Bartlett factor A of Wishart(I, dof); Wishart(S^{-1}) = L^{-T} A A^T L^{-1}
  // and its inverse is (L A^{-T})(L A^{-T})^T.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(q, q);
  for (Index i = 0; i < q; ++i) {
    std::chi_squared_distribution<double> chi(params.dof - static_cast<double>(i));
    a(i, i) = std::sqrt(chi(rng.engine()));
    for (Index j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  // T = L A^{-T}  <=>  T A^T = L
  Eigen::MatrixXd t = l;
  a.transpose().triangularView<Eigen::Upper>().solveInPlace<Eigen::OnTheRight>(t);
  Eigen::MatrixXd sigma = t * t.transpose();
  return 0.5 * (sigma + sigma.transpose());
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double log_normal_cdf(double z) {
  if (z > -30.0) return std::log(normal_cdf(z));
  // asymptotic series for the lower tail
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - 0.5 * kLog2Pi - std::log(-z) + std::log(series);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw DomainError("normal_quantile requires p in [0, 1]");
  }
  // Acklam's rational approximation followed by one Halley step.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                 1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                 6.680131188771972e+01,  -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                 -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // refine against the tail that is represented accurately
  const double e = (p < 0.5) ? normal_cdf(x) - p : -(normal_cdf(-x) - (1.0 - p));
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

namespace {

// Exponential-proposal rejection for N(0,1) on (a, b), a >= 0 far in the tail.
double tail_rejection(double a, double b, Rng& rng) {
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  for (;;) {
    const double z = a - std::log(rng.uniform()) / alpha;
    if (z >= b) continue;
    if (std::log(rng.uniform()) <= -0.5 * (z - alpha) * (z - alpha)) return z;
  }
}

// Standardized draw on (a, b) with b <= 0 or a < 0 < b.
double standard_truncated(double a, double b, Rng& rng) {
  if (b < -35.0) return -tail_rejection(-b, -a, rng);
  const double pa = normal_cdf(a);
  const double pb = normal_cdf(b);
  for (int attempt = 0; attempt < 64; ++attempt) {
    const double u = pa + rng.uniform() * (pb - pa);
    const double x = normal_quantile(u);
    if (x > a && x < b) return x;
  }
  // mass too thin for the inverse CDF; fall back to a uniform-proposal sampler
  const double mode = std::clamp(0.0, a, b);
  for (;;) {
    const double x = rng.uniform(a, b);
    if (std::log(rng.uniform()) <= -0.5 * (x * x - mode * mode)) return x;
  }
}

}  // namespace

double sample_truncated_normal(double mean, double sd, double low, double high, Rng& rng) {
  if (!(low < high)) throw ConfigError("truncated normal requires low < high");
  if (!(sd > 0.0)) throw ConfigError("truncated normal requires sd > 0");
  double a = (low - mean) / sd;
  double b = (high - mean) / sd;
  double x;
  if (a >= 0.0) {
    // reflect into the lower tail where Phi is resolved to full relative precision
    x = -standard_truncated(-b, -a, rng);
  } else {
    x = standard_truncated(a, b, rng);
  }
  const double draw = mean + sd * x;
  return std::clamp(draw, std::nextafter(low, high), std::nextafter(high, low));
}

double log_trunc_mass(double mean, double sd, double low, double high) {
  if (!(low < high)) throw ConfigError("truncated normal requires low < high");
  if (!(sd > 0.0)) throw ConfigError("truncated normal requires sd > 0");
  double a = (low - mean) / sd;
  double b = (high - mean) / sd;
  if (a >= 0.0) {
    const double t = -a;
    a = -b;
    b = t;
  }
  const double lb = log_normal_cdf(b);
  const double la = log_normal_cdf(a);
  if (la == -std::numeric_limits<double>::infinity()) return lb;
  return lb + std::log1p(-std::exp(la - lb));
}

}  // namespace mtvgp
