#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/dataset.hpp"
#include "mtvgp/geometry.hpp"
#include "mtvgp/random.hpp"

namespace mtvgp::testing {

/// n uniform sites in [0, 1]^d.
SiteSet uniform_sites(Index n, Rng& rng, Index d = 2);

/// One-sample Kolmogorov-Smirnov test against Uniform(low, high).
struct KsResult {
  double statistic = 0.0;
  double p_value = 0.0;
};
KsResult ks_uniform(std::vector<double> draws, double low, double high);

double mean(const std::vector<double>& v);
double variance(const std::vector<double>& v);
/// Monte Carlo standard error of the mean using the Geyer effective sample size.
double mc_standard_error(const std::vector<double>& v);

/// Dense conditional-Gaussian (covariance-form) kriging of the last u of n+u
/// jointly distributed rows with correlation K: returns mean weights
/// K_un K_nn^{-1} and conditional covariance K_uu - K_un K_nn^{-1} K_nu.
struct DenseKriging {
  Eigen::MatrixXd weights;
  Eigen::MatrixXd covariance;
};
DenseKriging dense_kriging(const Eigen::MatrixXd& k, Index n);

/// Dataset with default names y1.., x1.. (first covariate named intercept).
SpatialDataset make_dataset(const SiteSet& sites, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            std::vector<FamilySpec> families);

std::string data_path(const std::string& name);

/// Rows of a numeric CSV (header skipped).
std::vector<std::vector<double>> read_numeric_csv(const std::string& path);

}  // namespace mtvgp::testing
