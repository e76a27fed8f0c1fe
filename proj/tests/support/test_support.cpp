#include "test_support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "mtvgp/mcmc.hpp"

namespace mtvgp::testing {

SiteSet uniform_sites(Index n, Rng& rng, Index d) {
  Eigen::MatrixXd c(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index k = 0; k < d; ++k) c(i, k) = rng.uniform();
  return SiteSet(c);
}

KsResult ks_uniform(std::vector<double> draws, double low, double high) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = (draws[i] - low) / (high - low);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  // Kolmogorov limiting distribution with the Stephens small-sample correction.
  const double t = (std::sqrt(n) + 0.12 + 0.11 / std::sqrt(n)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) p += 2.0 * ((k % 2) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * t * t);
  return {d, std::clamp(p, 0.0, 1.0)};
}

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double variance(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

double mc_standard_error(const std::vector<double>& v) {
  return std::sqrt(variance(v) / effective_sample_size(v));
}

DenseKriging dense_kriging(const Eigen::MatrixXd& k, Index n) {
  const Index u = k.rows() - n;
  const Eigen::LLT<Eigen::MatrixXd> llt(k.topLeftCorner(n, n));
  DenseKriging out;
  out.weights = llt.solve(k.bottomLeftCorner(u, n).transpose()).transpose();
  out.covariance = k.bottomRightCorner(u, u) - out.weights * k.topRightCorner(n, u);
  return out;
}

SpatialDataset make_dataset(const SiteSet& sites, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                            std::vector<FamilySpec> families) {
  SpatialDataset d{sites, x, y, ResponseModel{std::move(families), {}}, {}, {}};
  for (Index k = 0; k < x.cols(); ++k) d.covariate_names.push_back(k == 0 ? "intercept" : "x" + std::to_string(k));
  for (Index j = 0; j < y.cols(); ++j) d.response_names.push_back("y" + std::to_string(j + 1));
  return d;
}

std::string data_path(const std::string& name) { return std::string(MTVGP_TEST_DATA_DIR) + "/" + name; }

std::vector<std::vector<double>> read_numeric_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mtvgp::testing
