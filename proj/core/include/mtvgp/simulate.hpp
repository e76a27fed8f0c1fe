#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/dataset.hpp"
#include "mtvgp/evaluate.hpp"
#include "mtvgp/families.hpp"
#include "mtvgp/random.hpp"

namespace mtvgp {

/// Synthetic design on the unit square with covariates [1, lon, lat].
struct SimulationScenario {
  Index n = 100;
  double holdout_fraction = 0.2;
  std::vector<FamilySpec> families;
  std::vector<std::string> response_names;  // defaults to y1..yq
  Eigen::MatrixXd b0;      // 3 x q
  Eigen::MatrixXd sigma0;  // q x q
  double phi0 = 0.1;
  double nu = 0.5;
  std::uint64_t seed = 1;
  int replicates = 1;
  Index dense_limit = 3000;  // above this the latent field is drawn from a Vecchia factor
  Index vecchia_m = 50;

  /// Gaussian-Poisson design with the default coefficients and
  /// Sigma0 = [[2, sigma12], [sigma12, 1]].
  static SimulationScenario gaussian_poisson(Index n, double phi0, double sigma12, std::uint64_t seed);
  /// Same with a Bernoulli second response.
  static SimulationScenario gaussian_bernoulli(Index n, double phi0, double sigma12, std::uint64_t seed);

  void validate() const;
};

struct SimulatedData {
  SpatialDataset train;
  SpatialDataset holdout;  // equals train when nothing is withheld; see has_holdout
  bool has_holdout = false;
  Eigen::MatrixXd w_train;
  Eigen::MatrixXd w_holdout;
  Split split;
};

/// Draws sites, latent field and responses, then withholds a random site subset.
SimulatedData simulate_dataset(const SimulationScenario& scn, Rng& rng);

/// Replicate r on its own generator stream (scn.seed, r).
SimulatedData simulate_replicate(const SimulationScenario& scn, int replicate);

/// Exact or Vecchia latent draw W = X B + (row field) with column covariance sigma.
Eigen::MatrixXd simulate_latent(const SiteSet& sites, const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sigma,
                                const MaternParams& params, Index dense_limit, Index vecchia_m, Rng& rng);

}  // namespace mtvgp
