#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/dataset.hpp"
#include "mtvgp/mcmc.hpp"
#include "mtvgp/vecchia.hpp"

namespace mtvgp {

/// Posterior predictive draws at u prediction sites, in prediction-site order.
struct PredictiveDraws {
  Index u = 0, q = 0;
  std::vector<Eigen::MatrixXd> w_star;  // u x q per stored chain draw
  std::vector<Eigen::MatrixXd> y_star;

  std::size_t size() const noexcept { return w_star.size(); }
};

/// Precision-block kriging from observed to prediction sites.
///
/// The joint ordering puts every observed site before every prediction site,
/// so the last u rows of the joint factor describe the prediction block.
/// Blocks are cached per distinct phi.
class Predictor {
 public:
  /// `target` supplies prediction sites, covariates and response model
  /// (its responses are ignored). Throws DataError for coincident sites.
  /// `train` must outlive the predictor.
  Predictor(const SpatialDataset& train, const SpatialDataset& target, Index m, double nu,
            double jitter = kDefaultJitter);

  Index n() const noexcept { return joint_.n_observed; }
  Index u() const noexcept { return joint_.n_prediction; }

  const PredictionBlocks& blocks(double phi) const;
  /// Conditional correlation of W* given W, in prediction-site order.
  Eigen::MatrixXd conditional_covariance(double phi) const;

  /// W* for one parameter draw (w in training order). With `noise` false the
  /// draw is the conditional mean.
  Eigen::MatrixXd sample_latent(const Eigen::MatrixXd& w, const Eigen::MatrixXd& b, const Eigen::MatrixXd& sigma,
                                double phi, Rng& rng, bool noise = true) const;

  /// One (W*, Y*) pair per stored draw; draw l uses rng.split(l).
  PredictiveDraws sample(const PosteriorChain& chain, const Rng& rng, bool noise = true, int threads = 1) const;

 private:
  const SpatialDataset* train_;
  Eigen::MatrixXd x_star_;
  ResponseModel target_model_;
  JointOrdering joint_;
  std::shared_ptr<const VecchiaStructure> structure_;
  double nu_;
  double jitter_;
  mutable std::map<double, std::shared_ptr<const PredictionBlocks>> cache_;
};

struct PredictiveSummary {
  Eigen::MatrixXd mean, median, lower, upper;  // u x q
  double level = 0.95;
};

/// Equal-tailed empirical intervals; requires at least two draws.
PredictiveSummary predictive_summary(const std::vector<Eigen::MatrixXd>& draws, double level);

/// Long-format CSV: site_id,response_id,draw_id,w_star,y_star.
std::string predictive_draws_csv(const PredictiveDraws& draws, const std::vector<std::string>& comments = {});

}  // namespace mtvgp
