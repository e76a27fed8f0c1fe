#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/families.hpp"
#include "mtvgp/geometry.hpp"
#include "mtvgp/mcmc.hpp"
#include "mtvgp/predict.hpp"
#include "mtvgp/random.hpp"

namespace mtvgp {

/// WAIC from the likelihood conditional on the latent draws, pointwise over
/// every observed (i, j): WAIC = -2 (sum lppd - sum p_waic).
struct WaicReport {
  double waic = 0.0;
  double lppd = 0.0;
  double p_waic = 0.0;
  Eigen::MatrixXd pointwise_lppd;    // n x q
  Eigen::MatrixXd pointwise_p_waic;  // n x q, sample variance across draws
};

WaicReport waic(const PosteriorChain& chain, const Eigen::MatrixXd& y, const ResponseModel& model);
/// Same from a precomputed draws-by-point log-likelihood table.
WaicReport waic_from_table(const std::vector<Eigen::MatrixXd>& loglik);

struct MeanWithSe {
  double mean = 0.0;
  double se = 0.0;
};

/// log mean_l exp(sum_j log f(y_ij | w*_l,ij)) for every hold-out site i.
Eigen::VectorXd site_log_predictive_density(const PredictiveDraws& draws, const Eigen::MatrixXd& y_holdout,
                                            const ResponseModel& model);

/// Indicators that each observed hold-out entry lies in its equal-tailed
/// interval of the Y* draws.
std::vector<bool> coverage_indicators(const PredictiveDraws& draws, const Eigen::MatrixXd& y_holdout, double level);

MeanWithSe mean_with_se(const Eigen::VectorXd& values);
/// Proportion with binomial standard error sqrt(c (1 - c) / N).
MeanWithSe proportion_with_se(const std::vector<bool>& hits);

struct ElpdReport {
  MeanWithSe elpd;      // per hold-out site
  MeanWithSe coverage;  // per hold-out entry
  Eigen::VectorXd pointwise;
};

ElpdReport elpd_and_coverage(const PredictiveDraws& draws, const Eigen::MatrixXd& y_holdout,
                             const ResponseModel& model, double level);

struct VariogramBin {
  double lag = 0.0;        // bin midpoint
  double mean_distance = 0.0;
  double semivariance = 0.0;  // NaN for empty bins
  long count = 0;
};

/// Matheron estimator over equal-width bins on (0, max_lag].
std::vector<VariogramBin> empirical_semivariogram(const Eigen::VectorXd& residuals, const SiteSet& sites,
                                                  int n_bins, double max_lag);
std::string semivariogram_csv(const std::vector<VariogramBin>& bins);

/// Seeded random partition of 0..n-1 into k folds of near-equal size.
std::vector<std::vector<Index>> kfold_split(Index n, int k, Rng& rng);

struct Split {
  std::vector<Index> train;
  std::vector<Index> test;
};
/// Withholds round(fraction * n) randomly chosen indices; both parts sorted.
Split holdout_split(Index n, double fraction, Rng& rng);

/// JSON text for the metric reports.
std::string metric_report_json(const WaicReport* waic, const ElpdReport* elpd);

}  // namespace mtvgp
