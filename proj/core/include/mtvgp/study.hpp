#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/config.hpp"
#include "mtvgp/evaluate.hpp"
#include "mtvgp/mcmc.hpp"

namespace mtvgp {

/// Posterior summary of one off-diagonal Sigma entry.
struct CrossCovarianceSummary {
  Index i = 0, j = 0;
  double mean = 0.0, lower = 0.0, upper = 0.0;
};

/// Joint model against the separate baseline (q independent single-response
/// fits through the same sampler) on one train/hold-out pair.
struct ModelComparison {
  PosteriorChain joint_chain;
  std::vector<PosteriorChain> separate_chains;
  WaicReport joint_waic;
  double separate_waic = 0.0;
  bool has_holdout = false;
  ElpdReport joint_predictive;
  MeanWithSe separate_elpd;
  MeanWithSe separate_coverage;
  std::vector<CrossCovarianceSummary> cross;
};

/// Prior of the single-response model for response j: M column j, V, S_jj
/// and dof reduced by q - 1, the marginal of the joint inverse-Wishart.
PriorSpec marginal_prior(const PriorSpec& joint, Index j);

ModelComparison compare_models(const SpatialDataset& train, const SpatialDataset* holdout, const RunConfig& cfg,
                               std::uint64_t seed);

struct StudyRow {
  int replicate = 0;
  double joint_waic = 0.0, separate_waic = 0.0;
  double joint_elpd = 0.0, separate_elpd = 0.0;
  double joint_coverage = 0.0, separate_coverage = 0.0;
  long joint_coverage_hits = 0, separate_coverage_hits = 0, coverage_entries = 0;
  double sigma12_mean = 0.0, sigma12_lower = 0.0, sigma12_upper = 0.0;
  bool sigma12_covered = false;
};

struct StudyResult {
  double sigma12_true = 0.0;
  std::vector<StudyRow> rows;
};

/// Replicated joint-versus-separate comparison over simulated data sets.
StudyResult replicate_study(const RunConfig& cfg);

/// Aggregate table (mean and SE across replicates) as JSON, rows as CSV.
std::string study_json(const StudyResult& result);
std::string study_csv(const StudyResult& result);

}  // namespace mtvgp
