#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/dataset.hpp"
#include "mtvgp/families.hpp"
#include "mtvgp/mcmc.hpp"
#include "mtvgp/simulate.hpp"

namespace mtvgp {

/// A matrix given either as scalar * I (or a constant fill for means) or in full.
struct MatrixSpec {
  double scalar = 0.0;
  Eigen::MatrixXd full;  // used when non-empty

  bool is_full() const noexcept { return full.size() != 0; }
  /// Resolves to rows x cols; scalar specs give scalar * I when `identity`,
  /// otherwise a constant matrix.
  Eigen::MatrixXd resolve(Index rows, Index cols, bool identity, const char* what) const;
};

struct ResponseConfig {
  std::string name;
  FamilySpec family;
  std::string trials_column;
};

struct DataConfig {
  std::string path;
  std::string holdout_path;
  std::vector<ResponseConfig> responses;
  std::vector<std::string> covariates;
  bool intercept = true;
};

struct PriorConfig {
  MatrixSpec m{0.0, {}};
  MatrixSpec v{100.0, {}};
  MatrixSpec s{1.0, {}};
  double dof = 0.0;    // 0 selects q + 1
  double b_phi = 0.0;  // 0 derives it from the correlation threshold
  double correlation_threshold = 0.05;
};

struct SimulationConfig {
  Index n = 100;
  double holdout_fraction = 0.2;
  double phi0 = 0.1;
  MatrixSpec b0;
  MatrixSpec sigma0;
  int replicates = 1;
};

/// Complete run configuration. Serialized as JSON; unknown keys are rejected.
struct RunConfig {
  DataConfig data;
  PriorConfig prior;
  double nu = 0.5;
  McmcConfig mcmc;
  int chains = 1;
  int threads = 1;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  double level = 0.95;
  SimulationConfig simulation;

  /// Defaults: Gaussian y1 and Poisson y2, simulation coefficients
  /// [[1, -0.5], [3, 1.5], [-1.2, 0]] and Sigma0 = [[2, 1], [1, 1]].
  RunConfig();

  void validate() const;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
/// Canonical JSON (every key present, fixed key order).
std::string config_to_json(const RunConfig& cfg);
/// FNV-1a of the canonical JSON as 16 hex digits, ignoring the output directory and thread count.
std::string config_hash(const RunConfig& cfg);

DatasetSchema dataset_schema(const RunConfig& cfg);
/// Prior for `data`, deriving b_phi from its sites when not fixed.
PriorSpec resolve_prior(const RunConfig& cfg, const SpatialDataset& data);
/// MCMC settings with the run seed and thread count applied.
McmcConfig resolve_mcmc(const RunConfig& cfg);
SimulationScenario resolve_scenario(const RunConfig& cfg);

}  // namespace mtvgp
