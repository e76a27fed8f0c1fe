#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/families.hpp"
#include "mtvgp/geometry.hpp"

namespace mtvgp {

/// Sites, covariates and responses of one spatial data set.
struct SpatialDataset {
  SiteSet sites;
  Eigen::MatrixXd x;  // n x p, intercept first when present
  Eigen::MatrixXd y;  // n x q, NaN marks a missing response
  ResponseModel model;
  std::vector<std::string> covariate_names;  // p names, "intercept" included
  std::vector<std::string> response_names;   // q names

  Index n() const noexcept { return sites.size(); }
  Index p() const noexcept { return x.cols(); }
  Index q() const noexcept { return y.cols(); }

  /// Shape and support checks; throws DataError.
  void validate() const;
  /// Requires p < n and full column rank of x.
  void require_full_rank() const;

  SpatialDataset rows(std::span<const Index> ids) const;
  /// Single-response view used by the separate-model baseline.
  SpatialDataset response(Index j) const;
};

struct ResponseColumn {
  std::string name;
  FamilySpec family;
  std::string trials_column;  // binomial only; empty uses family.trials
};

struct DatasetSchema {
  std::vector<ResponseColumn> responses;
  std::vector<std::string> covariates;  // empty: every remaining column
  bool intercept = true;
};

/// Reads a CSV with header `lon,lat,<covariates...>,<responses...>`. Lines
/// starting with '#' are skipped; empty or NA response cells are missing.
SpatialDataset load_dataset(const std::string& path, const DatasetSchema& schema);
SpatialDataset parse_dataset(const std::string& csv_text, const DatasetSchema& schema);

/// CSV text in the format load_dataset reads; `comments` become '#' lines.
std::string dataset_to_csv(const SpatialDataset& data, const std::vector<std::string>& comments = {});

}  // namespace mtvgp
