#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mtvgp {

using Index = Eigen::Index;

/// Immutable set of n >= 1 distinct sites in R^d, one row per site.
class SiteSet {
 public:
  /// Throws DataError on empty input, non-finite coordinates or duplicate sites.
  explicit SiteSet(Eigen::MatrixXd coords);

  Index size() const noexcept { return coords_.rows(); }
  Index dim() const noexcept { return coords_.cols(); }
  const Eigen::MatrixXd& coords() const noexcept { return coords_; }

  double distance(Index i, Index j) const { return (coords_.row(i) - coords_.row(j)).norm(); }

  SiteSet subset(std::span<const Index> ids) const;

  /// Content hash of the coordinates (bitwise), used as a cache key.
  std::uint64_t hash() const noexcept;

 private:
  Eigen::MatrixXd coords_;
};

/// perm[k] = original index of the k-th ordered site.
struct Ordering {
  std::vector<Index> perm;

  Index size() const noexcept { return static_cast<Index>(perm.size()); }
  /// position[i] = ordered position of original site i.
  std::vector<Index> positions() const;
  bool is_permutation() const;
  std::uint64_t hash() const noexcept;
  bool operator==(const Ordering&) const = default;
};

/// Conditioning sets over ordered positions. sets[i] holds sorted positions > i.
struct ConditioningSets {
  Index m = 0;
  std::vector<std::vector<Index>> sets;

  Index size() const noexcept { return static_cast<Index>(sets.size()); }
};

Eigen::MatrixXd pairwise_distances(const SiteSet& sites);

/// Exact greedy max-min ordering. Starts at the site nearest the centroid;
/// every tie is broken toward the smaller original index.
Ordering maxmin_order(const SiteSet& sites);

/// Nearest min(m, n-1-i) succeeding ordered sites for every position i.
/// Requires 1 <= m <= n-1 (n == 1 accepts any m >= 1 and yields one empty set).
ConditioningSets build_conditioning_sets(const SiteSet& sites, const Ordering& order, Index m);

/// Ordering over the concatenation [observed; prediction] in which every
/// observed site precedes every prediction site.
struct JointOrdering {
  SiteSet sites;  // observed rows first, then prediction rows
  Ordering order;
  ConditioningSets sets;
  Index n_observed = 0;
  Index n_prediction = 0;
};

/// Throws DataError naming the pair when a prediction site coincides with an
/// observed site.
JointOrdering joint_prediction_ordering(const SiteSet& observed, const SiteSet& prediction, Index m);
/// Degenerate u = 0 form; identical to maxmin_order(observed).
JointOrdering joint_prediction_ordering(const SiteSet& observed, Index m);

/// Largest pairwise distance.
double domain_diameter(const SiteSet& sites);

}  // namespace mtvgp
