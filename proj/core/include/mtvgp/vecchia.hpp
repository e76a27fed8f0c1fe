#pragma once

#include <cstdint>
#include <iosfwd>
#include <list>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "mtvgp/geometry.hpp"
#include "mtvgp/kernels.hpp"
#include "mtvgp/random.hpp"

namespace mtvgp {

/*
 * Vecchia approximation of a Matern Gaussian field.
 *
 * For an ordered site list with succeeding-neighbor conditioning sets M(i),
 * the approximate density factorizes into conditionals W_i | W_{M(i)}. Each
 * conditional contributes one row of an upper-triangular factor U with
 *
 *     U[i][i] = v_i^{-1/2},   U[i][j] = -v_i^{-1/2} b_i[j]  (j in M(i)),
 *
 * where b_i and v_i are the kriging weights and conditional variance. The
 * approximate precision is K_(m)^{-1} = U^T U. Every row index in this file
 * refers to the factor ordering, not to the original site order.
 */

/// Ordering, conditioning sets and the within-set distances they need.
/// Distances are independent of (phi, nu), so one structure serves every
/// factor rebuild in an MCMC run.
class VecchiaStructure {
 public:
  VecchiaStructure(const SiteSet& sites, Ordering order, ConditioningSets sets);

  Index size() const noexcept { return static_cast<Index>(sets_.sets.size()); }
  Index max_neighbors() const noexcept { return sets_.m; }
  const Ordering& ordering() const noexcept { return order_; }
  const ConditioningSets& sets() const noexcept { return sets_; }
  std::uint64_t site_hash() const noexcept { return site_hash_; }

  /// Distance between local members a and b of row i (0 = the site itself,
  /// 1..k = the conditioning set in ascending order).
  double local_distance(Index i, Index a, Index b) const;

 private:
  Ordering order_;
  ConditioningSets sets_;
  std::uint64_t site_hash_;
  std::vector<std::size_t> offset_;
  std::vector<double> dist_;  // packed strictly-lower distances per row
};

/// Sparse upper-triangular factor stored row-wise. Row i holds the diagonal
/// first, then the entries at M(i) in ascending column order.
class VecchiaFactor {
 public:
  VecchiaFactor() = default;

  static VecchiaFactor identity(Index n);
  /// Assembles a factor from CSR arrays; throws NumericError when the layout
  /// is not upper-triangular with a positive leading diagonal in every row.
  static VecchiaFactor from_csr(Index m, Ordering order, std::vector<std::size_t> row_ptr,
                                std::vector<Index> cols, std::vector<double> values);

  Index size() const noexcept { return static_cast<Index>(row_ptr_.empty() ? 0 : row_ptr_.size() - 1); }
  Index max_neighbors() const noexcept { return m_; }
  const Ordering& ordering() const noexcept { return order_; }

  std::span<const Index> row_columns(Index i) const;
  std::span<const double> row_values(Index i) const;
  double diagonal(Index i) const { return values_[row_ptr_[static_cast<std::size_t>(i)]]; }

  Eigen::SparseMatrix<double> to_sparse() const;
  Eigen::MatrixXd to_dense() const;

  /// Binary serialization (little-endian).
  void save(std::ostream& out) const;
  static VecchiaFactor load(std::istream& in);

  bool operator==(const VecchiaFactor&) const = default;

 private:
  Index m_ = 0;
  Ordering order_;
  std::vector<std::size_t> row_ptr_;
  std::vector<Index> cols_;
  std::vector<double> values_;
};

/// Builds U row by row in O(n m^3). `jitter` is added to the diagonal of each
/// local conditioning block. Rows are independent; `threads > 1` splits them
/// across OpenMP threads with bit-identical output.
VecchiaFactor build_factor(const VecchiaStructure& structure, const MaternParams& params,
                           double jitter = kDefaultJitter, int threads = 1);

VecchiaFactor build_factor(const SiteSet& sites, const Ordering& order, const ConditioningSets& sets,
                           const MaternParams& params, double jitter = kDefaultJitter);

/// log |K_(m)^{-1}| = 2 sum log U[i][i].
double logdet_precision(const VecchiaFactor& f);

/// U * M.
Eigen::MatrixXd apply_factor(const VecchiaFactor& f, const Eigen::MatrixXd& m);

/// U^{-1} * M by back substitution.
Eigen::MatrixXd solve_factor(const VecchiaFactor& f, const Eigen::MatrixXd& m);

/// mean + U^{-1} Z L^T with Z standard normal and L the lower factor of the
/// column covariance: row covariance K_(m), column covariance L L^T.
Eigen::MatrixXd sample_latent_prior(const VecchiaFactor& f, const Eigen::MatrixXd& mean,
                                    const Eigen::MatrixXd& col_factor, Rng& rng);

/// Log density of MN(mean, (U^T U)^{-1}, L L^T) at w, given the lower
/// Cholesky factor L of the column covariance.
double latent_logdensity(const VecchiaFactor& f, const Eigen::MatrixXd& w, const Eigen::MatrixXd& mean,
                         const Eigen::MatrixXd& col_chol);

/// Q^{(u,u)} and Q^{(u,n)} of Q = U^T U for a factor whose last u ordered
/// positions are prediction sites, with a sparse Cholesky of Q^{(u,u)} in the
/// given order.
class PredictionBlocks {
 public:
  PredictionBlocks(Eigen::SparseMatrix<double> quu, Eigen::SparseMatrix<double> qun);

  Index n_observed() const noexcept { return qun_.cols(); }
  Index n_prediction() const noexcept { return qun_.rows(); }

  const Eigen::SparseMatrix<double>& quu() const noexcept { return quu_; }
  const Eigen::SparseMatrix<double>& qun() const noexcept { return qun_; }

  /// -(Q^{(u,u)})^{-1} Q^{(u,n)} R for an n x k residual matrix R.
  Eigen::MatrixXd conditional_shift(const Eigen::MatrixXd& residual) const;
  /// (Q^{(u,u)})^{-1} X.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& x) const;
  /// L^{-T} Z where Q^{(u,u)} = L L^T; rows then have covariance (Q^{(u,u)})^{-1}.
  Eigen::MatrixXd correlate(const Eigen::MatrixXd& z) const;
  /// Dense (Q^{(u,u)})^{-1}; for diagnostics.
  Eigen::MatrixXd covariance() const;
  bool dense_fallback() const noexcept { return dense_.has_value(); }

 private:
  Eigen::SparseMatrix<double> quu_;
  Eigen::SparseMatrix<double> qun_;
  using SparseLlt = Eigen::SimplicialLLT<Eigen::SparseMatrix<double>, Eigen::Lower, Eigen::NaturalOrdering<int>>;
  std::shared_ptr<SparseLlt> sparse_llt_;
  std::optional<Eigen::MatrixXd> dense_;    // lower Cholesky when the sparse path fails
};

PredictionBlocks prediction_blocks(const VecchiaFactor& joint_factor, Index n, Index u);

/// KL(N(0, K) || N(0, (U^T U)^{-1})) under max-min ordering with m neighbors.
/// Limited to n <= 500 because K is densified.
double kl_exact_vs_vecchia(const SiteSet& sites, const MaternParams& params, Index m,
                           double jitter = kDefaultJitter);

/// Factor cache keyed by (site hash, ordering, m, phi, nu, jitter).
///
/// Keeps the most recently used factors in memory; with a directory set,
/// factors are also written to and read from `<dir>/<key>.vfac`. One cache per
/// chain: the class is not synchronized.
class FactorCache {
 public:
  FactorCache(std::shared_ptr<const VecchiaStructure> structure, double nu, double jitter,
              std::size_t capacity = 8);

  void set_directory(std::string dir) { dir_ = std::move(dir); }
  void set_threads(int threads) { threads_ = threads; }

  /// Throws NumericError when the factor cannot be built at phi.
  std::shared_ptr<const VecchiaFactor> get(double phi);

  std::size_t hits() const noexcept { return hits_; }
  std::size_t misses() const noexcept { return misses_; }
  const VecchiaStructure& structure() const noexcept { return *structure_; }
  std::string key_string(double phi) const;

 private:
  std::shared_ptr<const VecchiaStructure> structure_;
  double nu_;
  double jitter_;
  std::size_t capacity_;
  std::string dir_;
  int threads_ = 1;
  std::list<std::pair<std::uint64_t, std::shared_ptr<const VecchiaFactor>>> lru_;
  std::unordered_map<std::uint64_t, decltype(lru_)::iterator> index_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

}  // namespace mtvgp
