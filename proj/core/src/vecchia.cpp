#include "mtvgp/vecchia.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

#include <Eigen/Cholesky>

#include "mtvgp/errors.hpp"

namespace mtvgp {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

std::size_t packed_count(std::size_t c) { return c * (c - 1) / 2; }

std::size_t packed_index(Index a, Index b) {
  if (a < b) std::swap(a, b);
  return static_cast<std::size_t>(a * (a - 1) / 2 + b);
}

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw DataError("truncated factor stream");
  return v;
}

constexpr char kFactorMagic[8] = {'M', 'T', 'V', 'G', 'P', 'F', 'A', 'C'};
constexpr std::uint32_t kFactorVersion = 1;

}  // namespace

VecchiaStructure::VecchiaStructure(const SiteSet& sites, Ordering order, ConditioningSets sets)
    : order_(std::move(order)), sets_(std::move(sets)), site_hash_(sites.hash()) {
  const Index n = sites.size();
  if (order_.size() != n || !order_.is_permutation())
    throw ConfigError("ordering is not a permutation of the sites");
  if (sets_.size() != n) throw ConfigError("conditioning sets do not match the number of sites");
  offset_.resize(static_cast<std::size_t>(n) + 1, 0);
  for (Index i = 0; i < n; ++i) {
    const auto& set = sets_.sets[static_cast<std::size_t>(i)];
    for (Index j : set)
      if (j <= i || j >= n) throw ConfigError("conditioning set entry outside the succeeding positions");
    offset_[static_cast<std::size_t>(i) + 1] = offset_[static_cast<std::size_t>(i)] + packed_count(set.size() + 1);
  }
  dist_.resize(offset_.back());
  std::vector<Index> local;
  for (Index i = 0; i < n; ++i) {
    const auto& set = sets_.sets[static_cast<std::size_t>(i)];
    local.assign(1, order_.perm[static_cast<std::size_t>(i)]);
    for (Index j : set) local.push_back(order_.perm[static_cast<std::size_t>(j)]);
    double* row = dist_.data() + offset_[static_cast<std::size_t>(i)];
    for (Index a = 1; a < static_cast<Index>(local.size()); ++a)
      for (Index b = 0; b < a; ++b)
        row[packed_index(a, b)] =
            sites.distance(local[static_cast<std::size_t>(a)], local[static_cast<std::size_t>(b)]);
  }
}

double VecchiaStructure::local_distance(Index i, Index a, Index b) const {
  if (a == b) return 0.0;
  return dist_[offset_[static_cast<std::size_t>(i)] + packed_index(a, b)];
}

VecchiaFactor VecchiaFactor::identity(Index n) {
  Ordering order;
  std::vector<std::size_t> row_ptr(static_cast<std::size_t>(n) + 1);
  std::vector<Index> cols(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    order.perm.push_back(i);
    row_ptr[static_cast<std::size_t>(i) + 1] = static_cast<std::size_t>(i) + 1;
    cols[static_cast<std::size_t>(i)] = i;
  }
  return from_csr(0, std::move(order), std::move(row_ptr), std::move(cols),
                  std::vector<double>(static_cast<std::size_t>(n), 1.0));
}

VecchiaFactor VecchiaFactor::from_csr(Index m, Ordering order, std::vector<std::size_t> row_ptr,
                                      std::vector<Index> cols, std::vector<double> values) {
  const Index n = order.size();
  if (static_cast<Index>(row_ptr.size()) != n + 1 || row_ptr.front() != 0 || row_ptr.back() != cols.size() ||
      cols.size() != values.size())
    throw NumericError("inconsistent factor layout");
  for (Index i = 0; i < n; ++i) {
    const std::size_t lo = row_ptr[static_cast<std::size_t>(i)];
    const std::size_t hi = row_ptr[static_cast<std::size_t>(i) + 1];
    if (hi <= lo || cols[lo] != i || !(values[lo] > 0.0))
      throw NumericError("factor row " + std::to_string(i) + " lacks a positive diagonal");
    for (std::size_t k = lo + 1; k < hi; ++k)
      if (cols[k] <= cols[k - 1] || cols[k] >= n) throw NumericError("factor is not upper triangular");
  }
  VecchiaFactor f;
  f.m_ = m;
  f.order_ = std::move(order);
  f.row_ptr_ = std::move(row_ptr);
  f.cols_ = std::move(cols);
  f.values_ = std::move(values);
  return f;
}

std::span<const Index> VecchiaFactor::row_columns(Index i) const {
  const std::size_t lo = row_ptr_[static_cast<std::size_t>(i)];
  return {cols_.data() + lo, row_ptr_[static_cast<std::size_t>(i) + 1] - lo};
}

std::span<const double> VecchiaFactor::row_values(Index i) const {
  const std::size_t lo = row_ptr_[static_cast<std::size_t>(i)];
  return {values_.data() + lo, row_ptr_[static_cast<std::size_t>(i) + 1] - lo};
}

Eigen::SparseMatrix<double> VecchiaFactor::to_sparse() const {
  const Index n = size();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(values_.size());
  for (Index i = 0; i < n; ++i) {
    auto c = row_columns(i);
    auto v = row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) trips.emplace_back(static_cast<int>(i), static_cast<int>(c[k]), v[k]);
  }
  Eigen::SparseMatrix<double> u(n, n);
  u.setFromTriplets(trips.begin(), trips.end());
  return u;
}

Eigen::MatrixXd VecchiaFactor::to_dense() const { return Eigen::MatrixXd(to_sparse()); }

void VecchiaFactor::save(std::ostream& out) const {
  out.write(kFactorMagic, sizeof(kFactorMagic));
  put(out, kFactorVersion);
  put(out, static_cast<std::int64_t>(size()));
  put(out, static_cast<std::int64_t>(m_));
  put(out, static_cast<std::uint64_t>(values_.size()));
  for (Index p : order_.perm) put(out, static_cast<std::int64_t>(p));
  for (std::size_t p : row_ptr_) put(out, static_cast<std::uint64_t>(p));
  for (Index c : cols_) put(out, static_cast<std::int64_t>(c));
  out.write(reinterpret_cast<const char*>(values_.data()),
            static_cast<std::streamsize>(values_.size() * sizeof(double)));
  if (!out) throw DataError("failed to write factor");
}

VecchiaFactor VecchiaFactor::load(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kFactorMagic, sizeof(magic)) != 0) throw DataError("not a factor file");
  if (get<std::uint32_t>(in) != kFactorVersion) throw DataError("unsupported factor file version");
  const auto n = get<std::int64_t>(in);
  const auto m = get<std::int64_t>(in);
  const auto nnz = get<std::uint64_t>(in);
  if (n < 0 || nnz > static_cast<std::uint64_t>(n) * static_cast<std::uint64_t>(n)) throw DataError("corrupt factor header");
  Ordering order;
  order.perm.resize(static_cast<std::size_t>(n));
  for (auto& p : order.perm) p = static_cast<Index>(get<std::int64_t>(in));
  std::vector<std::size_t> row_ptr(static_cast<std::size_t>(n) + 1);
  for (auto& p : row_ptr) p = static_cast<std::size_t>(get<std::uint64_t>(in));
  std::vector<Index> cols(nnz);
  for (auto& c : cols) c = static_cast<Index>(get<std::int64_t>(in));
  std::vector<double> values(nnz);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(nnz * sizeof(double)));
  if (!in) throw DataError("truncated factor stream");
  if (!order.is_permutation()) throw DataError("corrupt factor ordering");
  return from_csr(static_cast<Index>(m), std::move(order), std::move(row_ptr), std::move(cols), std::move(values));
}

VecchiaFactor build_factor(const VecchiaStructure& structure, const MaternParams& params, double jitter,
                           int threads) {
  params.validate();
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ConfigError("jitter must be finite and non-negative");
  const MaternKernel kernel(params);
  const Index n = structure.size();
  const auto& sets = structure.sets().sets;

  std::vector<std::size_t> row_ptr(static_cast<std::size_t>(n) + 1, 0);
  std::vector<Index> cols;
  for (Index i = 0; i < n; ++i) {
    const auto& set = sets[static_cast<std::size_t>(i)];
    row_ptr[static_cast<std::size_t>(i) + 1] = row_ptr[static_cast<std::size_t>(i)] + set.size() + 1;
    cols.push_back(i);
    cols.insert(cols.end(), set.begin(), set.end());
  }
  std::vector<double> values(cols.size());
  std::vector<unsigned char> failed(static_cast<std::size_t>(n), 0);
#ifndef _OPENMP
  (void)threads;
#endif

#pragma omp parallel for num_threads(threads > 0 ? threads : 1) schedule(static)
  for (Index i = 0; i < n; ++i) {
    const Index k = static_cast<Index>(sets[static_cast<std::size_t>(i)].size());
    double* out = values.data() + row_ptr[static_cast<std::size_t>(i)];
    if (k == 0) {
      out[0] = 1.0;
      continue;
    }
    Eigen::MatrixXd kmm(k, k);
    Eigen::VectorXd kvec(k);
    for (Index a = 0; a < k; ++a) {
      kmm(a, a) = 1.0 + jitter;
      kvec(a) = kernel(structure.local_distance(i, 0, a + 1));
      for (Index b = 0; b < a; ++b) kmm(a, b) = kmm(b, a) = kernel(structure.local_distance(i, a + 1, b + 1));
    }
    Eigen::LLT<Eigen::MatrixXd> llt(kmm);
    if (llt.info() != Eigen::Success) {
      failed[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    const Eigen::VectorXd b = llt.solve(kvec);
    const double v = 1.0 - kvec.dot(b);
    if (!(v > 0.0) || !std::isfinite(v) || !b.allFinite()) {
      failed[static_cast<std::size_t>(i)] = 1;
      continue;
    }
    const double s = 1.0 / std::sqrt(v);
    out[0] = s;
    for (Index a = 0; a < k; ++a) out[a + 1] = -b(a) * s;
  }

  for (Index i = 0; i < n; ++i)
    if (failed[static_cast<std::size_t>(i)])
      throw NumericError("local conditional at ordered position " + std::to_string(i) +
                         " is not positive definite (phi=" + std::to_string(params.phi) + ")");

  return VecchiaFactor::from_csr(structure.max_neighbors(), structure.ordering(), std::move(row_ptr),
                                 std::move(cols), std::move(values));
}

VecchiaFactor build_factor(const SiteSet& sites, const Ordering& order, const ConditioningSets& sets,
                           const MaternParams& params, double jitter) {
  return build_factor(VecchiaStructure(sites, order, sets), params, jitter, 1);
}

double logdet_precision(const VecchiaFactor& f) {
  double s = 0.0;
  for (Index i = 0; i < f.size(); ++i) s += std::log(f.diagonal(i));
  return 2.0 * s;
}

Eigen::MatrixXd apply_factor(const VecchiaFactor& f, const Eigen::MatrixXd& m) {
  if (m.rows() != f.size()) throw ConfigError("apply_factor: row count mismatch");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(m.rows(), m.cols());
  for (Index i = 0; i < f.size(); ++i) {
    auto c = f.row_columns(i);
    auto v = f.row_values(i);
    for (std::size_t k = 0; k < c.size(); ++k) out.row(i) += v[k] * m.row(c[k]);
  }
  return out;
}

Eigen::MatrixXd solve_factor(const VecchiaFactor& f, const Eigen::MatrixXd& m) {
  if (m.rows() != f.size()) throw ConfigError("solve_factor: row count mismatch");
  Eigen::MatrixXd x = m;
  for (Index i = f.size() - 1; i >= 0; --i) {
    auto c = f.row_columns(i);
    auto v = f.row_values(i);
    for (std::size_t k = 1; k < c.size(); ++k) x.row(i) -= v[k] * x.row(c[k]);
    x.row(i) /= v[0];
  }
  return x;
}

Eigen::MatrixXd sample_latent_prior(const VecchiaFactor& f, const Eigen::MatrixXd& mean,
                                    const Eigen::MatrixXd& col_factor, Rng& rng) {
  if (mean.rows() != f.size() || mean.cols() != col_factor.rows())
    throw ConfigError("sample_latent_prior: dimension mismatch");
  const Eigen::MatrixXd z = standard_normal_matrix(f.size(), col_factor.cols(), rng);
  return mean + solve_factor(f, z * col_factor.transpose());
}

double latent_logdensity(const VecchiaFactor& f, const Eigen::MatrixXd& w, const Eigen::MatrixXd& mean,
                         const Eigen::MatrixXd& col_chol) {
  const double n = static_cast<double>(w.rows());
  const double q = static_cast<double>(w.cols());
  const Eigen::MatrixXd r = apply_factor(f, w - mean);
  const Eigen::MatrixXd z = col_chol.triangularView<Eigen::Lower>().solve(r.transpose());
  const double logdet_col = 2.0 * col_chol.diagonal().array().log().sum();
  return -0.5 * n * q * std::log(2.0 * std::numbers::pi) + 0.5 * q * logdet_precision(f) - 0.5 * n * logdet_col -
         0.5 * z.squaredNorm();
}

PredictionBlocks::PredictionBlocks(Eigen::SparseMatrix<double> quu, Eigen::SparseMatrix<double> qun)
    : quu_(std::move(quu)), qun_(std::move(qun)) {
  if (quu_.rows() == 0) return;
  auto llt = std::make_shared<SparseLlt>();
  llt->compute(quu_);
  if (llt->info() == Eigen::Success) {
    sparse_llt_ = std::move(llt);
    return;
  }
  if (quu_.rows() > 2000) throw NumericError("sparse Cholesky of the prediction precision failed");
  Eigen::LLT<Eigen::MatrixXd> dense{Eigen::MatrixXd(quu_)};
  if (dense.info() != Eigen::Success) throw NumericError("prediction precision is not positive definite");
  dense_ = Eigen::MatrixXd(dense.matrixL());
}

Eigen::MatrixXd PredictionBlocks::solve(const Eigen::MatrixXd& x) const {
  if (x.rows() == 0) return x;
  if (sparse_llt_) return sparse_llt_->solve(x);
  Eigen::MatrixXd y = dense_->triangularView<Eigen::Lower>().solve(x);
  dense_->transpose().triangularView<Eigen::Upper>().solveInPlace(y);
  return y;
}

Eigen::MatrixXd PredictionBlocks::conditional_shift(const Eigen::MatrixXd& residual) const {
  if (residual.rows() != n_observed()) throw ConfigError("conditional_shift: row count mismatch");
  return -solve(qun_ * residual);
}

Eigen::MatrixXd PredictionBlocks::correlate(const Eigen::MatrixXd& z) const {
  if (z.rows() == 0) return z;
  if (sparse_llt_) return sparse_llt_->matrixU().solve(z);
  return dense_->transpose().triangularView<Eigen::Upper>().solve(z);
}

Eigen::MatrixXd PredictionBlocks::covariance() const {
  return solve(Eigen::MatrixXd::Identity(n_prediction(), n_prediction()));
}

PredictionBlocks prediction_blocks(const VecchiaFactor& joint_factor, Index n, Index u) {
  if (n < 0 || u < 0 || n + u != joint_factor.size()) throw ConfigError("prediction_blocks: n + u must match the factor size");
  const Eigen::SparseMatrix<double> full = joint_factor.to_sparse();
  const Eigen::SparseMatrix<double> up = full.rightCols(u);
  const Eigen::SparseMatrix<double> un = full.leftCols(n);
  Eigen::SparseMatrix<double> quu = up.transpose() * up;
  Eigen::SparseMatrix<double> qun = up.transpose() * un;
  return PredictionBlocks(std::move(quu), std::move(qun));
}

double kl_exact_vs_vecchia(const SiteSet& sites, const MaternParams& params, Index m, double jitter) {
  const Index n = sites.size();
  if (n > 500) throw ConfigError("kl_exact_vs_vecchia is limited to n <= 500");
  const Ordering order = maxmin_order(sites);
  const ConditioningSets sets = build_conditioning_sets(sites, order, m);
  const VecchiaFactor f = build_factor(sites, order, sets, params, jitter);
  const Eigen::MatrixXd k = correlation_submatrix(sites, order.perm, order.perm, params);
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericError("exact correlation matrix is not positive definite");
  const Eigen::MatrixXd lk = llt.matrixL();
  const Eigen::MatrixXd ul = apply_factor(f, lk);
  const double logdet_k = 2.0 * lk.diagonal().array().log().sum();
  const double kl = 0.5 * (ul.squaredNorm() - static_cast<double>(n) - logdet_precision(f) - logdet_k);
  if (kl < 0.0 && kl > -1e-10) return 0.0;
  return kl;
}

namespace {

std::uint64_t mix(std::uint64_t h, std::uint64_t v) { return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2))); }

}  // namespace

FactorCache::FactorCache(std::shared_ptr<const VecchiaStructure> structure, double nu, double jitter,
                         std::size_t capacity)
    : structure_(std::move(structure)), nu_(nu), jitter_(jitter), capacity_(capacity == 0 ? 1 : capacity) {
  if (!structure_) throw ConfigError("FactorCache requires a structure");
}

std::string FactorCache::key_string(double phi) const {
  std::uint64_t h = structure_->site_hash();
  h = mix(h, structure_->ordering().hash());
  h = mix(h, static_cast<std::uint64_t>(structure_->max_neighbors()));
  h = mix(h, std::bit_cast<std::uint64_t>(phi));
  h = mix(h, std::bit_cast<std::uint64_t>(nu_));
  h = mix(h, std::bit_cast<std::uint64_t>(jitter_));
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::shared_ptr<const VecchiaFactor> FactorCache::get(double phi) {
  const std::string key_text = key_string(phi);
  const std::uint64_t key = std::stoull(key_text, nullptr, 16);
  if (auto it = index_.find(key); it != index_.end()) {
    ++hits_;
    lru_.splice(lru_.begin(), lru_, it->second);
    return it->second->second;
  }
  ++misses_;
  std::shared_ptr<const VecchiaFactor> factor;
  namespace fs = std::filesystem;
  const fs::path file = dir_.empty() ? fs::path() : fs::path(dir_) / (key_text + ".vfac");
  if (!dir_.empty() && fs::exists(file)) {
    std::ifstream in(file, std::ios::binary);
    try {
      factor = std::make_shared<const VecchiaFactor>(VecchiaFactor::load(in));
      if (factor->ordering().perm != structure_->ordering().perm) factor.reset();
    } catch (const DataError&) {
      factor.reset();
    }
  }
  if (!factor) {
    factor = std::make_shared<const VecchiaFactor>(build_factor(*structure_, MaternParams{phi, nu_}, jitter_, threads_));
    if (!dir_.empty()) {
      fs::create_directories(dir_);
      const fs::path tmp = file.string() + ".tmp";
      {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        factor->save(out);
      }
      fs::rename(tmp, file);
    }
  }
  lru_.emplace_front(key, factor);
  index_[key] = lru_.begin();
  if (lru_.size() > capacity_) {
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
  return factor;
}

}  // namespace mtvgp
