#include "mtvgp/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <numeric>
#include <string>

#include "mtvgp/errors.hpp"

namespace mtvgp {

namespace {

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string describe_site(const Eigen::MatrixXd& coords, Index i) {
  std::string out = "(";
  for (Index c = 0; c < coords.cols(); ++c) {
    if (c) out += ", ";
    out += std::to_string(coords(i, c));
  }
  return out + ")";
}

}  // namespace

SiteSet::SiteSet(Eigen::MatrixXd coords) : coords_(std::move(coords)) {
  if (coords_.rows() < 1 || coords_.cols() < 1) throw DataError("site set must contain at least one site");
  if (!coords_.allFinite()) throw DataError("site coordinates must be finite");

  std::vector<Index> idx(static_cast<std::size_t>(coords_.rows()));
  std::iota(idx.begin(), idx.end(), Index{0});
  auto less = [&](Index a, Index b) {
    for (Index c = 0; c < coords_.cols(); ++c) {
      if (coords_(a, c) != coords_(b, c)) return coords_(a, c) < coords_(b, c);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), [&](Index a, Index b) { return less(a, b) || (!less(b, a) && a < b); });
  for (std::size_t k = 1; k < idx.size(); ++k) {
    if (!less(idx[k - 1], idx[k]) && !less(idx[k], idx[k - 1])) {
      throw DataError("duplicate site coordinates at rows " + std::to_string(idx[k - 1]) + " and " +
                      std::to_string(idx[k]) + " " + describe_site(coords_, idx[k]));
    }
  }
}

SiteSet SiteSet::subset(std::span<const Index> ids) const {
  Eigen::MatrixXd sub(static_cast<Index>(ids.size()), coords_.cols());
  for (std::size_t k = 0; k < ids.size(); ++k) sub.row(static_cast<Index>(k)) = coords_.row(ids[k]);
  return SiteSet(std::move(sub));
}

std::uint64_t SiteSet::hash() const noexcept {
  const Index dims[2] = {coords_.rows(), coords_.cols()};
  auto h = fnv1a(dims, sizeof(dims));
  return fnv1a(coords_.data(), sizeof(double) * static_cast<std::size_t>(coords_.size()), h);
}

std::vector<Index> Ordering::positions() const {
  std::vector<Index> pos(perm.size());
  for (std::size_t k = 0; k < perm.size(); ++k) pos[static_cast<std::size_t>(perm[k])] = static_cast<Index>(k);
  return pos;
}

bool Ordering::is_permutation() const {
  std::vector<char> seen(perm.size(), 0);
  for (Index p : perm) {
    if (p < 0 || p >= size() || seen[static_cast<std::size_t>(p)]) return false;
    seen[static_cast<std::size_t>(p)] = 1;
  }
  return true;
}

std::uint64_t Ordering::hash() const noexcept { return fnv1a(perm.data(), perm.size() * sizeof(Index)); }

Eigen::MatrixXd pairwise_distances(const SiteSet& sites) {
  const Index n = sites.size();
  Eigen::MatrixXd d = Eigen::MatrixXd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = j + 1; i < n; ++i) {
      d(i, j) = sites.distance(i, j);
      d(j, i) = d(i, j);
    }
  }
  return d;
}

Ordering maxmin_order(const SiteSet& sites) {
  const Index n = sites.size();
  const auto& x = sites.coords();
  const Eigen::RowVectorXd centroid = x.colwise().mean();

  Ordering order;
  order.perm.reserve(static_cast<std::size_t>(n));

  Index first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const double d = (x.row(i) - centroid).squaredNorm();
    if (d < best) {
      best = d;
      first = i;
    }
  }

  std::vector<char> used(static_cast<std::size_t>(n), 0);
  std::vector<double> min_dist(static_cast<std::size_t>(n), std::numeric_limits<double>::infinity());
  Index current = first;
  for (Index k = 0; k < n; ++k) {
    order.perm.push_back(current);
    used[static_cast<std::size_t>(current)] = 1;
    Index next = -1;
    double far = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      auto& md = min_dist[static_cast<std::size_t>(i)];
      md = std::min(md, (x.row(i) - x.row(current)).squaredNorm());
      if (md > far) {
        far = md;
        next = i;
      }
    }
    current = next;
  }
  return order;
}

namespace {

// Nearest `count` candidates among ordered positions [from, n) to position i;
// ties resolved toward the smaller position. Result sorted ascending.
std::vector<Index> nearest_successors(const Eigen::MatrixXd& ordered, Index i, Index from, Index count) {
  const Index n = ordered.rows();
  std::vector<std::pair<double, Index>> cand;
  cand.reserve(static_cast<std::size_t>(n - from));
  for (Index j = from; j < n; ++j) cand.emplace_back((ordered.row(j) - ordered.row(i)).squaredNorm(), j);
  auto mid = cand.begin() + count;
  std::partial_sort(cand.begin(), mid, cand.end());
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(count));
  for (auto it = cand.begin(); it != mid; ++it) out.push_back(it->second);
  std::sort(out.begin(), out.end());
  return out;
}

Eigen::MatrixXd ordered_coords(const SiteSet& sites, const Ordering& order) {
  Eigen::MatrixXd x(sites.size(), sites.dim());
  for (Index k = 0; k < order.size(); ++k) x.row(k) = sites.coords().row(order.perm[static_cast<std::size_t>(k)]);
  return x;
}

}  // namespace

ConditioningSets build_conditioning_sets(const SiteSet& sites, const Ordering& order, Index m) {
  const Index n = sites.size();
  if (order.size() != n || !order.is_permutation()) throw ConfigError("ordering does not match the site set");
  if (m < 1 || (n > 1 && m > n - 1)) {
    throw ConfigError("neighbor count m=" + std::to_string(m) + " must lie in [1, " + std::to_string(n - 1) + "]");
  }
  const Eigen::MatrixXd x = ordered_coords(sites, order);
  ConditioningSets cs;
  cs.m = m;
  cs.sets.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i + 1 < n; ++i) {
    cs.sets[static_cast<std::size_t>(i)] = nearest_successors(x, i, i + 1, std::min(m, n - 1 - i));
  }
  return cs;
}

JointOrdering joint_prediction_ordering(const SiteSet& observed, const SiteSet& prediction, Index m) {
  const Index n = observed.size();
  const Index u = prediction.size();
  if (observed.dim() != prediction.dim()) throw DataError("observed and prediction sites differ in dimension");
  for (Index k = 0; k < u; ++k) {
    for (Index i = 0; i < n; ++i) {
      if (observed.coords().row(i) == prediction.coords().row(k)) {
        throw DataError("prediction site " + std::to_string(k) + " coincides with observed site " + std::to_string(i));
      }
    }
  }

  Eigen::MatrixXd all(n + u, observed.dim());
  all.topRows(n) = observed.coords();
  all.bottomRows(u) = prediction.coords();

  Ordering order;
  order.perm = maxmin_order(observed).perm;
  for (Index k : maxmin_order(prediction).perm) order.perm.push_back(n + k);

  SiteSet joint(std::move(all));
  auto sets = build_conditioning_sets(joint, order, m);
  return JointOrdering{std::move(joint), std::move(order), std::move(sets), n, u};
}

JointOrdering joint_prediction_ordering(const SiteSet& observed, Index m) {
  Ordering order = maxmin_order(observed);
  auto sets = build_conditioning_sets(observed, order, m);
  return JointOrdering{observed, std::move(order), std::move(sets), observed.size(), 0};
}

double domain_diameter(const SiteSet& sites) {
  double best = 0.0;
  for (Index i = 0; i < sites.size(); ++i)
    for (Index j = i + 1; j < sites.size(); ++j) best = std::max(best, sites.distance(i, j));
  return best;
}

}  // namespace mtvgp
