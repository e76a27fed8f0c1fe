#include <doctest.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "mtvgp/errors.hpp"
#include "mtvgp/geometry.hpp"
#include "test_support.hpp"

using namespace mtvgp;

namespace {

// Direct O(n^3) max-min ordering with the same start and tie rules.
std::vector<Index> brute_maxmin(const SiteSet& s) {
  const Index n = s.size();
  const Eigen::RowVectorXd centroid = s.coords().colwise().mean();
  Index first = 0;
  double best = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < n; ++i) {
    const double d = (s.coords().row(i) - centroid).norm();
    if (d < best) {
      best = d;
      first = i;
    }
  }
  std::vector<Index> out{first};
  std::vector<bool> used(static_cast<std::size_t>(n), false);
  used[static_cast<std::size_t>(first)] = true;
  while (static_cast<Index>(out.size()) < n) {
    Index pick = -1;
    double pick_d = -1.0;
    for (Index i = 0; i < n; ++i) {
      if (used[static_cast<std::size_t>(i)]) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (Index j : out) dmin = std::min(dmin, s.distance(i, j));
      if (dmin > pick_d) {
        pick_d = dmin;
        pick = i;
      }
    }
    out.push_back(pick);
    used[static_cast<std::size_t>(pick)] = true;
  }
  return out;
}

}  // namespace

TEST_CASE("site set rejects empty, non-finite and duplicate input") {
  CHECK_THROWS_AS(SiteSet(Eigen::MatrixXd(0, 2)), DataError);
  Eigen::MatrixXd bad(2, 2);
  bad << 0, 0, std::numeric_limits<double>::quiet_NaN(), 1;
  CHECK_THROWS_AS(SiteSet{bad}, DataError);
  Eigen::MatrixXd dup(3, 2);
  dup << 0, 0, 1, 1, 0, 0;
  CHECK_THROWS_AS(SiteSet{dup}, DataError);
}

TEST_CASE("max-min ordering matches the brute-force greedy construction") {
  Rng rng(11);
  for (Index n : {1, 2, 3, 7, 40, 120}) {
    const SiteSet s = testing::uniform_sites(n, rng);
    const Ordering o = maxmin_order(s);
    CHECK(o.is_permutation());
    CHECK(o.perm == brute_maxmin(s));
  }
}

TEST_CASE("max-min ordering on a regular grid breaks ties by index") {
  Eigen::MatrixXd c(9, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) c.row(3 * i + j) << i, j;
  const SiteSet s(c);
  const Ordering o = maxmin_order(s);
  CHECK(o.perm.front() == 4);  // the centre
  CHECK(o.perm == brute_maxmin(s));
}

TEST_CASE("positions invert the permutation") {
  Rng rng(5);
  const Ordering o = maxmin_order(testing::uniform_sites(25, rng));
  const auto pos = o.positions();
  for (Index k = 0; k < o.size(); ++k) CHECK(pos[static_cast<std::size_t>(o.perm[static_cast<std::size_t>(k)])] == k);
}

TEST_CASE("conditioning sets are the nearest succeeding sites") {
  Rng rng(3);
  const SiteSet s = testing::uniform_sites(60, rng);
  const Ordering o = maxmin_order(s);
  for (Index m : {1, 4, 10, 59}) {
    const ConditioningSets cs = build_conditioning_sets(s, o, m);
    REQUIRE(cs.size() == 60);
    for (Index i = 0; i < 60; ++i) {
      const auto& set = cs.sets[static_cast<std::size_t>(i)];
      CHECK(static_cast<Index>(set.size()) == std::min<Index>(m, 59 - i));
      CHECK(std::is_sorted(set.begin(), set.end()));
      // Brute force: sort succeeding positions by distance.
      std::vector<std::pair<double, Index>> cand;
      const Index oi = o.perm[static_cast<std::size_t>(i)];
      for (Index j = i + 1; j < 60; ++j) cand.emplace_back(s.distance(oi, o.perm[static_cast<std::size_t>(j)]), j);
      std::sort(cand.begin(), cand.end());
      std::vector<Index> expect;
      for (std::size_t k = 0; k < set.size(); ++k) expect.push_back(cand[k].second);
      std::sort(expect.begin(), expect.end());
      CHECK(set == expect);
      for (Index j : set) CHECK(j > i);
    }
  }
}

TEST_CASE("conditioning set bounds") {
  Rng rng(4);
  const SiteSet s = testing::uniform_sites(5, rng);
  const Ordering o = maxmin_order(s);
  CHECK_THROWS_AS(build_conditioning_sets(s, o, 0), ConfigError);
  CHECK_THROWS_AS(build_conditioning_sets(s, o, 5), ConfigError);
  const SiteSet one(Eigen::MatrixXd::Zero(1, 2));
  const ConditioningSets cs = build_conditioning_sets(one, maxmin_order(one), 3);
  REQUIRE(cs.size() == 1);
  CHECK(cs.sets[0].empty());
}

TEST_CASE("joint prediction ordering puts observed sites first") {
  Rng rng(8);
  const SiteSet obs = testing::uniform_sites(30, rng);
  const SiteSet pred = testing::uniform_sites(6, rng);
  const JointOrdering j = joint_prediction_ordering(obs, pred, 5);
  CHECK(j.n_observed == 30);
  CHECK(j.n_prediction == 6);
  CHECK(j.order.is_permutation());
  for (Index k = 0; k < 36; ++k) CHECK((j.order.perm[static_cast<std::size_t>(k)] < 30) == (k < 30));
  CHECK(joint_prediction_ordering(obs, 5).order.perm == maxmin_order(obs).perm);
}

TEST_CASE("coincident prediction sites are rejected") {
  Eigen::MatrixXd a(2, 2), b(1, 2);
  a << 0, 0, 1, 1;
  b << 1, 1;
  CHECK_THROWS_AS(joint_prediction_ordering(SiteSet(a), SiteSet(b), 1), DataError);
}

TEST_CASE("diameter and distances") {
  Eigen::MatrixXd c(3, 2);
  c << 0, 0, 3, 4, 1, 0;
  const SiteSet s(c);
  CHECK(domain_diameter(s) == doctest::Approx(5.0));
  const Eigen::MatrixXd d = pairwise_distances(s);
  CHECK(d(0, 1) == doctest::Approx(5.0));
  CHECK(d(1, 2) == doctest::Approx(std::sqrt(20.0)));
  CHECK(d.diagonal().isZero());
}
