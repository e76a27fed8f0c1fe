#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <sstream>

#include <Eigen/LU>
#include <Eigen/Cholesky>

#include "mtvgp/errors.hpp"
#include "mtvgp/matrixvariate.hpp"
#include "mtvgp/vecchia.hpp"
#include "test_support.hpp"

using namespace mtvgp;

namespace {

struct Fixture {
  SiteSet sites;
  Ordering order;
  ConditioningSets sets;
  Eigen::MatrixXd k;  // correlation in factor order
};

Fixture make(Index n, Index m, const MaternParams& p, std::uint64_t seed) {
  Rng rng(seed);
  SiteSet s = testing::uniform_sites(n, rng);
  Ordering o = maxmin_order(s);
  ConditioningSets cs = build_conditioning_sets(s, o, std::max<Index>(1, std::min(m, n - 1)));
  Eigen::MatrixXd k = correlation_submatrix(s, o.perm, o.perm, p);
  return {std::move(s), std::move(o), std::move(cs), std::move(k)};
}

}  // namespace

TEST_CASE("single site factor is the identity scale") {
  const SiteSet s(Eigen::MatrixXd::Zero(1, 2));
  const Ordering o = maxmin_order(s);
  const VecchiaFactor f = build_factor(s, o, build_conditioning_sets(s, o, 1), {0.3, 0.5}, 0.0);
  CHECK(f.size() == 1);
  CHECK(f.diagonal(0) == 1.0);
  CHECK(logdet_precision(f) == 0.0);
}

TEST_CASE("two-site factor matches the analytic conditional") {
  Eigen::MatrixXd c(2, 2);
  c << 0, 0, 0.3, 0.4;
  const SiteSet s(c);
  const Ordering o = maxmin_order(s);
  const MaternParams p{0.5, 0.5};
  const VecchiaFactor f = build_factor(s, o, build_conditioning_sets(s, o, 1), p, 0.0);
  const double r = std::exp(-0.5 / 0.5);
  const double v = 1.0 - r * r;
  CHECK(f.diagonal(0) == doctest::Approx(1.0 / std::sqrt(v)).epsilon(1e-14));
  CHECK(f.row_values(0)[1] == doctest::Approx(-r / std::sqrt(v)).epsilon(1e-14));
  CHECK(f.diagonal(1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("full conditioning reproduces the dense precision") {
  for (double nu : {0.5, 0.3, 1.5}) {
    const MaternParams p{0.15, nu};
    const Fixture fx = make(30, 29, p, 17);
    const VecchiaFactor f = build_factor(fx.sites, fx.order, fx.sets, p, 0.0);
    const Eigen::MatrixXd u = f.to_dense();
    const Eigen::MatrixXd q = u.transpose() * u;
    const Eigen::MatrixXd prod = q * fx.k;
    CHECK((prod - Eigen::MatrixXd::Identity(30, 30)).cwiseAbs().maxCoeff() < 1e-7);
    const Eigen::LLT<Eigen::MatrixXd> llt(fx.k);
    const double logdet_k = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    CHECK(logdet_precision(f) == doctest::Approx(-logdet_k).epsilon(1e-10));
  }
}

TEST_CASE("factor is upper triangular with the conditioning pattern") {
  const MaternParams p{0.2, 0.5};
  const Fixture fx = make(50, 5, p, 3);
  const VecchiaFactor f = build_factor(fx.sites, fx.order, fx.sets, p);
  for (Index i = 0; i < 50; ++i) {
    const auto cols = f.row_columns(i);
    CHECK(cols[0] == i);
    CHECK(f.diagonal(i) > 0.0);
    std::vector<Index> rest(cols.begin() + 1, cols.end());
    CHECK(rest == fx.sets.sets[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXd d = f.to_dense();
  CHECK(d.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero());
  CHECK((Eigen::MatrixXd(f.to_sparse()) - d).isZero());
}

TEST_CASE("apply and solve are inverse operations") {
  const MaternParams p{0.2, 1.0};
  const Fixture fx = make(40, 6, p, 5);
  const VecchiaFactor f = build_factor(fx.sites, fx.order, fx.sets, p);
  Rng rng(1);
  const Eigen::MatrixXd m = standard_normal_matrix(40, 3, rng);
  CHECK((apply_factor(f, m) - f.to_dense() * m).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((apply_factor(f, solve_factor(f, m)) - m).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("latent log density matches the dense matrix normal at full conditioning") {
  const MaternParams p{0.3, 0.5};
  const Fixture fx = make(25, 24, p, 8);
  const VecchiaFactor f = build_factor(fx.sites, fx.order, fx.sets, p, 0.0);
  Rng rng(2);
  Eigen::MatrixXd sigma(2, 2);
  sigma << 2.0, 0.7, 0.7, 1.0;
  const Eigen::MatrixXd mean = standard_normal_matrix(25, 2, rng), w = standard_normal_matrix(25, 2, rng);
  const Eigen::MatrixXd lk = fx.k.llt().matrixL();
  const double expect = matrix_normal_logdensity(w, {mean, lk, RowFactor::kCovarianceLower, sigma});
  const Eigen::MatrixXd ls = sigma.llt().matrixL();
  CHECK(latent_logdensity(f, w, mean, ls) == doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("prior draws have the Vecchia covariance") {
  const MaternParams p{0.3, 0.5};
  const Fixture fx = make(6, 2, p, 12);
  const VecchiaFactor f = build_factor(fx.sites, fx.order, fx.sets, p);
  const Eigen::MatrixXd u = f.to_dense();
  const Eigen::MatrixXd cov = (u.transpose() * u).inverse();
  Rng rng(3);
  const Eigen::MatrixXd l = Eigen::MatrixXd::Identity(1, 1) * std::sqrt(2.0);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(6, 6);
  const int draws = 40000;
  for (int k = 0; k < draws; ++k) {
    const Eigen::MatrixXd w = sample_latent_prior(f, Eigen::MatrixXd::Zero(6, 1), l, rng);
    acc += w * w.transpose();
  }
  CHECK(((acc / draws) - 2.0 * cov).cwiseAbs().maxCoeff() < 0.06);
}

TEST_CASE("KL divergence vanishes at full conditioning and shrinks with m") {
  Rng rng(4);
  const SiteSet s = testing::uniform_sites(80, rng);
  const MaternParams p{0.2, 0.5};
  CHECK(kl_exact_vs_vecchia(s, p, 79, 0.0) < 1e-8);
  const double k2 = kl_exact_vs_vecchia(s, p, 2, 0.0);
  const double k10 = kl_exact_vs_vecchia(s, p, 10, 0.0);
  CHECK(k2 > 0.0);
  CHECK(k10 < k2);
}

TEST_CASE("near-coincident sites stay finite with jitter") {
  Eigen::MatrixXd c(4, 2);
  c << 0, 0, 1e-9, 0, 0.5, 0.5, 1, 1;
  const SiteSet s(c);
  const Ordering o = maxmin_order(s);
  const VecchiaFactor f = build_factor(s, o, build_conditioning_sets(s, o, 3), {0.5, 1.5});
  for (Index i = 0; i < 4; ++i) CHECK(std::isfinite(f.diagonal(i)));
}

TEST_CASE("thread count does not change the factor") {
  const MaternParams p{0.2, 0.3};
  const Fixture fx = make(300, 10, p, 9);
  const VecchiaStructure st(fx.sites, fx.order, fx.sets);
  CHECK(build_factor(st, p, kDefaultJitter, 1) == build_factor(st, p, kDefaultJitter, 4));
}

TEST_CASE("factor serialization round-trips") {
  const MaternParams p{0.2, 0.5};
  const Fixture fx = make(30, 4, p, 10);
  const VecchiaFactor f = build_factor(fx.sites, fx.order, fx.sets, p);
  std::stringstream ss;
  f.save(ss);
  CHECK(VecchiaFactor::load(ss) == f);
  std::stringstream bad("not a factor");
  CHECK_THROWS_AS(VecchiaFactor::load(bad), DataError);
}

TEST_CASE("from_csr validates the layout") {
  Ordering o{{0, 1}};
  CHECK_THROWS_AS(VecchiaFactor::from_csr(1, o, {0, 2, 3}, {0, 1, 1}, {-1.0, 0.2, 1.0}), NumericError);
  CHECK_THROWS_AS(VecchiaFactor::from_csr(1, o, {0, 1, 3}, {0, 0, 1}, {1.0, 0.2, 1.0}), NumericError);
  CHECK_NOTHROW(VecchiaFactor::from_csr(1, o, {0, 2, 3}, {0, 1, 1}, {1.0, 0.2, 1.0}));
}

TEST_CASE("prediction blocks solve and correlate consistently") {
  const MaternParams p{0.3, 0.5};
  const Fixture fx = make(25, 24, p, 14);
  const VecchiaFactor f = build_factor(fx.sites, fx.order, fx.sets, p, 0.0);
  const PredictionBlocks b = prediction_blocks(f, 20, 5);
  const Eigen::MatrixXd q = f.to_dense().transpose() * f.to_dense();
  const Eigen::MatrixXd quu = q.bottomRightCorner(5, 5);
  CHECK((Eigen::MatrixXd(b.quu()) - quu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((b.covariance() - quu.inverse()).cwiseAbs().maxCoeff() < 1e-9);
  Rng rng(1);
  const Eigen::MatrixXd z = standard_normal_matrix(5, 5, rng);
  const Eigen::MatrixXd c = b.correlate(Eigen::MatrixXd::Identity(5, 5));
  CHECK((c * c.transpose() - quu.inverse()).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((quu * b.solve(z) - z).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("factor cache hits, evicts and persists") {
  const MaternParams p{0.2, 0.5};
  const Fixture fx = make(40, 5, p, 15);
  auto st = std::make_shared<const VecchiaStructure>(fx.sites, fx.order, fx.sets);
  FactorCache cache(st, 0.5, kDefaultJitter, 2);
  const auto a = cache.get(0.2);
  CHECK(cache.get(0.2) == a);
  CHECK(cache.hits() == 1);
  cache.get(0.3);
  cache.get(0.4);  // evicts 0.2
  cache.get(0.2);
  CHECK(cache.misses() == 4);
  CHECK(*cache.get(0.2) == build_factor(*st, p));

  const auto dir = std::filesystem::temp_directory_path() / "mtvgp_cache_test";
  std::filesystem::remove_all(dir);
  FactorCache disk(st, 0.5, kDefaultJitter, 1);
  disk.set_directory(dir.string());
  const auto first = disk.get(0.25);
  CHECK(std::filesystem::exists(dir / (disk.key_string(0.25) + ".vfac")));
  FactorCache reread(st, 0.5, kDefaultJitter, 1);
  reread.set_directory(dir.string());
  CHECK(*reread.get(0.25) == *first);
  CHECK(disk.key_string(0.25) != disk.key_string(0.26));
  std::filesystem::remove_all(dir);
}
