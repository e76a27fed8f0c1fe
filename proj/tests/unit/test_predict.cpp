#include <doctest.h>

#include <cmath>
#include <vector>

#include "mtvgp/errors.hpp"
#include "mtvgp/families.hpp"
#include "mtvgp/kernels.hpp"
#include "mtvgp/predict.hpp"
#include "test_support.hpp"

using namespace mtvgp;

namespace {

SpatialDataset at(const Eigen::MatrixXd& coords, Index q, FamilyKind kind = FamilyKind::kGaussian) {
  const Index n = coords.rows();
  std::vector<FamilySpec> fams(static_cast<std::size_t>(q), FamilySpec{kind});
  return testing::make_dataset(SiteSet(coords), Eigen::MatrixXd::Ones(n, 1), Eigen::MatrixXd::Zero(n, q), fams);
}

}  // namespace

TEST_CASE("one observed and one prediction site reproduce scalar kriging") {
  Eigen::MatrixXd a(1, 2), b(1, 2);
  a << 0.0, 0.0;
  b << 0.3, 0.0;
  const SpatialDataset train = at(a, 1), target = at(b, 1);
  const double phi = 0.5, sigma = 2.0, beta = 0.7, w = 1.9;
  const Predictor pred(train, target, 5, 0.5, 0.0);
  const double r = std::exp(-0.3 / phi);
  const Eigen::MatrixXd bm = Eigen::MatrixXd::Constant(1, 1, beta), sm = Eigen::MatrixXd::Constant(1, 1, sigma);
  Rng rng(1);
  const Eigen::MatrixXd mean = pred.sample_latent(Eigen::MatrixXd::Constant(1, 1, w), bm, sm, phi, rng, false);
  CHECK(mean(0, 0) == doctest::Approx(beta + r * (w - beta)).epsilon(1e-12));
  std::vector<double> draws;
  for (int k = 0; k < 40000; ++k)
    draws.push_back(pred.sample_latent(Eigen::MatrixXd::Constant(1, 1, w), bm, sm, phi, rng)(0, 0));
  CHECK(testing::mean(draws) == doctest::Approx(mean(0, 0)).epsilon(0.02));
  CHECK(testing::variance(draws) == doctest::Approx(sigma * (1.0 - r * r)).epsilon(0.03));
}

TEST_CASE("zero noise gives the kriging mean and matches dense conditioning") {
  Rng rng(2);
  const SiteSet obs = testing::uniform_sites(20, rng), tgt = testing::uniform_sites(4, rng);
  const SpatialDataset train = at(obs.coords(), 2), target = at(tgt.coords(), 2);
  const MaternParams p{0.25, 1.5};
  const Predictor pred(train, target, 23, p.nu, 0.0);
  Eigen::MatrixXd all(24, 2);
  all << obs.coords(), tgt.coords();
  const auto kr = testing::dense_kriging(correlation_matrix(SiteSet(all), p), 20);
  const Eigen::MatrixXd w = standard_normal_matrix(20, 2, rng), b = standard_normal_matrix(1, 2, rng);
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.0, 0.3, 0.3, 2.0;
  const Eigen::MatrixXd got = pred.sample_latent(w, b, sigma, p.phi, rng, false);
  const Eigen::MatrixXd expect = Eigen::MatrixXd::Ones(4, 1) * b + kr.weights * (w - Eigen::MatrixXd::Ones(20, 1) * b);
  CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((pred.conditional_covariance(p.phi) - kr.covariance).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("far prediction sites revert to the marginal law") {
  Rng rng(3);
  const SiteSet obs = testing::uniform_sites(15, rng);
  Eigen::MatrixXd far(2, 2);
  far << 50.0, 50.0, -40.0, 60.0;
  const SpatialDataset train = at(obs.coords(), 2), target = at(far, 2);
  const Predictor pred(train, target, 10, 0.5);
  Eigen::MatrixXd sigma(2, 2);
  sigma << 1.5, 0.6, 0.6, 1.0;
  const Eigen::MatrixXd b = (Eigen::MatrixXd(1, 2) << 2.0, -1.0).finished();
  const Eigen::MatrixXd w = standard_normal_matrix(15, 2, rng) * 3.0;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(1, 2), c = Eigen::MatrixXd::Zero(2, 2);
  const int draws = 40000;
  for (int k = 0; k < draws; ++k) {
    const Eigen::MatrixXd d = pred.sample_latent(w, b, sigma, 0.1, rng);
    m += d.row(0);
    c += (d.row(0) - b).transpose() * (d.row(0) - b);
  }
  CHECK(((m / draws) - b).cwiseAbs().maxCoeff() < 0.03);
  CHECK(((c / draws) - sigma).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("diagonal Sigma gives uncorrelated predictive columns") {
  Rng rng(4);
  const SiteSet obs = testing::uniform_sites(10, rng), tgt = testing::uniform_sites(1, rng);
  const SpatialDataset train = at(obs.coords(), 2), target = at(tgt.coords(), 2);
  const Predictor pred(train, target, 10, 0.5);
  const Eigen::MatrixXd sigma = Eigen::Vector2d(1.0, 3.0).asDiagonal();
  const Eigen::MatrixXd w = Eigen::MatrixXd::Zero(10, 2), b = Eigen::MatrixXd::Zero(1, 2);
  double s01 = 0.0, s00 = 0.0, s11 = 0.0;
  for (int k = 0; k < 30000; ++k) {
    const Eigen::MatrixXd d = pred.sample_latent(w, b, sigma, 0.2, rng);
    s01 += d(0, 0) * d(0, 1);
    s00 += d(0, 0) * d(0, 0);
    s11 += d(0, 1) * d(0, 1);
  }
  CHECK(std::abs(s01 / std::sqrt(s00 * s11)) < 0.03);
}

TEST_CASE("chain sampling is ordered, deterministic and respects supports") {
  Rng rng(5);
  const SiteSet obs = testing::uniform_sites(12, rng), tgt = testing::uniform_sites(3, rng);
  const SpatialDataset train = at(obs.coords(), 1, FamilyKind::kPoisson);
  const SpatialDataset target = at(tgt.coords(), 1, FamilyKind::kPoisson);
  PosteriorChain chain;
  chain.n = 12;
  chain.p = 1;
  chain.q = 1;
  for (int l = 0; l < 20; ++l) {
    chain.phi.push_back(l % 2 ? 0.1 : 0.3);
    chain.b.push_back(Eigen::MatrixXd::Constant(1, 1, 0.5));
    chain.sigma.push_back(Eigen::MatrixXd::Constant(1, 1, 0.4));
    chain.w.push_back(standard_normal_matrix(12, 1, rng));
    chain.chain_id.push_back(0);
  }
  const Predictor pred(train, target, 6, 0.5);
  const PredictiveDraws a = pred.sample(chain, Rng(9), true, 1), b = pred.sample(chain, Rng(9), true, 3);
  REQUIRE(a.size() == 20);
  for (std::size_t l = 0; l < a.size(); ++l) {
    CHECK(a.w_star[l] == b.w_star[l]);
    CHECK(a.y_star[l] == b.y_star[l]);
    for (Index i = 0; i < 3; ++i) CHECK_NOTHROW(validate_response({FamilyKind::kPoisson}, a.y_star[l](i, 0)));
  }
  chain.w.clear();
  CHECK_THROWS_AS(pred.sample(chain, Rng(9)), ConfigError);
  CHECK(predictive_draws_csv(a).rfind("site_id,response_id,draw_id,w_star,y_star\n", 0) == 0);
}

TEST_CASE("predictive summary intervals") {
  std::vector<Eigen::MatrixXd> constant(5, Eigen::MatrixXd::Constant(1, 1, 3.0));
  const PredictiveSummary c = predictive_summary(constant, 0.9);
  CHECK(c.lower(0, 0) == 3.0);
  CHECK(c.upper(0, 0) == 3.0);
  Rng rng(6);
  std::vector<Eigen::MatrixXd> normal;
  for (int k = 0; k < 10000; ++k) normal.push_back(Eigen::MatrixXd::Constant(1, 1, rng.normal()));
  const PredictiveSummary s = predictive_summary(normal, 0.95);
  CHECK(std::abs(s.lower(0, 0) + 1.96) < 0.05);
  CHECK(std::abs(s.upper(0, 0) - 1.96) < 0.05);
  CHECK_THROWS_AS(predictive_summary(normal, 1.0), ConfigError);
  CHECK_THROWS_AS(predictive_summary({normal[0]}, 0.5), ConfigError);
}

TEST_CASE("coincident prediction sites are rejected") {
  Eigen::MatrixXd a(2, 2);
  a << 0, 0, 1, 1;
  CHECK_THROWS_AS(Predictor(at(a, 1), at(a.topRows(1), 1), 3, 0.5), DataError);
}
