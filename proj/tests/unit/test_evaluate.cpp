#include <doctest.h>

#include <cmath>
#include <vector>

#include "mtvgp/errors.hpp"
#include "mtvgp/evaluate.hpp"
#include "mtvgp/kernels.hpp"
#include "mtvgp/matrixvariate.hpp"
#include "test_support.hpp"

using namespace mtvgp;

namespace {

PosteriorChain chain_of(const std::vector<Eigen::MatrixXd>& ws) {
  PosteriorChain c;
  c.n = ws.front().rows();
  c.q = ws.front().cols();
  c.w = ws;
  for (std::size_t k = 0; k < ws.size(); ++k) {
    c.phi.push_back(0.1);
    c.b.push_back(Eigen::MatrixXd::Zero(1, c.q));
    c.sigma.push_back(Eigen::MatrixXd::Identity(c.q, c.q));
    c.chain_id.push_back(0);
  }
  return c;
}

}  // namespace

TEST_CASE("WAIC of a degenerate chain is minus twice the log-likelihood") {
  const ResponseModel m{{{FamilyKind::kPoisson}}, {}};
  const Eigen::MatrixXd y = Eigen::MatrixXd::Constant(1, 1, 2.0), w = Eigen::MatrixXd::Constant(1, 1, 0.4);
  const WaicReport r = waic(chain_of({w, w, w}), y, m);
  CHECK(std::abs(r.p_waic) < 1e-20);
  CHECK(r.waic == doctest::Approx(-2.0 * log_likelihood({FamilyKind::kPoisson}, 2.0, 0.4)).epsilon(1e-14));
  CHECK_THROWS_AS(waic(chain_of({w}), y, m), ConfigError);
}

TEST_CASE("added latent noise raises WAIC") {
  Rng rng(1);
  const ResponseModel m{{{FamilyKind::kGaussian}, {FamilyKind::kPoisson}}, {}};
  const Eigen::MatrixXd truth = standard_normal_matrix(40, 2, rng) * 0.5;
  const Eigen::MatrixXd y = m.sample(truth, rng);
  std::vector<Eigen::MatrixXd> tight, noisy;
  for (int l = 0; l < 200; ++l) {
    const Eigen::MatrixXd e = standard_normal_matrix(40, 2, rng);
    tight.push_back(truth + 0.05 * e);
    noisy.push_back(truth + 0.05 * e + 0.8 * standard_normal_matrix(40, 2, rng));
  }
  const WaicReport a = waic(chain_of(tight), y, m), b = waic(chain_of(noisy), y, m);
  CHECK(b.waic > a.waic);
  CHECK(a.waic == doctest::Approx(-2.0 * (a.pointwise_lppd.sum() - a.pointwise_p_waic.sum())));
  CHECK(a.pointwise_lppd.rows() == 40);
}

TEST_CASE("point-mass prediction at the truth") {
  const ResponseModel m{{{FamilyKind::kGaussian, 1e-6}}, {}};
  PredictiveDraws d;
  d.u = 3;
  d.q = 1;
  const Eigen::MatrixXd truth = (Eigen::MatrixXd(3, 1) << 0.1, -0.4, 2.0).finished();
  for (int l = 0; l < 10; ++l) {
    d.w_star.push_back(truth);
    d.y_star.push_back(truth);
  }
  const ElpdReport r = elpd_and_coverage(d, truth, m, 0.95);
  CHECK(r.elpd.mean > 5.0);
  CHECK(r.coverage.mean == 1.0);
  CHECK(r.coverage.se == 0.0);
  CHECK_THROWS_AS(elpd_and_coverage(d, Eigen::MatrixXd::Zero(2, 1), m, 0.95), DataError);
}

TEST_CASE("prior predictive coverage is close to nominal") {
  Rng rng(2);
  const ResponseModel m{{{FamilyKind::kGaussian}}, {}};
  PredictiveDraws d;
  d.u = 400;
  d.q = 1;
  for (int l = 0; l < 400; ++l) {
    d.w_star.push_back(Eigen::MatrixXd::Zero(400, 1));
    d.y_star.push_back(standard_normal_matrix(400, 1, rng));
  }
  const Eigen::MatrixXd y = standard_normal_matrix(400, 1, rng);
  const MeanWithSe c = proportion_with_se(coverage_indicators(d, y, 0.9));
  CHECK(std::abs(c.mean - 0.9) < 4.0 * c.se + 0.01);
}

TEST_CASE("site log predictive density sums the responses jointly") {
  const ResponseModel m{{{FamilyKind::kGaussian}, {FamilyKind::kPoisson}}, {}};
  PredictiveDraws d;
  d.u = 1;
  d.q = 2;
  d.w_star = {(Eigen::MatrixXd(1, 2) << 0.0, 0.0).finished(), (Eigen::MatrixXd(1, 2) << 1.0, 1.0).finished()};
  d.y_star = d.w_star;
  const Eigen::MatrixXd y = (Eigen::MatrixXd(1, 2) << 0.5, 1.0).finished();
  const double l0 = log_likelihood(m.families[0], 0.5, 0.0) + log_likelihood(m.families[1], 1.0, 0.0);
  const double l1 = log_likelihood(m.families[0], 0.5, 1.0) + log_likelihood(m.families[1], 1.0, 1.0);
  CHECK(site_log_predictive_density(d, y, m)(0) == doctest::Approx(std::log(0.5 * (std::exp(l0) + std::exp(l1)))));
}

TEST_CASE("mean with standard error") {
  const MeanWithSe r = mean_with_se((Eigen::VectorXd(4) << 1, 2, 3, 4).finished());
  CHECK(r.mean == 2.5);
  CHECK(r.se == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  const MeanWithSe p = proportion_with_se({true, false, true, true});
  CHECK(p.mean == 0.75);
  CHECK(p.se == doctest::Approx(std::sqrt(0.75 * 0.25 / 4.0)));
}

TEST_CASE("semivariogram of a constant is zero and shift invariant") {
  Rng rng(3);
  const SiteSet s = testing::uniform_sites(60, rng);
  const auto flat = empirical_semivariogram(Eigen::VectorXd::Constant(60, 4.0), s, 5, 1.0);
  for (const auto& b : flat)
    if (b.count > 0) CHECK(b.semivariance == 0.0);
  const Eigen::VectorXd r = standard_normal_matrix(60, 1, rng);
  const auto a = empirical_semivariogram(r, s, 6, 0.8);
  const auto c = empirical_semivariogram((r.array() + 17.0).matrix(), s, 6, 0.8);
  long pairs = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    CHECK(a[k].count == c[k].count);
    if (a[k].count > 0) CHECK(a[k].semivariance == doctest::Approx(c[k].semivariance).epsilon(1e-10));
    pairs += a[k].count;
  }
  CHECK(pairs <= 60 * 59 / 2);
}

TEST_CASE("semivariogram of white noise is flat at the variance") {
  Rng rng(4);
  const SiteSet s = testing::uniform_sites(400, rng);
  const Eigen::VectorXd r = standard_normal_matrix(400, 1, rng) * std::sqrt(2.0);
  for (const auto& b : empirical_semivariogram(r, s, 4, 0.6)) CHECK(b.semivariance == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("semivariogram of a spatial field rises with lag") {
  Rng rng(5);
  const SiteSet s = testing::uniform_sites(300, rng);
  const Eigen::MatrixXd k = correlation_matrix(s, {0.2, 0.5});
  const Eigen::VectorXd r = psd_factor(k) * standard_normal_matrix(300, 1, rng);
  const auto bins = empirical_semivariogram(r, s, 5, 0.5);
  CHECK(bins.front().semivariance < bins.back().semivariance);
}

TEST_CASE("empty bins and argument errors") {
  Eigen::MatrixXd c(2, 2);
  c << 0, 0, 0.9, 0;
  const auto bins = empirical_semivariogram(Eigen::Vector2d(0.0, 1.0), SiteSet(c), 3, 1.0);
  CHECK(bins[0].count == 0);
  CHECK(std::isnan(bins[0].semivariance));
  CHECK(bins[2].count == 1);
  CHECK(bins[2].semivariance == 0.5);
  CHECK(semivariogram_csv(bins).find("NA") != std::string::npos);
  CHECK_THROWS_AS(empirical_semivariogram(Eigen::Vector2d(0.0, 1.0), SiteSet(c), 0, 1.0), ConfigError);
}

TEST_CASE("k-fold and hold-out splits partition the indices") {
  Rng rng(6);
  const auto folds = kfold_split(23, 5, rng);
  std::vector<int> seen(23, 0);
  for (const auto& f : folds) {
    CHECK((f.size() == 4 || f.size() == 5));
    for (Index i : f) ++seen[static_cast<std::size_t>(i)];
  }
  for (int v : seen) CHECK(v == 1);
  const Split s = holdout_split(100, 0.2, rng);
  CHECK(s.test.size() == 20);
  CHECK(s.train.size() == 80);
  CHECK_THROWS_AS(holdout_split(10, 1.0, rng), ConfigError);
  CHECK_THROWS_AS(kfold_split(3, 5, rng), ConfigError);
}

TEST_CASE("metric report JSON") {
  WaicReport w;
  w.waic = 10.0;
  const std::string j = metric_report_json(&w, nullptr);
  CHECK(j.find("\"waic\"") != std::string::npos);
  CHECK(j.find("elpd") == std::string::npos);
}
