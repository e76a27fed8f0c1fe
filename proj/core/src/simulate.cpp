#include "mtvgp/simulate.hpp"

#include "mtvgp/errors.hpp"
#include "mtvgp/kernels.hpp"
#include "mtvgp/matrixvariate.hpp"
#include "mtvgp/vecchia.hpp"

namespace mtvgp {

namespace {

Eigen::MatrixXd default_b0() {
  Eigen::MatrixXd b(3, 2);
  b << 1.0, -0.5, 3.0, 1.5, -1.2, 0.0;
  return b;
}

SimulationScenario two_response(Index n, double phi0, double sigma12, std::uint64_t seed, FamilyKind second) {
  SimulationScenario s;
  s.n = n;
  s.phi0 = phi0;
  s.seed = seed;
  s.families = {FamilySpec{FamilyKind::kGaussian, 1.0, 1}, FamilySpec{second, 1.0, 1}};
  s.b0 = default_b0();
  s.sigma0.resize(2, 2);
  s.sigma0 << 2.0, sigma12, sigma12, 1.0;
  return s;
}

}  // namespace

SimulationScenario SimulationScenario::gaussian_poisson(Index n, double phi0, double sigma12, std::uint64_t seed) {
  return two_response(n, phi0, sigma12, seed, FamilyKind::kPoisson);
}

SimulationScenario SimulationScenario::gaussian_bernoulli(Index n, double phi0, double sigma12, std::uint64_t seed) {
  return two_response(n, phi0, sigma12, seed, FamilyKind::kBernoulli);
}

void SimulationScenario::validate() const {
  const auto q = static_cast<Index>(families.size());
  if (n < 2) throw ConfigError("simulation needs at least two sites");
  if (q < 1) throw ConfigError("simulation needs at least one response family");
  for (const auto& f : families) f.validate();
  if (!response_names.empty() && static_cast<Index>(response_names.size()) != q)
    throw ConfigError("response_names must match the families");
  if (b0.rows() != 3 || b0.cols() != q) throw ConfigError("b0 must be 3 x q for covariates [1, lon, lat]");
  if (sigma0.rows() != q || sigma0.cols() != q) throw ConfigError("sigma0 must be q x q");
  try {
    spd_cholesky(sigma0, "sigma0");
  } catch (const NumericError&) {
    throw ConfigError("sigma0 must be positive definite");
  }
  if (!(phi0 > 0.0) || !(nu > 0.0)) throw ConfigError("phi0 and nu must be positive");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) throw ConfigError("holdout fraction must lie in [0, 1)");
  if (replicates < 1) throw ConfigError("replicates must be at least 1");
  if (vecchia_m < 1) throw ConfigError("vecchia_m must be at least 1");
}

Eigen::MatrixXd simulate_latent(const SiteSet& sites, const Eigen::MatrixXd& mean, const Eigen::MatrixXd& sigma,
                                const MaternParams& params, Index dense_limit, Index vecchia_m, Rng& rng) {
  const Index n = sites.size();
  const Eigen::MatrixXd col = spd_cholesky(sigma, "Sigma");
  if (n <= dense_limit) {
    const Eigen::MatrixXd row = psd_factor(correlation_matrix(sites, params));
    return mean + row * standard_normal_matrix(n, sigma.rows(), rng) * col.transpose();
  }
  const Ordering order = maxmin_order(sites);
  const ConditioningSets sets = build_conditioning_sets(sites, order, std::min<Index>(vecchia_m, n - 1));
  const VecchiaFactor f = build_factor(sites, order, sets, params);
  const Eigen::MatrixXd ordered =
      sample_latent_prior(f, Eigen::MatrixXd::Zero(n, sigma.rows()), col, rng);
  Eigen::MatrixXd out = mean;
  for (Index k = 0; k < n; ++k) out.row(order.perm[static_cast<std::size_t>(k)]) += ordered.row(k);
  return out;
}

SimulatedData simulate_dataset(const SimulationScenario& scn, Rng& rng) {
  scn.validate();
  const Index n = scn.n;
  const auto q = static_cast<Index>(scn.families.size());
  Eigen::MatrixXd coords(n, 2);
  for (Index i = 0; i < n; ++i) {
    coords(i, 0) = rng.uniform();
    coords(i, 1) = rng.uniform();
  }
  SiteSet sites(coords);
  Eigen::MatrixXd x(n, 3);
  x.col(0).setOnes();
  x.col(1) = coords.col(0);
  x.col(2) = coords.col(1);

  const Eigen::MatrixXd w =
      simulate_latent(sites, x * scn.b0, scn.sigma0, MaternParams{scn.phi0, scn.nu}, scn.dense_limit, scn.vecchia_m, rng);
  ResponseModel model{scn.families, {}};
  const Eigen::MatrixXd y = model.sample(w, rng);

  std::vector<std::string> names = scn.response_names;
  if (names.empty())
    for (Index j = 0; j < q; ++j) names.push_back("y" + std::to_string(j + 1));
  SpatialDataset full{sites, x, y, model, {"intercept", "x_lon", "x_lat"}, names};

  SimulatedData out{full, full, false, w, Eigen::MatrixXd(0, q), holdout_split(n, scn.holdout_fraction, rng)};
  if (!out.split.test.empty()) {
    out.train = full.rows(out.split.train);
    out.holdout = full.rows(out.split.test);
    out.has_holdout = true;
    out.w_train.resize(static_cast<Index>(out.split.train.size()), q);
    out.w_holdout.resize(static_cast<Index>(out.split.test.size()), q);
    for (std::size_t k = 0; k < out.split.train.size(); ++k) out.w_train.row(static_cast<Index>(k)) = w.row(out.split.train[k]);
    for (std::size_t k = 0; k < out.split.test.size(); ++k) out.w_holdout.row(static_cast<Index>(k)) = w.row(out.split.test[k]);
  }
  return out;
}

SimulatedData simulate_replicate(const SimulationScenario& scn, int replicate) {
  Rng rng(scn.seed, static_cast<std::uint64_t>(replicate));
  return simulate_dataset(scn, rng);
}

}  // namespace mtvgp
