#include "mtvgp/study.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "mtvgp/errors.hpp"
#include "mtvgp/predict.hpp"
#include "mtvgp/simulate.hpp"

namespace mtvgp {

PriorSpec marginal_prior(const PriorSpec& joint, Index j) {
  PriorSpec p = joint;
  const Index q = joint.s.rows();
  p.m = joint.m.col(j);
  p.s = joint.s.block(j, j, 1, 1);
  p.dof = joint.dof - static_cast<double>(q - 1);
  return p;
}

ModelComparison compare_models(const SpatialDataset& train, const SpatialDataset* holdout, const RunConfig& cfg,
                               std::uint64_t seed) {
  ModelComparison out;
  McmcConfig mcmc = resolve_mcmc(cfg);
  mcmc.seed = seed;
  mcmc.store_w = true;
  const PriorSpec prior = resolve_prior(cfg, train);
  out.joint_chain = run_chains(train, prior, mcmc, cfg.chains, cfg.threads);
  out.joint_waic = waic(out.joint_chain, train.y, train.model);

  const Index q = train.q();
  for (Index i = 0; i < q; ++i)
    for (Index j = i + 1; j < q; ++j) {
      std::vector<double> v;
      v.reserve(out.joint_chain.size());
      for (const auto& s : out.joint_chain.sigma) v.push_back(s(i, j));
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      out.cross.push_back({i, j, mean, quantile(v, 0.025), quantile(v, 0.975)});
    }

  std::vector<SpatialDataset> separate_train;
  for (Index j = 0; j < q; ++j) {
    separate_train.push_back(train.response(j));
    McmcConfig mj = mcmc;
    mj.seed = splitmix64(seed + static_cast<std::uint64_t>(j) + 1);
    out.separate_chains.push_back(run_chains(separate_train.back(), marginal_prior(prior, j), mj, cfg.chains, cfg.threads));
    out.separate_waic += waic(out.separate_chains.back(), separate_train.back().y, separate_train.back().model).waic;
  }

  if (holdout) {
    out.has_holdout = true;
    const Rng pred_rng(seed, 1u << 20);
    const Predictor joint_pred(train, *holdout, mcmc.m, prior.nu, mcmc.jitter);
    const PredictiveDraws jd = joint_pred.sample(out.joint_chain, pred_rng, true, cfg.threads);
    out.joint_predictive = elpd_and_coverage(jd, holdout->y, holdout->model, cfg.level);

    Eigen::VectorXd site_lpd = Eigen::VectorXd::Zero(holdout->n());
    std::vector<bool> hits;
    for (Index j = 0; j < q; ++j) {
      const SpatialDataset hj = holdout->response(j);
      const Predictor pj(separate_train[static_cast<std::size_t>(j)], hj, mcmc.m, prior.nu, mcmc.jitter);
      const PredictiveDraws dj =
          pj.sample(out.separate_chains[static_cast<std::size_t>(j)], pred_rng.split(static_cast<std::uint64_t>(j) + 1),
                    true, cfg.threads);
      site_lpd += site_log_predictive_density(dj, hj.y, hj.model);
      const auto h = coverage_indicators(dj, hj.y, cfg.level);
      hits.insert(hits.end(), h.begin(), h.end());
    }
    out.separate_elpd = mean_with_se(site_lpd);
    out.separate_coverage = proportion_with_se(hits);
  }
  return out;
}

StudyResult replicate_study(const RunConfig& cfg) {
  const SimulationScenario scn = resolve_scenario(cfg);
  StudyResult result;
  if (scn.sigma0.rows() >= 2) result.sigma12_true = scn.sigma0(0, 1);
  for (int r = 0; r < scn.replicates; ++r) {
    const SimulatedData sim = simulate_replicate(scn, r);
    const ModelComparison cmp = compare_models(sim.train, sim.has_holdout ? &sim.holdout : nullptr, cfg,
                                               splitmix64(cfg.seed ^ (0x5851f42d4c957f2dULL * static_cast<std::uint64_t>(r + 1))));
    StudyRow row;
    row.replicate = r;
    row.joint_waic = cmp.joint_waic.waic;
    row.separate_waic = cmp.separate_waic;
    if (cmp.has_holdout) {
      row.joint_elpd = cmp.joint_predictive.elpd.mean;
      row.separate_elpd = cmp.separate_elpd.mean;
      row.joint_coverage = cmp.joint_predictive.coverage.mean;
      row.separate_coverage = cmp.separate_coverage.mean;
      row.coverage_entries = static_cast<long>(sim.holdout.n() * sim.holdout.q());
      row.joint_coverage_hits = std::lround(row.joint_coverage * static_cast<double>(row.coverage_entries));
      row.separate_coverage_hits = std::lround(row.separate_coverage * static_cast<double>(row.coverage_entries));
    }
    if (!cmp.cross.empty()) {
      row.sigma12_mean = cmp.cross.front().mean;
      row.sigma12_lower = cmp.cross.front().lower;
      row.sigma12_upper = cmp.cross.front().upper;
      row.sigma12_covered = row.sigma12_lower <= result.sigma12_true && result.sigma12_true <= row.sigma12_upper;
    }
    result.rows.push_back(row);
  }
  return result;
}

namespace {

nlohmann::ordered_json mean_se(const std::vector<double>& v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double se = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1) / static_cast<double>(v.size())) : 0.0;
  return {{"mean", mean}, {"se", se}};
}

}  // namespace

std::string study_json(const StudyResult& res) {
  if (res.rows.empty()) throw ConfigError("study has no replicates");
  const auto col = [&](auto f) {
    std::vector<double> v;
    for (const auto& r : res.rows) v.push_back(f(r));
    return mean_se(v);
  };
  nlohmann::ordered_json j;
  j["replicates"] = res.rows.size();
  j["sigma12_true"] = res.sigma12_true;
  j["joint"] = {{"waic", col([](const StudyRow& r) { return r.joint_waic; })},
                {"elpd", col([](const StudyRow& r) { return r.joint_elpd; })},
                {"coverage", col([](const StudyRow& r) { return r.joint_coverage; })}};
  j["separate"] = {{"waic", col([](const StudyRow& r) { return r.separate_waic; })},
                   {"elpd", col([](const StudyRow& r) { return r.separate_elpd; })},
                   {"coverage", col([](const StudyRow& r) { return r.separate_coverage; })}};
  j["sigma12"] = {{"posterior_mean", col([](const StudyRow& r) { return r.sigma12_mean; })},
                  {"lower", col([](const StudyRow& r) { return r.sigma12_lower; })},
                  {"upper", col([](const StudyRow& r) { return r.sigma12_upper; })},
                  {"coverage", col([](const StudyRow& r) { return r.sigma12_covered ? 1.0 : 0.0; })}};
  long joint_wins = 0;
  for (const auto& r : res.rows) joint_wins += r.joint_waic < r.separate_waic ? 1 : 0;
  j["joint_waic_wins"] = joint_wins;
  return j.dump(2) + "\n";
}

std::string study_csv(const StudyResult& res) {
  std::ostringstream out;
  out << "replicate,joint_waic,separate_waic,joint_elpd,separate_elpd,joint_coverage,separate_coverage,"
         "sigma12_mean,sigma12_lower,sigma12_upper,sigma12_covered\n";
  char buf[512];
  for (const auto& r : res.rows) {
    std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g,%d\n", r.replicate,
                  r.joint_waic, r.separate_waic, r.joint_elpd, r.separate_elpd, r.joint_coverage, r.separate_coverage,
                  r.sigma12_mean, r.sigma12_lower, r.sigma12_upper, r.sigma12_covered ? 1 : 0);
    out << buf;
  }
  return out.str();
}

}  // namespace mtvgp
