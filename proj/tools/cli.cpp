#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtvgp/chain_io.hpp"
#include "mtvgp/config.hpp"
#include "mtvgp/dataset.hpp"
#include "mtvgp/errors.hpp"
#include "mtvgp/evaluate.hpp"
#include "mtvgp/fileio.hpp"
#include "mtvgp/mcmc.hpp"
#include "mtvgp/predict.hpp"
#include "mtvgp/simulate.hpp"
#include "mtvgp/study.hpp"

namespace mtvgp {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains;
  std::optional<int> threads;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config_path, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "Override the configured seed");
  cmd->add_option("--chains", c.chains, "Number of independent chains");
  cmd->add_option("--threads", c.threads, "Worker threads");
  cmd->add_option("--out", c.out, "Output directory");
}

RunConfig load(const Common& c) {
  RunConfig cfg = c.config_path.empty() ? RunConfig() : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.chains) cfg.chains = *c.chains;
  if (c.threads) cfg.threads = *c.threads;
  if (c.out) cfg.out_dir = *c.out;
  cfg.validate();
  return cfg;
}

std::vector<std::string> provenance_lines(const RunConfig& cfg) {
  return {"config_hash=" + config_hash(cfg) + " seed=" + std::to_string(cfg.seed)};
}

json provenance(const RunConfig& cfg) { return {{"config_hash", config_hash(cfg)}, {"seed", cfg.seed}}; }

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); }

SpatialDataset load_required(const std::string& path, const RunConfig& cfg, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " path configured");
  return load_dataset(path, dataset_schema(cfg));
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& names,
                       const std::vector<std::string>& comments) {
  std::string s;
  for (const auto& c : comments) s += "# " + c + "\n";
  for (std::size_t j = 0; j < names.size(); ++j) s += (j ? "," : "") + names[j];
  s += "\n";
  char buf[32];
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      std::snprintf(buf, sizeof(buf), "%.17g", m(i, j));
      s += (j ? "," : "") + std::string(buf);
    }
    s += "\n";
  }
  return s;
}

int cmd_simulate(const RunConfig& cfg) {
  const SimulationScenario scn = resolve_scenario(cfg);
  const auto comments = provenance_lines(cfg);
  std::vector<std::string> latent_names;
  for (const auto& r : cfg.data.responses) latent_names.push_back("w_" + r.name);
  for (int r = 0; r < scn.replicates; ++r) {
    const SimulatedData sim = simulate_replicate(scn, r);
    const fs::path dir = scn.replicates > 1 ? fs::path(cfg.out_dir) / ("replicate_" + std::to_string(r)) : fs::path(cfg.out_dir);
    atomic_write_file((dir / "train.csv").string(), dataset_to_csv(sim.train, comments));
    atomic_write_file((dir / "train_latent.csv").string(), matrix_csv(sim.w_train, latent_names, comments));
    if (sim.has_holdout) {
      atomic_write_file((dir / "holdout.csv").string(), dataset_to_csv(sim.holdout, comments));
      atomic_write_file((dir / "holdout_latent.csv").string(), matrix_csv(sim.w_holdout, latent_names, comments));
    }
  }
  std::cout << "simulated " << scn.replicates << " data set(s) into " << cfg.out_dir << "\n";
  return 0;
}

int cmd_fit(const RunConfig& cfg) {
  const SpatialDataset data = load_required(cfg.data.path, cfg, "data");
  const PriorSpec prior = resolve_prior(cfg, data);
  const PosteriorChain chain = run_chains(data, prior, resolve_mcmc(cfg), cfg.chains, cfg.threads);
  const ChainProvenance prov{config_hash(cfg), cfg.seed};
  write_chain(out_path(cfg, "chain.bin"), chain, prov);
  atomic_write_file(out_path(cfg, "summary.json"),
                    chain_summary_json(chain, prov, data.covariate_names, data.response_names));
  std::cout << "stored " << chain.size() << " draws; phi acceptance " << chain.stats.phi_acceptance() << "\n";
  return 0;
}

int cmd_predict(const RunConfig& cfg, const std::string& chain_path, std::string holdout_path) {
  const SpatialDataset train = load_required(cfg.data.path, cfg, "data");
  if (holdout_path.empty()) holdout_path = cfg.data.holdout_path;
  const SpatialDataset target = load_required(holdout_path, cfg, "prediction-site");
  const PosteriorChain chain = read_chain(chain_path.empty() ? out_path(cfg, "chain.bin") : chain_path);
  if (chain.n != train.n() || chain.q != train.q() || chain.p != train.p())
    throw DataError("chain dimensions do not match the training data");
  const PriorSpec prior = resolve_prior(cfg, train);
  const Predictor pred(train, target, cfg.mcmc.m, prior.nu, cfg.mcmc.jitter);
  const PredictiveDraws draws = pred.sample(chain, Rng(cfg.seed, 1u << 20), true, cfg.threads);
  atomic_write_file(out_path(cfg, "predictive_draws.csv"), predictive_draws_csv(draws, provenance_lines(cfg)));

  json summary = provenance(cfg);
  summary["level"] = cfg.level;
  const PredictiveSummary ys = predictive_summary(draws.y_star, cfg.level);
  const PredictiveSummary ws = predictive_summary(draws.w_star, cfg.level);
  json sites = json::array();
  for (Index i = 0; i < draws.u; ++i)
    for (Index j = 0; j < draws.q; ++j)
      sites.push_back({{"site_id", i},
                       {"response", target.response_names[static_cast<std::size_t>(j)]},
                       {"y_mean", ys.mean(i, j)},
                       {"y_median", ys.median(i, j)},
                       {"y_lower", ys.lower(i, j)},
                       {"y_upper", ys.upper(i, j)},
                       {"w_mean", ws.mean(i, j)},
                       {"w_lower", ws.lower(i, j)},
                       {"w_upper", ws.upper(i, j)}});
  summary["sites"] = sites;
  atomic_write_file(out_path(cfg, "predictive_summary.json"), summary.dump(2) + "\n");
  std::cout << "wrote " << draws.size() << " predictive draws at " << draws.u << " sites\n";
  return 0;
}

json elpd_json(const MeanWithSe& elpd, const MeanWithSe& cov) {
  return {{"elpd", {{"mean", elpd.mean}, {"se", elpd.se}}}, {"coverage", {{"mean", cov.mean}, {"se", cov.se}}}};
}

int cmd_evaluate(const RunConfig& cfg, const std::string& chain_path, bool compare, int variogram_bins) {
  const SpatialDataset train = load_required(cfg.data.path, cfg, "data");
  std::optional<SpatialDataset> holdout;
  if (!cfg.data.holdout_path.empty()) holdout = load_dataset(cfg.data.holdout_path, dataset_schema(cfg));
  json report = provenance(cfg);
  report["waic_convention"] = "conditional on the latent draws, pointwise over (site, response)";
  report["level"] = cfg.level;

  if (compare) {
    const ModelComparison cmp = compare_models(train, holdout ? &*holdout : nullptr, cfg, cfg.seed);
    json joint = {{"waic", cmp.joint_waic.waic}, {"lppd", cmp.joint_waic.lppd}, {"p_waic", cmp.joint_waic.p_waic}};
    json separate = {{"waic", cmp.separate_waic}};
    if (cmp.has_holdout) {
      joint.update(elpd_json(cmp.joint_predictive.elpd, cmp.joint_predictive.coverage));
      separate.update(elpd_json(cmp.separate_elpd, cmp.separate_coverage));
    }
    json cross = json::array();
    for (const auto& c : cmp.cross)
      cross.push_back({{"i", c.i}, {"j", c.j}, {"mean", c.mean}, {"lower", c.lower}, {"upper", c.upper}});
    report["joint"] = joint;
    report["separate"] = separate;
    report["sigma_cross"] = cross;
    report["preferred_by_waic"] = cmp.joint_waic.waic < cmp.separate_waic ? "joint" : "separate";
  } else {
    const PosteriorChain chain = read_chain(chain_path.empty() ? out_path(cfg, "chain.bin") : chain_path);
    if (chain.n != train.n() || chain.q != train.q()) throw DataError("chain dimensions do not match the data");
    const WaicReport w = waic(chain, train.y, train.model);
    report["waic"] = {{"waic", w.waic}, {"lppd", w.lppd}, {"p_waic", w.p_waic}};
    if (holdout) {
      const PriorSpec prior = resolve_prior(cfg, train);
      const Predictor pred(train, *holdout, cfg.mcmc.m, prior.nu, cfg.mcmc.jitter);
      const PredictiveDraws d = pred.sample(chain, Rng(cfg.seed, 1u << 20), true, cfg.threads);
      const ElpdReport e = elpd_and_coverage(d, holdout->y, holdout->model, cfg.level);
      report.update(elpd_json(e.elpd, e.coverage));
    }
    if (variogram_bins > 0 && chain.size() > 0) {
      Eigen::MatrixXd w_mean = Eigen::MatrixXd::Zero(chain.n, chain.q);
      Eigen::MatrixXd b_mean = Eigen::MatrixXd::Zero(chain.p, chain.q);
      for (std::size_t l = 0; l < chain.size(); ++l) {
        w_mean += chain.w[l];
        b_mean += chain.b[l];
      }
      w_mean /= static_cast<double>(chain.size());
      b_mean /= static_cast<double>(chain.size());
      const Eigen::MatrixXd resid = w_mean - train.x * b_mean;
      const double max_lag = 0.5 * domain_diameter(train.sites);
      for (Index j = 0; j < train.q(); ++j) {
        const auto bins = empirical_semivariogram(resid.col(j), train.sites, variogram_bins, max_lag);
        std::string text;
        for (const auto& line : provenance_lines(cfg)) text += "# " + line + "\n";
        text += semivariogram_csv(bins);
        atomic_write_file(out_path(cfg, "semivariogram_" + train.response_names[static_cast<std::size_t>(j)] + ".csv"), text);
      }
    }
  }
  atomic_write_file(out_path(cfg, "metrics.json"), report.dump(2) + "\n");
  std::cout << report.dump(2) << "\n";
  return 0;
}

int cmd_study(const RunConfig& cfg) {
  const StudyResult res = replicate_study(cfg);
  json j = json::parse(study_json(res));
  j["config_hash"] = config_hash(cfg);
  j["seed"] = cfg.seed;
  atomic_write_file(out_path(cfg, "study.json"), j.dump(2) + "\n");
  std::string csv;
  for (const auto& line : provenance_lines(cfg)) csv += "# " + line + "\n";
  atomic_write_file(out_path(cfg, "study.csv"), csv + study_csv(res));
  std::cout << j.dump(2) << "\n";
  return 0;
}

void print_error(const char* type, const std::string& message) {
  const json j = {{"error", {{"type", type}, {"message", message}}}};
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multivariate spatial GLMM with Vecchia-approximated Matern fields"};
  app.require_subcommand(1);
  Common common;
  std::string chain_path, holdout_path;
  bool compare = false;
  int variogram_bins = 0;

  auto* sim = app.add_subcommand("simulate", "Write synthetic train/hold-out data sets");
  auto* fit = app.add_subcommand("fit", "Run the MCMC sampler and store the chain");
  auto* predict = app.add_subcommand("predict", "Posterior predictive draws at hold-out sites");
  auto* evaluate = app.add_subcommand("evaluate", "WAIC, ELPD and coverage; optionally joint versus separate");
  auto* study = app.add_subcommand("replicate-study", "Replicated joint-versus-separate simulation study");
  for (auto* c : {sim, fit, predict, evaluate, study}) add_common(c, common);
  predict->add_option("--chain", chain_path, "Chain file (default <out>/chain.bin)");
  predict->add_option("--sites", holdout_path, "CSV of prediction sites (default data.holdout_path)");
  evaluate->add_option("--chain", chain_path, "Chain file (default <out>/chain.bin)");
  evaluate->add_flag("--compare", compare, "Fit joint and separate models and compare them");
  evaluate->add_option("--variogram-bins", variogram_bins, "Write residual semivariograms with this many bins");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage_error", e.what());
    return 64;
  }

  try {
    const RunConfig cfg = load(common);
    if (*sim) return cmd_simulate(cfg);
    if (*fit) return cmd_fit(cfg);
    if (*predict) return cmd_predict(cfg, chain_path, holdout_path);
    if (*evaluate) return cmd_evaluate(cfg, chain_path, compare, variogram_bins);
    if (*study) return cmd_study(cfg);
  } catch (const Error& e) {
    print_error(e.kind(), e.what());
    return 2;
  } catch (const std::exception& e) {
    print_error("internal_error", e.what());
    return 3;
  }
  return 1;
}

}  // namespace mtvgp
