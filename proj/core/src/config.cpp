#include "mtvgp/config.hpp"

#include <cstdio>
#include <set>

#include <json.hpp>

#include "mtvgp/errors.hpp"
#include "mtvgp/fileio.hpp"

namespace mtvgp {

using json = nlohmann::ordered_json;

namespace {

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("'" + where + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError("unknown key '" + key + "' in '" + where + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("'" + where + "." + key + "' has the wrong type");
  }
}

json matrix_to_json(const MatrixSpec& m) {
  if (!m.is_full()) return m.scalar;
  json rows = json::array();
  for (Index i = 0; i < m.full.rows(); ++i) {
    json row = json::array();
    for (Index k = 0; k < m.full.cols(); ++k) row.push_back(m.full(i, k));
    rows.push_back(row);
  }
  return rows;
}

MatrixSpec matrix_from_json(const json& j, const std::string& where) {
  MatrixSpec m;
  if (j.is_number()) {
    m.scalar = j.get<double>();
    return m;
  }
  if (!j.is_array() || j.empty()) throw ConfigError("'" + where + "' must be a number or a non-empty array of rows");
  const auto rows = static_cast<Index>(j.size());
  if (!j[0].is_array() || j[0].empty()) throw ConfigError("'" + where + "' rows must be non-empty arrays");
  const auto cols = static_cast<Index>(j[0].size());
  m.full.resize(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols) throw ConfigError("'" + where + "' is ragged");
    for (Index k = 0; k < cols; ++k) {
      if (!row[static_cast<std::size_t>(k)].is_number()) throw ConfigError("'" + where + "' entries must be numbers");
      m.full(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

}  // namespace

Eigen::MatrixXd MatrixSpec::resolve(Index rows, Index cols, bool identity, const char* what) const {
  if (is_full()) {
    if (full.rows() != rows || full.cols() != cols)
      throw ConfigError(std::string(what) + " must be " + std::to_string(rows) + " x " + std::to_string(cols));
    return full;
  }
  if (identity) {
    if (rows != cols) throw ConfigError(std::string(what) + " must be square");
    return scalar * Eigen::MatrixXd::Identity(rows, cols);
  }
  return Eigen::MatrixXd::Constant(rows, cols, scalar);
}

RunConfig::RunConfig() {
  data.responses = {{"y1", FamilySpec{FamilyKind::kGaussian, 1.0, 1}, ""},
                    {"y2", FamilySpec{FamilyKind::kPoisson, 1.0, 1}, ""}};
  simulation.b0.full.resize(3, 2);
  simulation.b0.full << 1.0, -0.5, 3.0, 1.5, -1.2, 0.0;
  simulation.sigma0.full.resize(2, 2);
  simulation.sigma0.full << 2.0, 1.0, 1.0, 1.0;
}

void RunConfig::validate() const {
  if (data.responses.empty()) throw ConfigError("at least one response is required");
  std::set<std::string> names;
  for (const auto& r : data.responses) {
    if (r.name.empty()) throw ConfigError("response names must be non-empty");
    if (!names.insert(r.name).second) throw ConfigError("duplicate response name '" + r.name + "'");
    r.family.validate();
  }
  if (!(nu > 0.0)) throw ConfigError("nu must be positive");
  mcmc.validate();
  if (chains < 1) throw ConfigError("chains must be at least 1");
  if (threads < 1) throw ConfigError("threads must be at least 1");
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("level must lie in (0, 1)");
  if (!(prior.correlation_threshold > 0.0 && prior.correlation_threshold < 1.0))
    throw ConfigError("correlation_threshold must lie in (0, 1)");
  if (prior.b_phi < 0.0) throw ConfigError("b_phi must be non-negative");
  if (prior.dof < 0.0) throw ConfigError("prior dof must be non-negative");
  if (simulation.n < 2) throw ConfigError("simulation.n must be at least 2");
  if (simulation.replicates < 1) throw ConfigError("simulation.replicates must be at least 1");
}

RunConfig parse_config(const std::string& text) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(root, "config", {"data", "prior", "nu", "mcmc", "chains", "threads", "seed", "output", "predict", "simulation"});
  RunConfig c;
  if (root.contains("data")) {
    const json& d = root["data"];
    check_keys(d, "data", {"path", "holdout_path", "responses", "covariates", "intercept"});
    read(d, "path", c.data.path, "data");
    read(d, "holdout_path", c.data.holdout_path, "data");
    read(d, "covariates", c.data.covariates, "data");
    read(d, "intercept", c.data.intercept, "data");
    if (d.contains("responses")) {
      if (!d["responses"].is_array()) throw ConfigError("'data.responses' must be an array");
      c.data.responses.clear();
      for (const json& r : d["responses"]) {
        check_keys(r, "data.responses[]", {"name", "family", "psi", "trials", "trials_column"});
        ResponseConfig rc;
        std::string family = "gaussian";
        read(r, "name", rc.name, "data.responses[]");
        read(r, "family", family, "data.responses[]");
        rc.family.kind = parse_family(family);
        read(r, "psi", rc.family.psi, "data.responses[]");
        read(r, "trials", rc.family.trials, "data.responses[]");
        read(r, "trials_column", rc.trials_column, "data.responses[]");
        c.data.responses.push_back(rc);
      }
    }
  }
  if (root.contains("prior")) {
    const json& p = root["prior"];
    check_keys(p, "prior", {"M", "V", "S", "v", "b_phi", "correlation_threshold"});
    if (p.contains("M")) c.prior.m = matrix_from_json(p["M"], "prior.M");
    if (p.contains("V")) c.prior.v = matrix_from_json(p["V"], "prior.V");
    if (p.contains("S")) c.prior.s = matrix_from_json(p["S"], "prior.S");
    read(p, "v", c.prior.dof, "prior");
    read(p, "b_phi", c.prior.b_phi, "prior");
    read(p, "correlation_threshold", c.prior.correlation_threshold, "prior");
  }
  read(root, "nu", c.nu, "config");
  if (root.contains("mcmc")) {
    const json& m = root["mcmc"];
    check_keys(m, "mcmc", {"iterations", "burn_in", "thin", "m", "proposal_sd", "adapt_window", "target_accept",
                           "jitter", "store_w", "update_phi", "initial_phi"});
    read(m, "iterations", c.mcmc.iterations, "mcmc");
    read(m, "burn_in", c.mcmc.burn_in, "mcmc");
    read(m, "thin", c.mcmc.thin, "mcmc");
    read(m, "m", c.mcmc.m, "mcmc");
    read(m, "proposal_sd", c.mcmc.proposal_sd, "mcmc");
    read(m, "adapt_window", c.mcmc.adapt_window, "mcmc");
    read(m, "target_accept", c.mcmc.target_accept, "mcmc");
    read(m, "jitter", c.mcmc.jitter, "mcmc");
    read(m, "store_w", c.mcmc.store_w, "mcmc");
    read(m, "update_phi", c.mcmc.update_phi, "mcmc");
    read(m, "initial_phi", c.mcmc.initial_phi, "mcmc");
  }
  read(root, "chains", c.chains, "config");
  read(root, "threads", c.threads, "config");
  read(root, "seed", c.seed, "config");
  if (root.contains("output")) {
    check_keys(root["output"], "output", {"dir"});
    read(root["output"], "dir", c.out_dir, "output");
  }
  if (root.contains("predict")) {
    check_keys(root["predict"], "predict", {"level"});
    read(root["predict"], "level", c.level, "predict");
  }
  if (root.contains("simulation")) {
    const json& s = root["simulation"];
    check_keys(s, "simulation", {"n", "holdout_fraction", "phi0", "B0", "Sigma0", "replicates"});
    read(s, "n", c.simulation.n, "simulation");
    read(s, "holdout_fraction", c.simulation.holdout_fraction, "simulation");
    read(s, "phi0", c.simulation.phi0, "simulation");
    if (s.contains("B0")) c.simulation.b0 = matrix_from_json(s["B0"], "simulation.B0");
    if (s.contains("Sigma0")) c.simulation.sigma0 = matrix_from_json(s["Sigma0"], "simulation.Sigma0");
    read(s, "replicates", c.simulation.replicates, "simulation");
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) { return parse_config(read_file(path)); }

std::string config_to_json(const RunConfig& c) {
  json root;
  json responses = json::array();
  for (const auto& r : c.data.responses)
    responses.push_back({{"name", r.name},
                         {"family", std::string(family_name(r.family.kind))},
                         {"psi", r.family.psi},
                         {"trials", r.family.trials},
                         {"trials_column", r.trials_column}});
  root["data"] = {{"path", c.data.path},
                  {"holdout_path", c.data.holdout_path},
                  {"responses", responses},
                  {"covariates", c.data.covariates},
                  {"intercept", c.data.intercept}};
  root["prior"] = {{"M", matrix_to_json(c.prior.m)},
                   {"V", matrix_to_json(c.prior.v)},
                   {"S", matrix_to_json(c.prior.s)},
                   {"v", c.prior.dof},
                   {"b_phi", c.prior.b_phi},
                   {"correlation_threshold", c.prior.correlation_threshold}};
  root["nu"] = c.nu;
  root["mcmc"] = {{"iterations", c.mcmc.iterations},   {"burn_in", c.mcmc.burn_in},
                  {"thin", c.mcmc.thin},               {"m", c.mcmc.m},
                  {"proposal_sd", c.mcmc.proposal_sd}, {"adapt_window", c.mcmc.adapt_window},
                  {"target_accept", c.mcmc.target_accept}, {"jitter", c.mcmc.jitter},
                  {"store_w", c.mcmc.store_w},         {"update_phi", c.mcmc.update_phi},
                  {"initial_phi", c.mcmc.initial_phi}};
  root["chains"] = c.chains;
  root["threads"] = c.threads;
  root["seed"] = c.seed;
  root["output"] = {{"dir", c.out_dir}};
  root["predict"] = {{"level", c.level}};
  root["simulation"] = {{"n", c.simulation.n},
                        {"holdout_fraction", c.simulation.holdout_fraction},
                        {"phi0", c.simulation.phi0},
                        {"B0", matrix_to_json(c.simulation.b0)},
                        {"Sigma0", matrix_to_json(c.simulation.sigma0)},
                        {"replicates", c.simulation.replicates}};
  return root.dump(2) + "\n";
}

std::string config_hash(const RunConfig& cfg) {
  // Output location and thread count do not change results.
  RunConfig c = cfg;
  c.out_dir.clear();
  c.threads = 1;
  const std::string text = config_to_json(c);
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DatasetSchema dataset_schema(const RunConfig& cfg) {
  DatasetSchema s;
  for (const auto& r : cfg.data.responses) s.responses.push_back({r.name, r.family, r.trials_column});
  s.covariates = cfg.data.covariates;
  s.intercept = cfg.data.intercept;
  return s;
}

PriorSpec resolve_prior(const RunConfig& cfg, const SpatialDataset& data) {
  const Index p = data.p(), q = data.q();
  PriorSpec prior;
  prior.m = cfg.prior.m.resolve(p, q, false, "prior.M");
  prior.v = cfg.prior.v.resolve(p, p, true, "prior.V");
  prior.s = cfg.prior.s.resolve(q, q, true, "prior.S");
  prior.dof = cfg.prior.dof > 0.0 ? cfg.prior.dof : static_cast<double>(q) + 1.0;
  prior.nu = cfg.nu;
  prior.b_phi = cfg.prior.b_phi > 0.0 ? cfg.prior.b_phi
                                      : phi_upper_bound(data.sites, cfg.nu, cfg.prior.correlation_threshold);
  prior.validate(p, q);
  return prior;
}

McmcConfig resolve_mcmc(const RunConfig& cfg) {
  McmcConfig m = cfg.mcmc;
  m.seed = cfg.seed;
  m.threads = cfg.threads;
  return m;
}

SimulationScenario resolve_scenario(const RunConfig& cfg) {
  SimulationScenario s;
  const auto q = static_cast<Index>(cfg.data.responses.size());
  s.n = cfg.simulation.n;
  s.holdout_fraction = cfg.simulation.holdout_fraction;
  for (const auto& r : cfg.data.responses) {
    s.families.push_back(r.family);
    s.response_names.push_back(r.name);
  }
  s.b0 = cfg.simulation.b0.resolve(3, q, false, "simulation.B0");
  s.sigma0 = cfg.simulation.sigma0.resolve(q, q, true, "simulation.Sigma0");
  s.phi0 = cfg.simulation.phi0;
  s.nu = cfg.nu;
  s.seed = cfg.seed;
  s.replicates = cfg.simulation.replicates;
  s.validate();
  return s;
}

}  // namespace mtvgp
