#include "mtvgp/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <numbers>
#include <sstream>
#include <thread>

#include <Eigen/Cholesky>
#include <Eigen/QR>

#include "mtvgp/errors.hpp"
#include "mtvgp/matrixvariate.hpp"

namespace mtvgp {

PriorSpec PriorSpec::defaults(Index p, Index q, double b_phi, double nu) {
  PriorSpec s;
  s.m = Eigen::MatrixXd::Zero(p, q);
  s.v = 100.0 * Eigen::MatrixXd::Identity(p, p);
  s.s = Eigen::MatrixXd::Identity(q, q);
  s.dof = static_cast<double>(q) + 1.0;
  s.b_phi = b_phi;
  s.nu = nu;
  return s;
}

void PriorSpec::validate(Index p, Index q) const {
  if (m.rows() != p || m.cols() != q) throw ConfigError("prior mean M must be p x q");
  if (v.rows() != p || v.cols() != p) throw ConfigError("prior row covariance V must be p x p");
  if (s.rows() != q || s.cols() != q) throw ConfigError("inverse-Wishart scale S must be q x q");
  if (!(dof > static_cast<double>(q) - 1.0)) throw ConfigError("inverse-Wishart dof must exceed q - 1");
  if (!(b_phi > 0.0) || !std::isfinite(b_phi)) throw ConfigError("b_phi must be positive");
  if (!(nu > 0.0) || !std::isfinite(nu)) throw ConfigError("nu must be positive");
  try {
    if (p > 0) spd_cholesky(v, "V");
    spd_cholesky(s, "S");
  } catch (const NumericError& e) {
    throw ConfigError(std::string("prior matrix is not positive definite: ") + e.what());
  }
}

double phi_upper_bound(const SiteSet& sites, double nu, double threshold) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("correlation threshold must lie in (0, 1)");
  const double diameter = domain_diameter(sites);
  if (!(diameter > 0.0)) throw DataError("domain diameter is zero; b_phi needs at least two distinct sites");
  return range_for_correlation(diameter, nu, threshold);
}

void McmcConfig::validate() const {
  if (burn_in < 0 || iterations < burn_in) throw ConfigError("MCMC needs iterations >= burn_in >= 0");
  if (thin < 1) throw ConfigError("thinning must be at least 1");
  if (m < 1) throw ConfigError("neighbor count m must be at least 1");
  if (proposal_sd < 0.0 || !std::isfinite(proposal_sd)) throw ConfigError("proposal_sd must be non-negative");
  if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target acceptance must lie in (0, 1)");
  if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw ConfigError("jitter must be non-negative");
  if (adapt_window < 0) throw ConfigError("adapt_window must be non-negative");
  if (initial_phi < 0.0) throw ConfigError("initial_phi must be non-negative");
  if (threads < 1) throw ConfigError("threads must be at least 1");
}

SigmaB gibbs_update_sigma_b(const Eigen::MatrixXd& uw, const Eigen::MatrixXd& ux, const PriorSpec& prior, Rng& rng) {
  const Index n = uw.rows();
  const Index p = ux.cols();
  if (ux.rows() != n) throw ConfigError("gibbs update: X and W row counts differ");
  const Eigen::MatrixXd vinv = p > 0 ? Eigen::MatrixXd(prior.v.llt().solve(Eigen::MatrixXd::Identity(p, p)))
                                     : Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd prec = ux.transpose() * ux + vinv;
  prec = 0.5 * (prec + prec.transpose());
  Eigen::LLT<Eigen::MatrixXd> llt(prec);
  if (p > 0 && llt.info() != Eigen::Success) throw NumericError("posterior precision of B is not positive definite");
  const Eigen::MatrixXd mt =
      p > 0 ? Eigen::MatrixXd(llt.solve(ux.transpose() * uw + vinv * prior.m)) : Eigen::MatrixXd(0, uw.cols());
  const Eigen::MatrixXd resid = uw - ux * mt;
  const Eigen::MatrixXd dm = mt - prior.m;
  Eigen::MatrixXd st = prior.s + resid.transpose() * resid + dm.transpose() * vinv * dm;
  st = 0.5 * (st + st.transpose());
  SigmaB out;
  out.sigma = sample_inverse_wishart({st, prior.dof + static_cast<double>(n)}, rng);
  if (p > 0) {
    const Eigen::MatrixXd r = llt.matrixU();
    out.b = sample_matrix_normal({mt, r, RowFactor::kPrecisionUpper, out.sigma}, rng);
  } else {
    out.b = Eigen::MatrixXd(0, uw.cols());
  }
  return out;
}

SigmaB gibbs_update_sigma_b(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const VecchiaFactor& factor,
                            const PriorSpec& prior, Rng& rng) {
  return gibbs_update_sigma_b(apply_factor(factor, w), apply_factor(factor, x), prior, rng);
}

double phi_log_accept_ratio(double logdens_current, double logdens_proposed, double phi, double phi_proposed,
                            double sd, double b_phi) {
  return logdens_proposed - logdens_current + log_trunc_mass(phi, sd, 0.0, b_phi) -
         log_trunc_mass(phi_proposed, sd, 0.0, b_phi);
}

PhiStep mh_update_phi(ModelState& state, const Eigen::MatrixXd& x, const PriorSpec& prior, double proposal_sd,
                      FactorCache& cache, Rng& rng) {
  PhiStep step;
  const Eigen::MatrixXd mean = x * state.b;
  const Eigen::MatrixXd col_chol = spd_cholesky(state.sigma, "Sigma");
  const double proposal = sample_truncated_normal(state.phi, proposal_sd, 0.0, prior.b_phi, rng);
  const double log_u = std::log(rng.uniform());
  std::shared_ptr<const VecchiaFactor> candidate;
  try {
    candidate = cache.get(proposal);
  } catch (const NumericError&) {
    step.build_failed = true;
    return step;
  }
  const double current = latent_logdensity(*state.factor, state.w, mean, col_chol);
  const double proposed = latent_logdensity(*candidate, state.w, mean, col_chol);
  const double lr = phi_log_accept_ratio(current, proposed, state.phi, proposal, proposal_sd, prior.b_phi);
  if (std::isnan(lr)) return step;
  step.accept_prob = lr >= 0.0 ? 1.0 : std::exp(lr);
  if (log_u < lr) {
    step.accepted = true;
    state.phi = proposal;
    state.factor = std::move(candidate);
  }
  return step;
}

EssStep ess_update_w(ModelState& state, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const ResponseModel& model, Rng& rng, int max_shrinks) {
  EssStep step;
  const Eigen::MatrixXd mu = x * state.b;
  const Eigen::MatrixXd col_chol = spd_cholesky(state.sigma, "Sigma");
  const Eigen::MatrixXd prior_draw =
      sample_latent_prior(*state.factor, Eigen::MatrixXd::Zero(mu.rows(), mu.cols()), col_chol, rng);
  const Eigen::MatrixXd centered = state.w - mu;
  const double log_level = state.loglik + std::log(rng.uniform());

  double gamma = rng.uniform(0.0, 2.0 * std::numbers::pi);
  double lo = gamma - 2.0 * std::numbers::pi;
  double hi = gamma;
  for (;;) {
    Eigen::MatrixXd candidate = mu + centered * std::cos(gamma) + prior_draw * std::sin(gamma);
    const double ll = model.log_likelihood(y, candidate);
    if (std::isfinite(ll) && ll > log_level) {
      state.w = std::move(candidate);
      state.loglik = ll;
      return step;
    }
    if (step.shrinks == max_shrinks) {
      step.stalled = true;
      return step;
    }
    if (gamma < 0.0) {
      lo = gamma;
    } else {
      hi = gamma;
    }
    gamma = rng.uniform(lo, hi);
    ++step.shrinks;
  }
}

void postprocess_identifiability(PosteriorChain& chain, const ResponseModel& model) {
  chain.constrained.clear();
  for (Index j = 0; j < model.q(); ++j)
    if (model.families[static_cast<std::size_t>(j)].logit_linked()) chain.constrained.push_back(static_cast<int>(j));
  if (chain.constrained.empty()) return;
  for (auto& s : chain.sigma) {
    Eigen::VectorXd d = Eigen::VectorXd::Ones(s.rows());
    for (int j : chain.constrained) d(j) = 1.0 / std::sqrt(s(j, j));
    s = d.asDiagonal() * s * d.asDiagonal();
    for (int j : chain.constrained) s(j, j) = 1.0;
  }
}

namespace {

std::string snapshot(long it, const ModelState& st) {
  std::ostringstream os;
  os << "iteration " << it << " (phi=" << st.phi << ", diag(Sigma)=[";
  for (Index j = 0; j < st.sigma.rows(); ++j) os << (j ? ", " : "") << st.sigma(j, j);
  os << "])";
  return os.str();
}

}  // namespace

PosteriorChain run_chain(const SpatialDataset& data, const PriorSpec& prior, const McmcConfig& config,
                         std::uint64_t stream, const SamplerHooks* hooks) {
  data.validate();
  config.validate();
  const Index n = data.n(), p = data.p(), q = data.q();
  prior.validate(p, q);
  if (p > 0) data.require_full_rank();

  const Ordering order = maxmin_order(data.sites);
  const Index m = n == 1 ? 1 : std::min<Index>(config.m, n - 1);
  auto structure = std::make_shared<const VecchiaStructure>(data.sites, order,
                                                            build_conditioning_sets(data.sites, order, m));
  FactorCache cache(structure, prior.nu, config.jitter, 16);
  cache.set_threads(config.threads);

  Eigen::MatrixXd x(n, p), y(n, q);
  ResponseModel model = data.model;
  if (model.trials.size() != 0) model.trials.resize(n, q);
  for (Index i = 0; i < n; ++i) {
    const Index src = order.perm[static_cast<std::size_t>(i)];
    x.row(i) = data.x.row(src);
    y.row(i) = data.y.row(src);
    if (model.trials.size() != 0) model.trials.row(i) = data.model.trials.row(src);
  }

  Rng rng(config.seed, stream);
  ModelState state;
  state.w = model.warm_start(y);
  state.b = p > 0 ? Eigen::MatrixXd(x.colPivHouseholderQr().solve(state.w)) : Eigen::MatrixXd(0, q);
  state.sigma = prior.s / std::max(prior.dof - static_cast<double>(q) - 1.0, 1.0);
  state.phi = config.initial_phi > 0.0 ? config.initial_phi : prior.b_phi / 2.0;
  if (!(state.phi < prior.b_phi)) throw ConfigError("initial_phi must lie in (0, b_phi)");
  state.factor = cache.get(state.phi);
  state.loglik = model.log_likelihood(y, state.w);

  double log_sd = std::log(config.proposal_sd > 0.0 ? config.proposal_sd : prior.b_phi / 10.0);
  const double log_sd_lo = std::log(1e-6 * prior.b_phi);
  const double log_sd_hi = std::log(prior.b_phi);
  log_sd = std::clamp(log_sd, log_sd_lo, log_sd_hi);
  const long adapt_end = config.adapt_window > 0 ? std::min(config.burn_in, config.adapt_window) : config.burn_in;

  PosteriorChain chain;
  chain.n = n;
  chain.p = p;
  chain.q = q;
  chain.stats.iterations = config.iterations;
  chain.stats.burn_in = config.burn_in;
  chain.stats.thin = config.thin;
  const auto stored = static_cast<std::size_t>(
      config.iterations > config.burn_in ? (config.iterations - config.burn_in + config.thin - 1) / config.thin : 0);
  chain.phi.reserve(stored);
  chain.b.reserve(stored);
  chain.sigma.reserve(stored);
  if (config.store_w) chain.w.reserve(stored);

  Eigen::MatrixXd ux;
  std::shared_ptr<const VecchiaFactor> ux_factor;
  const auto notify = [&](long it, SamplerStep s) {
    if (hooks && hooks->on_step) hooks->on_step(it, s);
  };

  for (long it = 0; it < config.iterations; ++it) {
    try {
      if (config.update_phi) {
        const PhiStep step = mh_update_phi(state, x, prior, std::exp(log_sd), cache, rng);
        ++chain.stats.phi_proposals;
        chain.stats.phi_accepts += step.accepted ? 1 : 0;
        chain.stats.phi_build_failures += step.build_failed ? 1 : 0;
        if (it < adapt_end) {
          log_sd += std::pow(static_cast<double>(it + 1), -0.6) * (step.accept_prob - config.target_accept);
          log_sd = std::clamp(log_sd, log_sd_lo, log_sd_hi);
        }
      }
      notify(it, SamplerStep::kPhi);

      if (ux_factor != state.factor) {
        ux = apply_factor(*state.factor, x);
        ux_factor = state.factor;
      }
      SigmaB sb = gibbs_update_sigma_b(apply_factor(*state.factor, state.w), ux, prior, rng);
      state.sigma = std::move(sb.sigma);
      state.b = std::move(sb.b);
      notify(it, SamplerStep::kSigmaB);

      const EssStep ess = ess_update_w(state, x, y, model, rng);
      ++chain.stats.ess_sweeps;
      chain.stats.ess_shrinks += ess.shrinks;
      chain.stats.ess_stalls += ess.stalled ? 1 : 0;
      notify(it, SamplerStep::kLatent);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at " + snapshot(it, state));
    }

    if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) {
      chain.phi.push_back(state.phi);
      chain.b.push_back(state.b);
      chain.sigma.push_back(state.sigma);
      chain.chain_id.push_back(static_cast<int>(stream));
      if (config.store_w) {
        Eigen::MatrixXd w(n, q);
        for (Index i = 0; i < n; ++i) w.row(order.perm[static_cast<std::size_t>(i)]) = state.w.row(i);
        chain.w.push_back(std::move(w));
      }
    }
  }
  chain.stats.proposal_sd = std::exp(log_sd);
  postprocess_identifiability(chain, data.model);
  return chain;
}

PosteriorChain run_chains(const SpatialDataset& data, const PriorSpec& prior, const McmcConfig& config, int chains,
                          int threads) {
  if (chains < 1) throw ConfigError("at least one chain is required");
  std::vector<PosteriorChain> results(static_cast<std::size_t>(chains));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(chains));
  const int workers = std::clamp(threads, 1, chains);
  const auto work = [&](int first) {
    for (int k = first; k < chains; k += workers) {
      try {
        results[static_cast<std::size_t>(k)] = run_chain(data, prior, config, static_cast<std::uint64_t>(k));
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work, t);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  PosteriorChain out = std::move(results.front());
  double sd_sum = out.stats.proposal_sd;
  for (std::size_t k = 1; k < results.size(); ++k) {
    auto& r = results[k];
    out.phi.insert(out.phi.end(), r.phi.begin(), r.phi.end());
    out.b.insert(out.b.end(), r.b.begin(), r.b.end());
    out.sigma.insert(out.sigma.end(), r.sigma.begin(), r.sigma.end());
    out.w.insert(out.w.end(), r.w.begin(), r.w.end());
    out.chain_id.insert(out.chain_id.end(), r.chain_id.begin(), r.chain_id.end());
    out.stats.phi_proposals += r.stats.phi_proposals;
    out.stats.phi_accepts += r.stats.phi_accepts;
    out.stats.phi_build_failures += r.stats.phi_build_failures;
    out.stats.ess_sweeps += r.stats.ess_sweeps;
    out.stats.ess_shrinks += r.stats.ess_shrinks;
    out.stats.ess_stalls += r.stats.ess_stalls;
    sd_sum += r.stats.proposal_sd;
  }
  out.stats.proposal_sd = sd_sum / static_cast<double>(chains);
  return out;
}

double effective_sample_size(std::span<const double> draws) {
  const std::size_t n = draws.size();
  if (n < 4) return static_cast<double>(n);
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= static_cast<double>(n);
  const auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += (draws[t] - mean) * (draws[t + lag] - mean);
    return s / static_cast<double>(n);
  };
  const double g0 = autocov(0);
  if (!(g0 > 0.0)) return static_cast<double>(n);
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = autocov(2 * k) + autocov(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);  // initial monotone sequence
    prev = pair;
    sum += pair;
  }
  const double var = std::max(-g0 + 2.0 * sum, g0 * 1e-12);
  return std::min(static_cast<double>(n) * g0 / var, static_cast<double>(n) * std::log10(static_cast<double>(n)));
}

double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw ConfigError("quantile of an empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw ConfigError("quantile probability must lie in [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

}  // namespace mtvgp
