#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/dataset.hpp"
#include "mtvgp/families.hpp"
#include "mtvgp/kernels.hpp"
#include "mtvgp/random.hpp"
#include "mtvgp/vecchia.hpp"

namespace mtvgp {

/// Hyperparameters: B | Sigma ~ MN(M, V, Sigma), Sigma ~ IW(S, dof),
/// phi ~ Uniform(0, b_phi), Matern smoothness nu fixed.
struct PriorSpec {
  Eigen::MatrixXd m;  // p x q
  Eigen::MatrixXd v;  // p x p
  Eigen::MatrixXd s;  // q x q
  double dof = 0.0;
  double b_phi = 1.0;
  double nu = 0.5;

  /// M = 0, V = 100 I, S = I, dof = q + 1.
  static PriorSpec defaults(Index p, Index q, double b_phi, double nu);
  /// Throws ConfigError on shape mismatch, non-SPD V or S, dof <= q - 1 or b_phi <= 0.
  void validate(Index p, Index q) const;
};

/// Range at which the Matern correlation equals `threshold` at the domain diameter.
double phi_upper_bound(const SiteSet& sites, double nu, double threshold = 0.05);

struct McmcConfig {
  long iterations = 2000;
  long burn_in = 1000;
  long thin = 1;
  Index m = 10;
  double proposal_sd = 0.0;  // 0 selects b_phi / 10
  long adapt_window = 0;     // adapt during the first min(burn_in, adapt_window) iterations; 0 = all of burn-in
  double target_accept = 0.44;
  double jitter = kDefaultJitter;
  std::uint64_t seed = 1;
  bool store_w = true;
  bool update_phi = true;
  double initial_phi = 0.0;  // 0 selects b_phi / 2
  int threads = 1;           // rows of the factor build

  /// Requires iterations >= burn_in >= 0 and thin >= 1.
  void validate() const;
};

struct ChainStats {
  long iterations = 0;
  long burn_in = 0;
  long thin = 1;
  long phi_proposals = 0;
  long phi_accepts = 0;
  long phi_build_failures = 0;
  double proposal_sd = 0.0;  // final (post-adaptation) value
  long ess_sweeps = 0;
  long ess_shrinks = 0;
  long ess_stalls = 0;

  double phi_acceptance() const noexcept {
    return phi_proposals > 0 ? static_cast<double>(phi_accepts) / static_cast<double>(phi_proposals) : 0.0;
  }
};

/// Stored draws. W draws are in the dataset's original site order.
struct PosteriorChain {
  Index n = 0, p = 0, q = 0;
  std::vector<double> phi;
  std::vector<Eigen::MatrixXd> b;
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<Eigen::MatrixXd> w;
  std::vector<int> chain_id;
  ChainStats stats;
  std::vector<int> constrained;  // responses whose Sigma diagonal was fixed to 1

  std::size_t size() const noexcept { return phi.size(); }
  bool has_w() const noexcept { return !w.empty(); }
};

struct ModelState {
  Eigen::MatrixXd w;      // ordered sites
  Eigen::MatrixXd b;
  Eigen::MatrixXd sigma;
  double phi = 0.0;
  std::shared_ptr<const VecchiaFactor> factor;
  double loglik = 0.0;    // data log-likelihood at w
};

/// Conjugate MNIW draw of (Sigma, B) given UW = U W and UX = U X.
struct SigmaB {
  Eigen::MatrixXd sigma;
  Eigen::MatrixXd b;
};
SigmaB gibbs_update_sigma_b(const Eigen::MatrixXd& uw, const Eigen::MatrixXd& ux, const PriorSpec& prior, Rng& rng);
SigmaB gibbs_update_sigma_b(const Eigen::MatrixXd& w, const Eigen::MatrixXd& x, const VecchiaFactor& factor,
                            const PriorSpec& prior, Rng& rng);

/// Log Metropolis-Hastings ratio for a truncated-normal random walk on (0, b_phi)
/// under a uniform prior, given the latent log densities at both values.
double phi_log_accept_ratio(double logdens_current, double logdens_proposed, double phi, double phi_proposed,
                            double sd, double b_phi);

struct PhiStep {
  bool accepted = false;
  bool build_failed = false;
  double accept_prob = 0.0;
};

/// One MH update of phi; on acceptance replaces state.phi and state.factor.
PhiStep mh_update_phi(ModelState& state, const Eigen::MatrixXd& x, const PriorSpec& prior, double proposal_sd,
                      FactorCache& cache, Rng& rng);

struct EssStep {
  int shrinks = 0;
  bool stalled = false;
};

/// One elliptical slice sweep over the whole latent matrix; updates state.w
/// and state.loglik. Gives up after `max_shrinks` bracket shrinks.
EssStep ess_update_w(ModelState& state, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                     const ResponseModel& model, Rng& rng, int max_shrinks = 100);

/// Rescales stored Sigma draws to D Sigma D with D_jj = Sigma_jj^{-1/2} for
/// logit-linked responses (1 elsewhere); constrained diagonals become exactly 1.
void postprocess_identifiability(PosteriorChain& chain, const ResponseModel& model);

enum class SamplerStep { kPhi, kSigmaB, kLatent };

struct SamplerHooks {
  std::function<void(long iteration, SamplerStep step)> on_step;
};

/// Single chain on `data`, seeded from (config.seed, stream).
PosteriorChain run_chain(const SpatialDataset& data, const PriorSpec& prior, const McmcConfig& config,
                         std::uint64_t stream = 0, const SamplerHooks* hooks = nullptr);

/// `chains` independent chains on streams 0..chains-1, run on up to
/// `threads` threads and concatenated in stream order.
PosteriorChain run_chains(const SpatialDataset& data, const PriorSpec& prior, const McmcConfig& config, int chains,
                          int threads = 1);

/// Geyer initial-positive-sequence effective sample size.
double effective_sample_size(std::span<const double> draws);

/// Sample quantile (linear interpolation between order statistics).
double quantile(std::vector<double> values, double prob);

}  // namespace mtvgp
