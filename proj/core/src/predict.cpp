#include "mtvgp/predict.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

#include "mtvgp/errors.hpp"
#include "mtvgp/matrixvariate.hpp"

namespace mtvgp {

Predictor::Predictor(const SpatialDataset& train, const SpatialDataset& target, Index m, double nu, double jitter)
    : train_(&train),
      x_star_(target.x),
      target_model_(target.model),
      joint_(joint_prediction_ordering(train.sites, target.sites,
                                       std::min<Index>(m, train.n() + target.n() - 1))),
      nu_(nu),
      jitter_(jitter) {
  if (target.p() != train.p()) throw DataError("prediction covariates must have the training column count");
  if (target.q() != train.q()) throw DataError("prediction response model must have the training response count");
  structure_ = std::make_shared<const VecchiaStructure>(joint_.sites, joint_.order, joint_.sets);
}

const PredictionBlocks& Predictor::blocks(double phi) const {
  auto it = cache_.find(phi);
  if (it != cache_.end()) return *it->second;
  const VecchiaFactor f = build_factor(*structure_, MaternParams{phi, nu_}, jitter_);
  auto b = std::make_shared<const PredictionBlocks>(prediction_blocks(f, n(), u()));
  return *cache_.emplace(phi, std::move(b)).first->second;
}

Eigen::MatrixXd Predictor::conditional_covariance(double phi) const {
  const Eigen::MatrixXd ordered = blocks(phi).covariance();
  const auto& perm = joint_.order.perm;
  const Index nn = n(), uu = u();
  Eigen::MatrixXd out(uu, uu);
  for (Index a = 0; a < uu; ++a)
    for (Index c = 0; c < uu; ++c)
      out(perm[static_cast<std::size_t>(nn + a)] - nn, perm[static_cast<std::size_t>(nn + c)] - nn) = ordered(a, c);
  return out;
}

Eigen::MatrixXd Predictor::sample_latent(const Eigen::MatrixXd& w, const Eigen::MatrixXd& b,
                                         const Eigen::MatrixXd& sigma, double phi, Rng& rng, bool noise) const {
  const Index nn = n(), uu = u(), q = w.cols();
  if (w.rows() != nn) throw ConfigError("latent draw does not match the training sites");
  const PredictionBlocks& blk = blocks(phi);
  const auto& perm = joint_.order.perm;
  const Eigen::MatrixXd resid = w - train_->x * b;
  Eigen::MatrixXd r_ord(nn, q);
  for (Index k = 0; k < nn; ++k) r_ord.row(k) = resid.row(perm[static_cast<std::size_t>(k)]);
  Eigen::MatrixXd dev = blk.conditional_shift(r_ord);
  if (noise) {
    const Eigen::MatrixXd col = spd_cholesky(sigma, "Sigma");
    dev += blk.correlate(standard_normal_matrix(uu, q, rng)) * col.transpose();
  }
  Eigen::MatrixXd out = x_star_ * b;
  for (Index k = 0; k < uu; ++k) out.row(perm[static_cast<std::size_t>(nn + k)] - nn) += dev.row(k);
  return out;
}

PredictiveDraws Predictor::sample(const PosteriorChain& chain, const Rng& rng, bool noise, int threads) const {
  if (!chain.has_w()) throw ConfigError("prediction needs stored latent draws; refit with W storage enabled");
  PredictiveDraws out;
  out.u = u();
  out.q = chain.q;
  const auto draws = static_cast<long>(chain.size());
  out.w_star.resize(static_cast<std::size_t>(draws));
  out.y_star.resize(static_cast<std::size_t>(draws));
  for (double phi : std::set<double>(chain.phi.begin(), chain.phi.end())) blocks(phi);
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(draws));
#pragma omp parallel for num_threads(threads > 0 ? threads : 1) schedule(static)
  for (long l = 0; l < draws; ++l) {
    const auto k = static_cast<std::size_t>(l);
    try {
      Rng local = rng.split(static_cast<std::uint64_t>(l));
      out.w_star[k] = sample_latent(chain.w[k], chain.b[k], chain.sigma[k], chain.phi[k], local, noise);
      out.y_star[k] = target_model_.sample(out.w_star[k], local);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
#ifndef _OPENMP
  (void)threads;
#endif
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

PredictiveSummary predictive_summary(const std::vector<Eigen::MatrixXd>& draws, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("interval level must lie in (0, 1)");
  if (draws.size() < 2) throw ConfigError("predictive summary needs at least two draws");
  const Index rows = draws.front().rows(), cols = draws.front().cols();
  PredictiveSummary s;
  s.level = level;
  s.mean.setZero(rows, cols);
  s.median.resize(rows, cols);
  s.lower.resize(rows, cols);
  s.upper.resize(rows, cols);
  std::vector<double> buf(draws.size());
  const double tail = 0.5 * (1.0 - level);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) {
      for (std::size_t l = 0; l < draws.size(); ++l) buf[l] = draws[l](i, j);
      double sum = 0.0;
      for (double v : buf) sum += v;
      s.mean(i, j) = sum / static_cast<double>(buf.size());
      s.median(i, j) = quantile(buf, 0.5);
      s.lower(i, j) = quantile(buf, tail);
      s.upper(i, j) = quantile(buf, 1.0 - tail);
    }
  return s;
}

std::string predictive_draws_csv(const PredictiveDraws& draws, const std::vector<std::string>& comments) {
  std::ostringstream out;
  for (const auto& c : comments) out << "# " << c << '\n';
  out << "site_id,response_id,draw_id,w_star,y_star\n";
  char buf[96];
  for (std::size_t l = 0; l < draws.size(); ++l)
    for (Index i = 0; i < draws.u; ++i)
      for (Index j = 0; j < draws.q; ++j) {
        std::snprintf(buf, sizeof(buf), "%ld,%ld,%zu,%.17g,%.17g\n", static_cast<long>(i), static_cast<long>(j), l,
                      draws.w_star[l](i, j), draws.y_star[l](i, j));
        out << buf;
      }
  return out.str();
}

}  // namespace mtvgp
