#include "mtvgp/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "mtvgp/errors.hpp"

namespace mtvgp {

namespace {

double log_mean_exp(const std::vector<double>& v) {
  const double mx = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double x : v) s += std::exp(x - mx);
  return mx + std::log(s / static_cast<double>(v.size()));
}

double sample_variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size() - 1);
}

void shuffle_indices(std::vector<Index>& ids, Rng& rng) {
  for (std::size_t k = ids.size(); k > 1; --k) {
    const auto r = static_cast<std::size_t>(rng.uniform() * static_cast<double>(k));
    std::swap(ids[k - 1], ids[std::min(r, k - 1)]);
  }
}

}  // namespace

WaicReport waic_from_table(const std::vector<Eigen::MatrixXd>& loglik) {
  if (loglik.size() < 2) throw ConfigError("WAIC needs at least two draws");
  const Index n = loglik.front().rows(), q = loglik.front().cols();
  WaicReport r;
  r.pointwise_lppd.resize(n, q);
  r.pointwise_p_waic.resize(n, q);
  std::vector<double> buf(loglik.size());
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < q; ++j) {
      for (std::size_t l = 0; l < loglik.size(); ++l) buf[l] = loglik[l](i, j);
      r.pointwise_lppd(i, j) = log_mean_exp(buf);
      r.pointwise_p_waic(i, j) = sample_variance(buf);
    }
  r.lppd = r.pointwise_lppd.sum();
  r.p_waic = r.pointwise_p_waic.sum();
  r.waic = -2.0 * (r.lppd - r.p_waic);
  return r;
}

WaicReport waic(const PosteriorChain& chain, const Eigen::MatrixXd& y, const ResponseModel& model) {
  if (!chain.has_w()) throw ConfigError("WAIC needs stored latent draws");
  if (chain.size() < 2) throw ConfigError("WAIC needs at least two draws");
  std::vector<Eigen::MatrixXd> table;
  table.reserve(chain.size());
  for (const auto& w : chain.w) table.push_back(model.pointwise(y, w));
  return waic_from_table(table);
}

Eigen::VectorXd site_log_predictive_density(const PredictiveDraws& draws, const Eigen::MatrixXd& y_holdout,
                                            const ResponseModel& model) {
  if (draws.size() == 0) throw ConfigError("no predictive draws");
  if (y_holdout.rows() != draws.u || y_holdout.cols() != draws.q)
    throw DataError("hold-out responses do not align with the prediction sites");
  Eigen::VectorXd out(draws.u);
  std::vector<double> buf(draws.size());
  for (Index i = 0; i < draws.u; ++i) {
    for (std::size_t l = 0; l < draws.size(); ++l) {
      double s = 0.0;
      for (Index j = 0; j < draws.q; ++j)
        s += log_likelihood(model.families[static_cast<std::size_t>(j)], y_holdout(i, j), draws.w_star[l](i, j),
                            model.trials_at(i, j));
      buf[l] = s;
    }
    out(i) = log_mean_exp(buf);
  }
  return out;
}

std::vector<bool> coverage_indicators(const PredictiveDraws& draws, const Eigen::MatrixXd& y_holdout, double level) {
  if (y_holdout.rows() != draws.u || y_holdout.cols() != draws.q)
    throw DataError("hold-out responses do not align with the prediction sites");
  const PredictiveSummary s = predictive_summary(draws.y_star, level);
  std::vector<bool> hits;
  for (Index i = 0; i < draws.u; ++i)
    for (Index j = 0; j < draws.q; ++j)
      if (!std::isnan(y_holdout(i, j))) hits.push_back(y_holdout(i, j) >= s.lower(i, j) && y_holdout(i, j) <= s.upper(i, j));
  return hits;
}

MeanWithSe mean_with_se(const Eigen::VectorXd& values) {
  MeanWithSe r;
  if (values.size() == 0) return r;
  r.mean = values.mean();
  if (values.size() > 1) {
    const double var = (values.array() - r.mean).square().sum() / static_cast<double>(values.size() - 1);
    r.se = std::sqrt(var / static_cast<double>(values.size()));
  }
  return r;
}

MeanWithSe proportion_with_se(const std::vector<bool>& hits) {
  MeanWithSe r;
  if (hits.empty()) return r;
  const double n = static_cast<double>(hits.size());
  r.mean = static_cast<double>(std::count(hits.begin(), hits.end(), true)) / n;
  r.se = std::sqrt(r.mean * (1.0 - r.mean) / n);
  return r;
}

ElpdReport elpd_and_coverage(const PredictiveDraws& draws, const Eigen::MatrixXd& y_holdout,
                             const ResponseModel& model, double level) {
  ElpdReport r;
  r.pointwise = site_log_predictive_density(draws, y_holdout, model);
  r.elpd = mean_with_se(r.pointwise);
  r.coverage = proportion_with_se(coverage_indicators(draws, y_holdout, level));
  return r;
}

std::vector<VariogramBin> empirical_semivariogram(const Eigen::VectorXd& residuals, const SiteSet& sites,
                                                  int n_bins, double max_lag) {
  const Index n = sites.size();
  if (n < 2) throw ConfigError("semivariogram needs at least two sites");
  if (n_bins < 1) throw ConfigError("semivariogram needs at least one bin");
  if (!(max_lag > 0.0)) throw ConfigError("max_lag must be positive");
  if (residuals.size() != n) throw DataError("residual count does not match the sites");
  const double width = max_lag / n_bins;
  std::vector<double> sum(static_cast<std::size_t>(n_bins), 0.0), dist(static_cast<std::size_t>(n_bins), 0.0);
  std::vector<long> count(static_cast<std::size_t>(n_bins), 0);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double h = sites.distance(i, j);
      if (!(h > 0.0) || h > max_lag) continue;
      const auto b = static_cast<std::size_t>(std::min<double>(std::ceil(h / width) - 1.0, n_bins - 1));
      const double d = residuals(i) - residuals(j);
      sum[b] += d * d;
      dist[b] += h;
      ++count[b];
    }
  std::vector<VariogramBin> out(static_cast<std::size_t>(n_bins));
  for (std::size_t b = 0; b < out.size(); ++b) {
    out[b].lag = (static_cast<double>(b) + 0.5) * width;
    out[b].count = count[b];
    if (count[b] > 0) {
      out[b].semivariance = 0.5 * sum[b] / static_cast<double>(count[b]);
      out[b].mean_distance = dist[b] / static_cast<double>(count[b]);
    } else {
      out[b].semivariance = std::numeric_limits<double>::quiet_NaN();
      out[b].mean_distance = std::numeric_limits<double>::quiet_NaN();
    }
  }
  return out;
}

std::string semivariogram_csv(const std::vector<VariogramBin>& bins) {
  std::ostringstream out;
  out << "lag,mean_distance,semivariance,count\n";
  char buf[128];
  for (const auto& b : bins) {
    if (b.count == 0) {
      std::snprintf(buf, sizeof(buf), "%.17g,NA,NA,0\n", b.lag);
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g,%ld\n", b.lag, b.mean_distance, b.semivariance, b.count);
    }
    out << buf;
  }
  return out.str();
}

std::vector<std::vector<Index>> kfold_split(Index n, int k, Rng& rng) {
  if (k < 2 || k > n) throw ConfigError("k-fold split needs 2 <= k <= n");
  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index{0});
  shuffle_indices(ids, rng);
  std::vector<std::vector<Index>> folds(static_cast<std::size_t>(k));
  for (std::size_t t = 0; t < ids.size(); ++t) folds[t % static_cast<std::size_t>(k)].push_back(ids[t]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

Split holdout_split(Index n, double fraction, Rng& rng) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ConfigError("holdout fraction must lie in [0, 1)");
  std::vector<Index> ids(static_cast<std::size_t>(n));
  std::iota(ids.begin(), ids.end(), Index{0});
  shuffle_indices(ids, rng);
  const auto u = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  Split s;
  s.test.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(u));
  s.train.assign(ids.begin() + static_cast<std::ptrdiff_t>(u), ids.end());
  std::sort(s.test.begin(), s.test.end());
  std::sort(s.train.begin(), s.train.end());
  return s;
}

std::string metric_report_json(const WaicReport* w, const ElpdReport* e) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  if (w) j["waic"] = {{"waic", w->waic}, {"lppd", w->lppd}, {"p_waic", w->p_waic}};
  if (e) {
    j["elpd"] = {{"mean", e->elpd.mean}, {"se", e->elpd.se}};
    j["coverage"] = {{"mean", e->coverage.mean}, {"se", e->coverage.se}};
    j["pointwise_elpd"] = std::vector<double>(e->pointwise.data(), e->pointwise.data() + e->pointwise.size());
  }
  return j.dump(2) + "\n";
}

}  // namespace mtvgp
