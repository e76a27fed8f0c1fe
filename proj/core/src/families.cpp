#include "mtvgp/families.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "mtvgp/errors.hpp"

namespace mtvgp {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

int effective_trials(const FamilySpec& fam, int trials) { return trials > 0 ? trials : fam.trials; }

double logistic(double w) { return w >= 0 ? 1.0 / (1.0 + std::exp(-w)) : std::exp(w) / (1.0 + std::exp(w)); }

void require_domain(const FamilySpec& fam, double w) {
  if (!in_domain(fam, w))
    throw DomainError(std::string(family_name(fam.kind)) + ": natural parameter " + std::to_string(w) +
                      " outside the domain");
}

bool is_integer(double y) { return std::isfinite(y) && y == std::floor(y); }

}  // namespace

std::string_view family_name(FamilyKind kind) noexcept {
  switch (kind) {
    case FamilyKind::kGaussian: return "gaussian";
    case FamilyKind::kBernoulli: return "bernoulli";
    case FamilyKind::kPoisson: return "poisson";
    case FamilyKind::kBinomial: return "binomial";
    case FamilyKind::kGamma: return "gamma";
    case FamilyKind::kNegBinomial: return "negbinomial";
  }
  return "unknown";
}

FamilyKind parse_family(std::string_view name) {
  for (FamilyKind k : {FamilyKind::kGaussian, FamilyKind::kBernoulli, FamilyKind::kPoisson, FamilyKind::kBinomial,
                       FamilyKind::kGamma, FamilyKind::kNegBinomial})
    if (family_name(k) == name) return k;
  throw ConfigError("unknown family \"" + std::string(name) + "\"");
}

void FamilySpec::validate() const {
  if (!(psi > 0.0) || !std::isfinite(psi)) throw ConfigError("family dispersion psi must be positive");
  if (trials < 1) throw ConfigError("binomial trial count must be at least 1");
}

double softplus(double w) noexcept { return w > 0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w)); }

double log1mexp(double w) noexcept {
  return w > -std::numbers::ln2 ? std::log(-std::expm1(w)) : std::log1p(-std::exp(w));
}

bool in_domain(const FamilySpec& fam, double w) noexcept {
  if (!std::isfinite(w)) return false;
  if (fam.kind == FamilyKind::kGamma || fam.kind == FamilyKind::kNegBinomial) return w < 0.0;
  return true;
}

double cumulant(const FamilySpec& fam, double w) {
  require_domain(fam, w);
  switch (fam.kind) {
    case FamilyKind::kGaussian: return 0.5 * w * w;
    case FamilyKind::kBernoulli: return softplus(w);
    case FamilyKind::kPoisson: return std::exp(w);
    case FamilyKind::kBinomial: return fam.trials * softplus(w);
    case FamilyKind::kGamma: return -fam.psi * std::log(-w);
    case FamilyKind::kNegBinomial: return -fam.psi * log1mexp(w);
  }
  return 0.0;
}

double cumulant_d1(const FamilySpec& fam, double w) {
  require_domain(fam, w);
  switch (fam.kind) {
    case FamilyKind::kGaussian: return w;
    case FamilyKind::kBernoulli: return logistic(w);
    case FamilyKind::kPoisson: return std::exp(w);
    case FamilyKind::kBinomial: return fam.trials * logistic(w);
    case FamilyKind::kGamma: return -fam.psi / w;
    case FamilyKind::kNegBinomial: return fam.psi / std::expm1(-w);
  }
  return 0.0;
}

double cumulant_d2(const FamilySpec& fam, double w) {
  require_domain(fam, w);
  switch (fam.kind) {
    case FamilyKind::kGaussian: return 1.0;
    case FamilyKind::kBernoulli: {
      const double p = logistic(w);
      return p * logistic(-w);
    }
    case FamilyKind::kPoisson: return std::exp(w);
    case FamilyKind::kBinomial: return fam.trials * logistic(w) * logistic(-w);
    case FamilyKind::kGamma: return fam.psi / (w * w);
    case FamilyKind::kNegBinomial: {
      const double e = std::expm1(-w);  // (1 - e^w) / e^w
      return fam.psi * (e + 1.0) / (e * e);
    }
  }
  return 0.0;
}

double inverse_link(const FamilySpec& fam, double w, int trials) {
  require_domain(fam, w);
  switch (fam.kind) {
    case FamilyKind::kGaussian: return w;
    case FamilyKind::kBernoulli: return logistic(w);
    case FamilyKind::kPoisson: return std::exp(w);
    case FamilyKind::kBinomial: return effective_trials(fam, trials) * logistic(w);
    case FamilyKind::kGamma: return -fam.psi / w;
    case FamilyKind::kNegBinomial: return fam.psi / std::expm1(-w);
  }
  return 0.0;
}

double log_likelihood(const FamilySpec& fam, double y, double w, int trials) {
  if (std::isnan(y)) return 0.0;
  if (!in_domain(fam, w)) return kNegInf;
  switch (fam.kind) {
    case FamilyKind::kGaussian:
      return -0.5 * std::log(2.0 * std::numbers::pi * fam.psi) - 0.5 * (y - w) * (y - w) / fam.psi;
    case FamilyKind::kBernoulli: return y * w - softplus(w);
    case FamilyKind::kPoisson: return y * w - std::exp(w) - std::lgamma(y + 1.0);
    case FamilyKind::kBinomial: {
      const double m = effective_trials(fam, trials);
      return std::lgamma(m + 1.0) - std::lgamma(y + 1.0) - std::lgamma(m - y + 1.0) + y * w - m * softplus(w);
    }
    case FamilyKind::kGamma: {
      const double a = fam.psi;
      return (a - 1.0) * std::log(y) - std::lgamma(a) + y * w + a * std::log(-w);
    }
    case FamilyKind::kNegBinomial: {
      const double r = fam.psi;
      return std::lgamma(y + r) - std::lgamma(r) - std::lgamma(y + 1.0) + y * w + r * log1mexp(w);
    }
  }
  return kNegInf;
}

double sample_response(const FamilySpec& fam, double w, Rng& rng, int trials) {
  require_domain(fam, w);
  auto& eng = rng.engine();
  switch (fam.kind) {
    case FamilyKind::kGaussian: return w + std::sqrt(fam.psi) * rng.normal();
    case FamilyKind::kBernoulli: return rng.uniform() < logistic(w) ? 1.0 : 0.0;
    case FamilyKind::kPoisson: {
      std::poisson_distribution<long long> d(std::exp(w));
      return static_cast<double>(d(eng));
    }
    case FamilyKind::kBinomial: {
      std::binomial_distribution<int> d(effective_trials(fam, trials), logistic(w));
      return static_cast<double>(d(eng));
    }
    case FamilyKind::kGamma: {
      std::gamma_distribution<double> d(fam.psi, -1.0 / w);
      return d(eng);
    }
    case FamilyKind::kNegBinomial: {
      std::gamma_distribution<double> g(fam.psi, 1.0 / std::expm1(-w));
      const double lambda = g(eng);
      if (!(lambda > 0.0)) return 0.0;
      std::poisson_distribution<long long> d(lambda);
      return static_cast<double>(d(eng));
    }
  }
  return 0.0;
}

void validate_response(const FamilySpec& fam, double y, int trials) {
  if (std::isnan(y)) return;
  const auto fail = [&](const char* what) {
    throw DataError(std::string(family_name(fam.kind)) + " response " + std::to_string(y) + " " + what);
  };
  switch (fam.kind) {
    case FamilyKind::kGaussian:
      if (!std::isfinite(y)) fail("is not finite");
      break;
    case FamilyKind::kBernoulli:
      if (y != 0.0 && y != 1.0) fail("is not 0 or 1");
      break;
    case FamilyKind::kPoisson:
    case FamilyKind::kNegBinomial:
      if (!is_integer(y) || y < 0.0) fail("is not a non-negative integer");
      break;
    case FamilyKind::kBinomial:
      if (!is_integer(y) || y < 0.0 || y > effective_trials(fam, trials)) fail("is not a count within the trials");
      break;
    case FamilyKind::kGamma:
      if (!std::isfinite(y) || !(y > 0.0)) fail("is not positive");
      break;
  }
}

double warm_start_latent(const FamilySpec& fam, double y, int trials) {
  const bool missing = std::isnan(y);
  switch (fam.kind) {
    case FamilyKind::kGaussian: return missing ? 0.0 : y;
    case FamilyKind::kBernoulli: {
      if (missing) return 0.0;
      const double p = (y + 0.5) / 2.0;
      return std::clamp(std::log(p / (1.0 - p)), -2.0, 2.0);
    }
    case FamilyKind::kBinomial: {
      if (missing) return 0.0;
      const double m = effective_trials(fam, trials);
      const double p = (y + 0.5) / (m + 1.0);
      return std::clamp(std::log(p / (1.0 - p)), -4.0, 4.0);
    }
    case FamilyKind::kPoisson: return std::log((missing ? 0.0 : y) + 0.5);
    case FamilyKind::kGamma: return missing ? -fam.psi : std::clamp(-fam.psi / y, -1e3, -1e-3);
    case FamilyKind::kNegBinomial: {
      const double mu = (missing ? 0.0 : y) + 0.5;
      return std::log(mu / (mu + fam.psi));
    }
  }
  return 0.0;
}

int ResponseModel::trials_at(Eigen::Index i, Eigen::Index j) const {
  if (trials.size() == 0) return families[static_cast<std::size_t>(j)].trials;
  return trials(i, j);
}

Eigen::MatrixXd ResponseModel::pointwise(const Eigen::MatrixXd& y, const Eigen::MatrixXd& w) const {
  if (y.rows() != w.rows() || y.cols() != q() || w.cols() != q())
    throw ConfigError("response and latent matrices do not conform");
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < q(); ++j)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      out(i, j) = mtvgp::log_likelihood(families[static_cast<std::size_t>(j)], y(i, j), w(i, j), trials_at(i, j));
  return out;
}

double ResponseModel::log_likelihood(const Eigen::MatrixXd& y, const Eigen::MatrixXd& w) const {
  if (y.rows() != w.rows() || y.cols() != q() || w.cols() != q())
    throw ConfigError("response and latent matrices do not conform");
  double s = 0.0;
  for (Eigen::Index j = 0; j < q(); ++j) {
    const FamilySpec& fam = families[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      s += mtvgp::log_likelihood(fam, y(i, j), w(i, j), trials_at(i, j));
      if (s == kNegInf) return s;
    }
  }
  return s;
}

Eigen::MatrixXd ResponseModel::sample(const Eigen::MatrixXd& w, Rng& rng) const {
  Eigen::MatrixXd out(w.rows(), w.cols());
  for (Eigen::Index j = 0; j < q(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      out(i, j) = sample_response(families[static_cast<std::size_t>(j)], w(i, j), rng, trials_at(i, j));
  return out;
}

Eigen::MatrixXd ResponseModel::mean(const Eigen::MatrixXd& w) const {
  Eigen::MatrixXd out(w.rows(), w.cols());
  for (Eigen::Index j = 0; j < q(); ++j)
    for (Eigen::Index i = 0; i < w.rows(); ++i)
      out(i, j) = inverse_link(families[static_cast<std::size_t>(j)], w(i, j), trials_at(i, j));
  return out;
}

Eigen::MatrixXd ResponseModel::warm_start(const Eigen::MatrixXd& y) const {
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (Eigen::Index j = 0; j < q(); ++j)
    for (Eigen::Index i = 0; i < y.rows(); ++i)
      out(i, j) = warm_start_latent(families[static_cast<std::size_t>(j)], y(i, j), trials_at(i, j));
  return out;
}

void ResponseModel::validate(const Eigen::MatrixXd& y) const {
  if (families.empty()) throw ConfigError("at least one response family is required");
  for (const auto& f : families) f.validate();
  if (y.cols() != q()) throw DataError("response column count does not match the number of families");
  if (trials.size() != 0 && (trials.rows() != y.rows() || trials.cols() != y.cols()))
    throw DataError("trial-count matrix does not match the responses");
  if (trials.size() != 0 && (trials.array() < 1).any()) throw DataError("trial counts must be at least 1");
  for (Eigen::Index j = 0; j < q(); ++j)
    for (Eigen::Index i = 0; i < y.rows(); ++i) {
      try {
        validate_response(families[static_cast<std::size_t>(j)], y(i, j), trials_at(i, j));
      } catch (const DataError& e) {
        throw DataError(std::string(e.what()) + " at row " + std::to_string(i) + ", column " + std::to_string(j));
      }
    }
}

bool ResponseModel::any_logit_linked() const noexcept {
  return std::any_of(families.begin(), families.end(), [](const FamilySpec& f) { return f.logit_linked(); });
}

}  // namespace mtvgp
