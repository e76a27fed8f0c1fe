#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "mtvgp/random.hpp"

namespace mtvgp {

enum class FamilyKind { kGaussian, kBernoulli, kPoisson, kBinomial, kGamma, kNegBinomial };

/// Lowercase config name ("gaussian", "negbinomial", ...).
std::string_view family_name(FamilyKind kind) noexcept;
/// Throws ConfigError for unknown names.
FamilyKind parse_family(std::string_view name);

/// Response family with its known dispersion.
///
/// psi is the Gaussian variance, the Gamma shape or the negative-binomial
/// size; it is fixed at 1 for the other kinds. `trials` is the default
/// binomial trial count; datasets may override it per site.
struct FamilySpec {
  FamilyKind kind = FamilyKind::kGaussian;
  double psi = 1.0;
  int trials = 1;

  /// Throws ConfigError for psi <= 0 or trials < 1.
  void validate() const;
  /// Logit-linked kinds carry a non-identified latent scale.
  bool logit_linked() const noexcept { return kind == FamilyKind::kBernoulli || kind == FamilyKind::kBinomial; }
};

/// Whether w lies in the natural-parameter domain (w < 0 for Gamma and
/// negative binomial, all finite reals otherwise).
bool in_domain(const FamilySpec& fam, double w) noexcept;

/// Cumulant b(w) and its first two derivatives. Throws DomainError outside
/// the natural domain.
double cumulant(const FamilySpec& fam, double w);
double cumulant_d1(const FamilySpec& fam, double w);
double cumulant_d2(const FamilySpec& fam, double w);

/// Conditional mean of the response given w; trials <= 0 means fam.trials.
double inverse_link(const FamilySpec& fam, double w, int trials = 0);

/// log f(y | w). A NaN y is treated as missing and contributes 0; w outside
/// the natural domain gives -infinity.
double log_likelihood(const FamilySpec& fam, double y, double w, int trials = 0);

/// Exact draw of the response given w.
double sample_response(const FamilySpec& fam, double w, Rng& rng, int trials = 0);

/// Throws DataError when y (not NaN) lies outside the family support.
void validate_response(const FamilySpec& fam, double y, int trials = 0);

/// Link-transformed starting value for the latent field.
double warm_start_latent(const FamilySpec& fam, double y, int trials = 0);

/// Stable log(1 + e^w) and log(1 - e^w) (w < 0).
double softplus(double w) noexcept;
double log1mexp(double w) noexcept;

/// One family per response column plus optional per-site binomial trials.
struct ResponseModel {
  std::vector<FamilySpec> families;
  Eigen::MatrixXi trials;  // n x q, or empty to use the family defaults

  Eigen::Index q() const noexcept { return static_cast<Eigen::Index>(families.size()); }
  int trials_at(Eigen::Index i, Eigen::Index j) const;

  /// Sum of log_likelihood over every (i, j).
  double log_likelihood(const Eigen::MatrixXd& y, const Eigen::MatrixXd& w) const;
  /// Entry-wise log-likelihood matrix.
  Eigen::MatrixXd pointwise(const Eigen::MatrixXd& y, const Eigen::MatrixXd& w) const;
  Eigen::MatrixXd sample(const Eigen::MatrixXd& w, Rng& rng) const;
  Eigen::MatrixXd mean(const Eigen::MatrixXd& w) const;
  Eigen::MatrixXd warm_start(const Eigen::MatrixXd& y) const;
  /// Validates every family and every observed response.
  void validate(const Eigen::MatrixXd& y) const;
  bool any_logit_linked() const noexcept;
};

}  // namespace mtvgp
