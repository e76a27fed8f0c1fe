#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "mtvgp/errors.hpp"
#include "mtvgp/kernels.hpp"

namespace mtvgp {

namespace {

constexpr double kEps = 1e-16;
constexpr int kMaxTerms = 10000;

// Taylor coefficients of 1/Gamma(z) about 0: 1/Gamma(z) = sum_k c[k] z^k.
constexpr double kRecipGamma[] = {
    0.0,
    1.0,
    0.57721566490153286061,
    -0.65587807152025388108,
    -0.042002635034095235529,
    0.1665386113822914895,
    -0.042197734555544336748,
    -0.0096219715278769735621,
    0.0072189432466630995424,
    -0.0011651675918590651121,
    -0.00021524167411495097282,
    0.00012805028238811618615,
    -0.000020134854780788238656,
    -1.2504934821426706573e-6,
    1.1330272319816958824e-6,
    -2.0563384169776071035e-7,
    6.1160951044814158179e-9,
    5.0020076444692229301e-9,
    -1.1812745704870201446e-9,
    1.0434267116911005105e-10,
    7.782263439905071254e-12,
    -3.6968056186422057082e-12,
    5.100370287454475979e-13,
    -2.0583260535665067832e-14,
    -5.3481225394230179824e-15,
    1.2267786282382607902e-15,
    -1.1812593016974587695e-16,
    1.1866922547516003326e-18,
    1.4123806553180317816e-18,
};
constexpr int kRecipGammaTerms = sizeof(kRecipGamma) / sizeof(double);

struct TemmeGammas {
  double gam1;  // (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
  double gam2;  // (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
  double gampl;  // 1/Gamma(1+mu)
  double gammi;  // 1/Gamma(1-mu)
};

// |mu| <= 1/2. 1/Gamma(1+mu) = sum_{k>=1} c[k] mu^{k-1}; the odd/even split
// gives gam1 and gam2 without cancellation at small mu.
TemmeGammas temme_gammas(double mu) {
  double gam1 = 0.0;
  double gam2 = 0.0;
  for (int k = kRecipGammaTerms - 1; k >= 1; --k) {
    if (k % 2 == 0) {
      gam1 = gam1 * mu * mu + kRecipGamma[k];
    } else {
      gam2 = gam2 * mu * mu + kRecipGamma[k];
    }
  }
  gam1 = -gam1;
  return {gam1, gam2, gam2 - mu * gam1, gam2 + mu * gam1};
}

// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2, 0 < x < 2.
void temme_series(double mu, double x, double& k_mu, double& k_mu1) {
  const double x2 = 0.5 * x;
  const double pimu = std::numbers::pi * mu;
  const double fact = std::abs(pimu) < kEps ? 1.0 : pimu / std::sin(pimu);
  double d = -std::log(x2);
  double e = mu * d;
  const double fact2 = std::abs(e) < kEps ? 1.0 : std::sinh(e) / e;
  const auto g = temme_gammas(mu);
  double ff = fact * (g.gam1 * std::cosh(e) + g.gam2 * fact2 * d);
  double sum = ff;
  e = std::exp(e);
  double p = 0.5 * e / g.gampl;
  double q = 0.5 / (e * g.gammi);
  double c = 1.0;
  d = x2 * x2;
  double sum1 = p;
  for (int i = 1; i <= kMaxTerms; ++i) {
    const double fi = i;
    ff = (fi * ff + p + q) / (fi * fi - mu * mu);
    c *= d / fi;
    p /= fi - mu;
    q /= fi + mu;
    const double del = c * ff;
    sum += del;
    sum1 += c * (p - fi * ff);
    if (std::abs(del) < std::abs(sum) * kEps) break;
  }
  k_mu = sum;
  k_mu1 = sum1 * 2.0 / x;
}

// Steed's continued fraction (Thompson-Barnett form) for x >= 2.
void steed_fraction(double mu, double x, double& k_mu, double& k_mu1) {
  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu * mu;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 2; i <= kMaxTerms; ++i) {
    a -= 2.0 * (i - 1);
    c = -a * c / i;
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  h *= a1;
  k_mu = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x) / s;
  k_mu1 = k_mu * (mu + x + 0.5 - h) / x;
}

}  // namespace

double bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) throw DomainError("bessel_k requires x > 0, got " + std::to_string(x));
  if (!std::isfinite(nu)) throw DomainError("bessel_k requires a finite order");
  nu = std::abs(nu);
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  double k_mu = 0.0;
  double k_mu1 = 0.0;
  if (x < 2.0) {
    temme_series(mu, x, k_mu, k_mu1);
  } else {
    steed_fraction(mu, x, k_mu, k_mu1);
  }
  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * (2.0 / x) * k_mu1 + k_mu;
    k_mu = k_mu1;
    k_mu1 = next;
  }
  return k_mu;
}

}  // namespace mtvgp
