#pragma once

#include "bmd/matrix.hpp"

#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

namespace bmd {

using Rng = std::mt19937_64;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Standard normal density, CDF and quantile.
double norm_pdf(double x);
double norm_cdf(double x);
double norm_ppf(double p);

/// Normal distribution N(x | mu, 1/tau) truncated to [a, b].
struct GtnParams {
  double mu = 0.0;
  double tau = 1.0;
  double a = -kInf;
  double b = kInf;

  void validate() const;
};

/// Truncated normal on [0, inf) with parent mean mu and variance var.
GtnParams tn_params(double mu, double var);

double gtn_pdf(double x, const GtnParams &p);
double gtn_cdf(double x, const GtnParams &p);
std::pair<double, double> gtn_moments(const GtnParams &p);
double sample_gtn(const GtnParams &p, Rng &rng);

/// Rectified normal: N(x | mu, 1/tau) * Exp(x | lambda) restricted to x >= 0.
struct RnParams {
  double mu = 0.0;
  double tau = 1.0;
  double lambda = 1.0;
};

GtnParams rn_to_gtn(const RnParams &p);
/// Normalizing constant so that N(x|mu,1/tau) lambda exp(-lambda x) / C integrates to one on x >= 0.
double rn_normalizer(const RnParams &p);
double rn_pdf(double x, const RnParams &p);

struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

/// Inverse-Gamma with shape and scale.
struct InvGammaParams {
  double shape = 1.0;
  double scale = 1.0;
};

double sample_normal(double mean, double var, Rng &rng);
double sample_gamma(double shape, double rate, Rng &rng);
double sample_gamma(const GammaParams &p, Rng &rng);
double sample_inv_gamma(double shape, double scale, Rng &rng);
double sample_inv_gamma(const InvGammaParams &p, Rng &rng);
double sample_exponential(double rate, Rng &rng);
std::int64_t sample_poisson(double rate, Rng &rng);
std::int64_t sample_binomial(std::int64_t n, double p, Rng &rng);
Vec sample_dirichlet(const Vec &alpha, Rng &rng);
/// Sequential-binomial multinomial draw; components sum to n exactly.
std::vector<std::int64_t> sample_multinomial(std::int64_t n, const Vec &prob, Rng &rng);

/// Gaussian draw given mean and precision matrix.
Vec sample_mvn_precision(const Vec &mean, const Mat &precision, Rng &rng);
Vec sample_mvn_covariance(const Vec &mean, const Mat &cov, Rng &rng);

/// Wishart with scale M and nu degrees of freedom (mean nu*M).
Mat sample_wishart(const Mat &scale, double nu, Rng &rng);
/// Inverse-Wishart: inverse of a Wishart(S^-1, nu) draw.
Mat sample_inverse_wishart(const Mat &S, double nu, Rng &rng);

struct NiwParams {
  Vec m0;
  double kappa0 = 1.0;
  double nu0 = 2.0;
  Mat S0;

  Index dim() const { return m0.size(); }
  void validate() const;
  /// m0 = 0, kappa0 = 1, nu0 = D + 1, S0 = I.
  static NiwParams standard(Index D);
};

/// Sufficient statistics for NIW conjugate updates.
struct NiwStats {
  double n = 0.0;
  Vec sum;
  Mat outer;

  explicit NiwStats(Index D);
  void add(const Vec &x);
  void remove(const Vec &x);
};

NiwParams niw_posterior(const NiwParams &prior, const std::vector<Vec> &data);
NiwParams niw_posterior(const NiwParams &prior, const NiwStats &stats);
/// Returns (mean, covariance).
std::pair<Vec, Mat> sample_niw(const NiwParams &p, Rng &rng);

/// Gamma posterior on a precision from Gaussian residuals A - B over the observed set.
GammaParams gamma_precision_posterior(const GammaParams &prior, const MaskedMatrix &A, const Mat &B);
/// Inverse-Gamma posterior on a variance; same parameters as the precision form.
InvGammaParams inv_gamma_variance_posterior(const InvGammaParams &prior, const MaskedMatrix &A,
                                            const Mat &B);

} // namespace bmd
