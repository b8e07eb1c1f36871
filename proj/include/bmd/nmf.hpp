#pragma once

#include "bmd/dist.hpp"
#include "bmd/gibbs.hpp"
#include "bmd/matrix.hpp"

#include <optional>

namespace bmd {

enum class NmfModel { GEE, GEEA, GTT, GTTN, GRR, GRRN, GL12, GL22, GLinf, GL2inf2, GEG, GnVG, GEEE };

enum class NormVariant { L12, L22, Linf, L2inf2 };

/// Priors for the nonnegative samplers.
struct NmfHyper {
  /// Exponential rates (GEE family, GEEE); Gaussian precision of Z for GEG and GnVG.
  double lambda_w = 0.1;
  double lambda_z = 0.1;
  std::optional<Mat> lambda_w_entries;
  std::optional<Mat> lambda_z_entries;
  /// Gamma prior on shared rates (GEEA) and on RN rates (GRRN).
  double alpha_lambda = 1.0;
  double beta_lambda = 1.0;
  /// GRRN rate prior; sqrt(observed mean / K) when unset.
  std::optional<double> grrn_beta_lambda;
  /// Truncated-normal prior parent mean and precision (GTT, GRR).
  double tn_mu = 0.0;
  double tn_tau = 0.1;
  /// RN rate (GRR).
  double rn_lambda = 0.1;
  /// Hyperprior for per-entry mean and precision (GTTN, GRRN).
  double mu_mu = 0.0;
  double tau_mu = 0.1;
  double a = 1.0;
  double b = 1.0;
  /// Norm-prior weights per factor; scalar fallback.
  double norm_lambda = 0.1;
  Vec norm_lambda_k;
  double alpha_sigma = 1.0;
  double beta_sigma = 1.0;
  /// Tri-factorization middle dimension (0 means K) and its exponential rate.
  Index L = 0;
  double lambda_f = 0.1;
  /// Volume prior weight (GnVG).
  double gamma = 1.0;

  double lw(Index m, Index k) const { return lambda_w_entries ? (*lambda_w_entries)(m, k) : lambda_w; }
  double lz(Index k, Index n) const { return lambda_z_entries ? (*lambda_z_entries)(k, n) : lambda_z; }
  double nl(Index k) const { return norm_lambda_k.size() > k ? norm_lambda_k(k) : norm_lambda; }
};

/// Draw from TN(mean, var) on [0, inf).
double sample_tn(const NormalPost &p, Rng &rng);

/// Parent parameters of the truncated-normal conditional of w_mk under an exponential prior.
/// Throws DegenerateError when row m carries no information about w_mk.
NormalPost gee_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                           double lambda);
double gee_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                          double lambda, Rng &rng);

GammaParams geea_lambda_posterior(Index k, const FactorState &S, const NmfHyper &h);
double geea_sample_lambda_k(Index k, const FactorState &S, const NmfHyper &h, Rng &rng);

/// Truncated-normal prior TN(mu, 1/tau) on w_mk.
NormalPost gtt_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S, double mu,
                           double tau);
NormalPost gttn_mu_posterior(double w, double tau, double mu_mu, double tau_mu);
GammaParams gttn_tau_posterior(double w, double mu, double a, double b);

/// Rectified-normal prior RN(mu, 1/tau, lambda) on w_mk.
NormalPost grr_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S, double mu,
                           double tau, double lambda);
GammaParams grrn_tau_posterior(double w, double mu, double a, double b);
GammaParams grrn_lambda_posterior(double w, double alpha_lambda, double beta_lambda);

/// True when entry k holds the maximum of v; ties go to the lowest index.
bool is_max_entry(const Eigen::Ref<const Vec> &v, Index k);

NormalPost gl_w_posterior(NormVariant variant, Index m, Index k, const MaskedMatrix &A,
                          const FactorState &S, double lambda_k);

/// Volume-prior conditional for w_mk, used truncated at zero.
NormalPost gnvg_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                            double gamma);

/// Sum over (k', l') != (k, l) of w_ik' f_k'l' z_l'j.
double geee_cross_term(Index i, Index j, Index k, Index l, const FactorState &S);
NormalPost geee_f_posterior(Index k, Index l, const MaskedMatrix &A, const FactorState &S,
                            double lambda_f);
double geee_sample_f_entry(Index k, Index l, const MaskedMatrix &A, const FactorState &S,
                           double lambda_f, Rng &rng);

GibbsTrace fit_nmf(NmfModel model, const MaskedMatrix &A, Index K, const NmfHyper &h,
                   const GibbsConfig &cfg);

} // namespace bmd
