#pragma once

#include "bmd/dist.hpp"
#include "bmd/gibbs.hpp"
#include "bmd/matrix.hpp"

#include <optional>

namespace bmd {

enum class RmfModel { GGG, GGGM, GGGA, GGGW, GVG };

/// Priors for the real-valued samplers.
struct RmfHyper {
  /// Gaussian prior precisions; per-entry matrices override the scalars when set.
  double lambda_w = 0.1;
  double lambda_z = 0.1;
  std::optional<Mat> lambda_w_entries;
  std::optional<Mat> lambda_z_entries;
  double alpha_sigma = 1.0;
  double beta_sigma = 1.0;
  /// Gamma prior on the per-factor ARD precisions.
  double alpha_lambda = 1.0;
  double beta_lambda = 1.0;
  /// Current ARD precisions; sized K when used.
  Vec ard_lambda;
  /// NIW prior shared by rows of W and columns of Z; standard(K) when unset.
  std::optional<NiwParams> niw;
  /// Volume prior weight.
  double gamma = 1.0;

  double lw(Index m, Index k) const { return lambda_w_entries ? (*lambda_w_entries)(m, k) : lambda_w; }
  double lz(Index k, Index n) const { return lambda_z_entries ? (*lambda_z_entries)(k, n) : lambda_z; }
};

/// Conditional posterior of w_mk under independent Gaussian priors.
NormalPost ggg_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                           const RmfHyper &h);
double ggg_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                          const RmfHyper &h, Rng &rng);

/// Row posterior: returns (mean, precision) of w_m.
std::pair<Vec, Mat> gggm_w_row_posterior(Index m, const MaskedMatrix &A, const FactorState &S,
                                         const RmfHyper &h);
Vec gggm_sample_w_row(Index m, const MaskedMatrix &A, const FactorState &S, const RmfHyper &h,
                      Rng &rng);

/// Row posterior under a Gaussian prior N(mu, Sigma): returns (mean, precision).
std::pair<Vec, Mat> gaussian_row_posterior(const Vec &prior_mean, const Mat &prior_precision,
                                           const Mat &C, const Vec &targets, double sigma2);

InvGammaParams sigma2_posterior(const MaskedMatrix &A, const FactorState &S, const RmfHyper &h);
double sample_sigma2(const MaskedMatrix &A, const FactorState &S, const RmfHyper &h, Rng &rng);

GammaParams ggga_lambda_posterior(Index k, const FactorState &S, const RmfHyper &h);
double ggga_sample_lambda_k(Index k, const FactorState &S, const RmfHyper &h, Rng &rng);

/// NIW draw conditioned on the rows of `block` (each row is one D-vector).
std::pair<Vec, Mat> gggw_sample_hyper(const Mat &block, const NiwParams &prior, Rng &rng);

/// Determinant and adjugate of a small symmetric matrix.
std::pair<double, Mat> det_adjugate(const Mat &B);

/// Conditional posterior of w_mk under the volume prior exp(-(gamma/2) det(W'W)).
NormalPost gvg_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                           const RmfHyper &h);
double gvg_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                          const RmfHyper &h, Rng &rng);

GibbsTrace fit_rmf(RmfModel model, const MaskedMatrix &A, Index K, const RmfHyper &h,
                   const GibbsConfig &cfg);

} // namespace bmd
