#pragma once

#include "bmd/dist.hpp"
#include "bmd/gibbs.hpp"
#include "bmd/matrix.hpp"

#include <optional>
#include <vector>

namespace bmd {

/// A ~= C * W with C = A[:, J] and W[:, J] = I.
struct ColumnId {
  Mat C;
  Mat W;
  std::vector<Index> J;
};

/// A ~= W * R with R = A[I, :] and W[I, :] = I.
struct RowId {
  Mat W;
  Mat R;
  std::vector<Index> I;
};

/// Number of singular values above rel_tol * sigma_max.
Index numerical_rank(const Mat &A, double rel_tol = 1e-8);

/// Exact column ID by exhaustive determinant maximization over R-subsets.
ColumnId exact_column_id(const Mat &A, Index R);
RowId exact_row_id(const Mat &A, Index R);

/// E with e_kl = det(Ctil with column k replaced by Mblk column l) / det(Ctil).
Mat cramer_expansion(const Mat &Ctil, const Mat &Mblk);

/// |A - C U^-1 R|_F / |A|_F with C = A[:, J], R = A[I, :], U = A[I, J].
double skeleton_check(const Mat &A, const std::vector<Index> &I, const std::vector<Index> &J);

enum class IdVariant { GBT, GBTN, GBT_ARD, GBTN_ARD, GBT_aggressive, IID };

struct IdHyper {
  /// Support of every y_kl.
  double a = -1.0;
  double b = 1.0;
  double alpha_sigma = 0.1;
  double beta_sigma = 1.0;
  /// Parent mean and precision of y_kl (initial values for GBTN).
  double mu = 0.0;
  double tau = 1.0;
  /// Hyperprior on (mu_kl, tau_kl) for GBTN.
  double mu_mu = 0.0;
  double tau_mu = 0.1;
  double alpha_t = 1.0;
  double beta_t = 1.0;
  /// Inner Y sweeps per ARD iteration.
  int nu = 5;
  /// Prior probability that each column is selected; empty means 1/2 everywhere.
  Vec importance;

  void validate(Index N) const;
};

/// Logistic squashing of raw scores, clamped to [1e-6, 1 - 1e-6].
Vec importance_from_scores(const Vec &raw);

struct IdState {
  std::vector<char> r;
  Mat Y;
  Mat X;
  Mat mu;  // per-entry parent means of Y
  Mat tau; // per-entry parent precisions of Y
  double sigma2 = 1.0;

  std::vector<Index> J() const;
  std::vector<Index> I() const;
  /// Sets X[:, J] = A[:, J] (zero at unobserved cells) and X[:, I] = 0.
  void rebuild_x(const MaskedMatrix &A);
};

/// Fresh state with the given selection; Y drawn from its prior.
IdState make_id_state(const MaskedMatrix &A, const std::vector<char> &r, const IdHyper &h, Rng &rng);

/// Parent (mean, variance) of the truncated conditional of y_kl.
NormalPost gbt_y_posterior(Index k, Index l, const MaskedMatrix &A, const IdState &st);
double gbt_sample_y(Index k, Index l, const MaskedMatrix &A, const IdState &st, const IdHyper &h,
                    Rng &rng);

/// Log odds of swapping (r_j, r_i) = (1, 0) to (0, 1) versus keeping the state.
double swap_log_odds(const IdState &st, Index j, Index i, const MaskedMatrix &A, const IdHyper &h);
/// Swap move with a uniform selection prior; returns true when the swap happened.
bool gbt_swap_state(IdState &st, Index j, Index i, const MaskedMatrix &A, const IdHyper &h, Rng &rng);
/// Swap move with prior odds from the importance vector p.
bool iid_swap(IdState &st, Index j, Index i, const MaskedMatrix &A, const IdHyper &h, const Vec &p,
              Rng &rng);
/// Log odds of flipping r_j against keeping it.
double ard_log_odds(const IdState &st, Index j, const MaskedMatrix &A, const IdHyper &h);
bool ard_flip(IdState &st, Index j, const MaskedMatrix &A, const IdHyper &h, Rng &rng);

/// C = A[:, J], W = Y[J, :] with W[:, J] overwritten by the identity.
ColumnId post_process(const MaskedMatrix &A, const IdState &st);

enum class IdInit { random, all };

struct IdTrace {
  GibbsConfig config;
  std::vector<double> mse;
  /// Selected columns at each retained iteration.
  std::vector<std::vector<Index>> selections;
  /// Y at each retained iteration.
  std::vector<Mat> y_samples;
  IdState state;

  double post_burn_in_mse() const;
  /// Fraction of retained iterations in which column j was selected.
  double selection_frequency(Index j) const;
  /// Most frequent |J| among retained iterations (smallest on ties).
  Index modal_rank() const;
};

/// K is the fixed number of selected columns for non-ARD variants and is ignored by ARD.
IdTrace fit_id(IdVariant variant, const MaskedMatrix &A, Index K, const IdHyper &h,
               const GibbsConfig &cfg, IdInit init = IdInit::random);

} // namespace bmd
