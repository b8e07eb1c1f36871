#pragma once

#include "bmd/dist.hpp"
#include "bmd/gibbs.hpp"
#include "bmd/matrix.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace bmd {

struct PoissonHyper {
  /// Gamma shape and rate for W and Z.
  double alpha = 1.0;
  double beta = 1.0;
  /// Hierarchical Gamma on per-row and per-column rates (PAAA).
  double a = 1.0;
  double b = 1.0;
};

/// Latent counts o_mnk with sum_k o_mnk = a_mn on observed cells.
class Allocations {
public:
  Allocations() = default;
  Allocations(Index M, Index N, Index K);

  std::int64_t &operator()(Index m, Index n, Index k) { return o_[offset(m, n, k)]; }
  std::int64_t operator()(Index m, Index n, Index k) const { return o_[offset(m, n, k)]; }
  std::int64_t cell_total(Index m, Index n) const;
  Index M() const { return M_; }
  Index N() const { return N_; }
  Index K() const { return K_; }

private:
  std::size_t offset(Index m, Index n, Index k) const {
    return static_cast<std::size_t>((m * N_ + n) * K_ + k);
  }
  Index M_ = 0, N_ = 0, K_ = 0;
  std::vector<std::int64_t> o_;
};

/// Multinomial split of a count with probabilities proportional to w_k z_k.
std::vector<std::int64_t> paa_allocate(std::int64_t a_mn, const Vec &w_m, const Vec &z_n, Rng &rng);

/// Gamma conditional of w_mk; `rate_prior` is beta (PAA) or the row rate (PAAA).
GammaParams paa_w_posterior(Index m, Index k, const MaskedMatrix &A, const Allocations &o,
                            const Mat &Z, double alpha, double rate_prior);
double paa_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const Allocations &o,
                          const Mat &Z, const PoissonHyper &h, Rng &rng);

GammaParams paaa_lambda_posterior(Index m, const Mat &W, const PoissonHyper &h);
double paaa_sample_lambda_m(Index m, const Mat &W, const PoissonHyper &h, Rng &rng);

/// Poisson factorization chain; exposes allocations between iterations.
class PoissonChain {
public:
  PoissonChain(const MaskedMatrix &A, Index K, const PoissonHyper &h, bool hierarchical,
               std::uint64_t seed);

  void iterate();
  const FactorState &state() const { return S_; }
  const Allocations &allocations() const { return o_; }
  const Vec &row_rates() const { return lambda_w_; }
  const Vec &col_rates() const { return lambda_z_; }
  /// Number of times a vanishing rate forced a prior redraw.
  int guard_events() const { return guard_events_; }

private:
  void allocate_all();
  const MaskedMatrix &A_;
  PoissonHyper h_;
  bool hier_;
  Rng rng_;
  FactorState S_;
  Allocations o_;
  Vec lambda_w_, lambda_z_;
  int guard_events_ = 0;
};

GibbsTrace fit_paa(const MaskedMatrix &A, Index K, const PoissonHyper &h, const GibbsConfig &cfg);
GibbsTrace fit_paaa(const MaskedMatrix &A, Index K, const PoissonHyper &h, const GibbsConfig &cfg);

/// Boundaries b_1 < ... < b_{A+1} with b_1 = -inf and b_{A+1} = +inf.
struct OrdinalSpec {
  Vec boundaries;

  int categories() const { return static_cast<int>(boundaries.size()) - 1; }
  void validate() const;
  /// (-inf, 1.5, 2.5, ..., A - 0.5, +inf).
  static OrdinalSpec integer_scale(int A);
};

/// P(category a | h) for a in 1..A.
double ordinal_prob(int a, double h, const OrdinalSpec &spec);

/// Draws (f, h) for an observed category given w'z and precision tau.
std::pair<double, double> oggw_sample_latents(int a, double wz, double tau, const OrdinalSpec &spec,
                                              Rng &rng);

double oggw_expected_category(const Vec &w_m, const Vec &z_n, double tau, const OrdinalSpec &spec);
double oggw_expected_category(double wz, double tau, const OrdinalSpec &spec);

/// Posterior mean over posterior standard deviation of the expected category of (m, n).
/// Each sample stores tau as 1 / sigma2.
double oggw_score(Index m, Index n, const std::vector<FactorState> &samples, const OrdinalSpec &spec);

struct OrdinalHyper {
  OrdinalSpec spec;
  std::optional<NiwParams> niw;
  double alpha_tau = 1.0;
  double beta_tau = 1.0;
};

/// Expected-category predictions for every cell.
Mat oggw_predict(const FactorState &S, const OrdinalSpec &spec);

/// The trace MSE compares observed categories with expected categories.
GibbsTrace fit_oggw(const MaskedMatrix &A, Index K, const OrdinalHyper &h, const GibbsConfig &cfg);

} // namespace bmd
