#pragma once

#include "bmd/dist.hpp"
#include "bmd/matrix.hpp"

#include <vector>

namespace bmd {

enum class AlsMode { full, masked, gradient, sgd };

struct AlsConfig {
  Index K = 1;
  double lambda_w = 0.1;
  double lambda_z = 0.1;
  int max_iters = 100;
  double tol = 1e-9;
  AlsMode mode = AlsMode::masked;
  double eta_w = 0.01;
  double eta_z = 0.01;
  /// Adds a free row bias and a free column bias through fixed all-ones factor slots.
  bool bias = false;

  void validate() const;
};

struct NmfConfig {
  Index K = 1;
  double lambda_w = 0.0;
  double lambda_z = 0.0;
  double eps = 1e-9;
  int max_iters = 200;
  double tol = 1e-9;

  void validate() const;
};

/// Fitted factors with per-sweep histories; index 0 holds the initial value.
struct FitResult {
  FactorState state;
  /// Masked sum of squared errors.
  std::vector<double> loss;
  /// Loss plus the regularization terms.
  std::vector<double> objective;
  int sweeps = 0;
};

/// Regularized objective sum_Omega (a - wz)^2 + lambda_w |W|^2 + lambda_z |Z|^2.
double als_objective(const MaskedMatrix &A, const FactorState &S, double lambda_w, double lambda_z);

/// Alternating least squares. With bias=true, W has K+2 columns laid out as
/// [row bias | W | 1] and Z has K+2 rows laid out as [1; Z; column bias].
FitResult als_fit(const MaskedMatrix &A, const AlsConfig &cfg, Rng &rng);
/// Runs from a given starting state.
FitResult als_fit(const MaskedMatrix &A, const AlsConfig &cfg, FactorState init);

/// Gradients of (a - w'z)^2 + lambda_w |w|^2 + lambda_z |z|^2 with respect to w and z.
std::pair<Vec, Vec> sgd_gradients(const Vec &w, const Vec &z, double a, double lambda_w,
                                  double lambda_z);

/// One normalized-gradient step on entry (m, n); both gradients use the pre-step values.
void als_sgd_step(FactorState &S, double a_mn, Index m, Index n, const AlsConfig &cfg);

/// Multiplicative-update NMF; for each k updates row k of Z then column k of W.
FitResult nmf_mu_fit(const MaskedMatrix &A, const NmfConfig &cfg, Rng &rng);
FitResult nmf_mu_fit(const MaskedMatrix &A, const NmfConfig &cfg, FactorState init);

} // namespace bmd
