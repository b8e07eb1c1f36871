#pragma once

#include "bmd/dist.hpp"
#include "bmd/matrix.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace bmd {

struct GibbsConfig {
  int iters = 500;
  int burn_in = 250;
  int thin = 1;
  std::uint64_t seed = 0;
  /// Called after every iteration with the 1-based iteration number and current factors.
  std::function<void(int, const FactorState &)> on_iteration;

  void validate() const;
  /// True when the 1-based iteration t is retained.
  bool keep(int t) const { return t > burn_in && (t - burn_in) % thin == 0; }
};

/// Posterior mean and variance of a scalar Gaussian or truncated-Gaussian parent.
struct NormalPost {
  double mean = 0.0;
  double var = 1.0;
};

struct GibbsTrace {
  GibbsConfig config;
  /// Masked MSE after each iteration.
  std::vector<double> mse;
  /// Thinned post-burn-in samples.
  std::vector<FactorState> samples;
  /// Per-factor hyperparameter samples aligned with `samples` (ARD rates), empty when unused.
  std::vector<Vec> lambda_samples;
  FactorState state;

  /// Mean of the retained samples, or the final state when none were kept.
  FactorState posterior_mean() const;
  /// Mean MSE over post-burn-in iterations.
  double post_burn_in_mse() const;
};

} // namespace bmd
