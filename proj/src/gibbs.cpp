#include "bmd/gibbs.hpp"

#include "bmd/errors.hpp"

namespace bmd {

void GibbsConfig::validate() const {
  if (iters < 0)
    throw ParameterError("iters must be nonnegative");
  if (thin < 1)
    throw ParameterError("thin must be at least 1");
  if (burn_in < 0 || (iters > 0 && burn_in >= iters))
    throw ParameterError("burn_in must be in [0, iters)");
}

FactorState GibbsTrace::posterior_mean() const {
  if (samples.empty())
    return state;
  const FactorState &first = samples.front();
  FactorState m;
  m.W = first.W;
  m.Z = first.Z;
  m.sigma2 = first.sigma2;
  Mat F;
  if (first.F)
    F = *first.F;
  for (std::size_t s = 1; s < samples.size(); ++s) {
    m.W += samples[s].W;
    m.Z += samples[s].Z;
    if (first.F)
      F += *samples[s].F;
    m.sigma2 += samples[s].sigma2;
  }
  double c = 1.0 / static_cast<double>(samples.size());
  m.W *= c;
  m.Z *= c;
  m.sigma2 *= c;
  if (first.F)
    m.F = F * c;
  return m;
}

double GibbsTrace::post_burn_in_mse() const {
  std::size_t start = static_cast<std::size_t>(config.burn_in);
  if (mse.size() <= start)
    throw ParameterError("no post-burn-in iterations");
  double s = 0.0;
  for (std::size_t i = start; i < mse.size(); ++i)
    s += mse[i];
  return s / static_cast<double>(mse.size() - start);
}

} // namespace bmd
