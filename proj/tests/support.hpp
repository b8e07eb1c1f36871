#pragma once

#include "bmd/dist.hpp"
#include "bmd/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <utility>
#include <vector>

namespace testing {

using bmd::Index;
using bmd::Mat;
using bmd::Mask;
using bmd::Rng;
using bmd::Vec;

inline Mat random_normal(Index r, Index c, Rng &rng, double sd = 1.0) {
  std::normal_distribution<double> nd(0.0, sd);
  Mat X(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      X(i, j) = nd(rng);
  return X;
}

inline Mat random_uniform(Index r, Index c, Rng &rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat X(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      X(i, j) = u(rng);
  return X;
}

/// Random mask with observation probability p; every row and column keeps at least one cell.
inline Mask random_mask(Index r, Index c, double p, Rng &rng) {
  std::bernoulli_distribution b(p);
  Mask m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j)
      m(i, j) = b(rng);
  for (Index i = 0; i < r; ++i)
    m(i, i % c) = true;
  for (Index j = 0; j < c; ++j)
    m(j % r, j) = true;
  return m;
}

/// Kolmogorov-Smirnov distance between a sample and a CDF.
inline double ks_distance(std::vector<double> xs, const std::function<double(double)> &cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double F = cdf(xs[i]);
    d = std::max({d, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
  }
  return d;
}

/// Simpson integral of f over [lo, hi] with n (odd) points.
inline double simpson(const std::function<double(double)> &f, double lo, double hi, int n = 2001) {
  const double h = (hi - lo) / (n - 1);
  double s = f(lo) + f(hi);
  for (int i = 1; i < n - 1; ++i)
    s += (i % 2 ? 4.0 : 2.0) * f(lo + i * h);
  return s * h / 3.0;
}

struct Moments {
  double mean;
  double var;
};

/// Mean and variance of the density proportional to exp(logf) on [lo, hi], normalized on an n-point grid.
inline Moments grid_moments(const std::function<double(double)> &logf, double lo, double hi, int n = 2001) {
  const double h = (hi - lo) / (n - 1);
  std::vector<double> lf(static_cast<std::size_t>(n));
  double mx = -INFINITY;
  for (int i = 0; i < n; ++i) {
    lf[static_cast<std::size_t>(i)] = logf(lo + i * h);
    mx = std::max(mx, lf[static_cast<std::size_t>(i)]);
  }
  double z = 0.0, m1 = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double wgt = (i == 0 || i == n - 1) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    double x = lo + i * h;
    double p = wgt * std::exp(lf[static_cast<std::size_t>(i)] - mx);
    z += p;
    m1 += p * x;
    m2 += p * x * x;
  }
  double mean = m1 / z;
  return {mean, m2 / z - mean * mean};
}

/// Closed-form mean and variance against a 2001-point grid over mean +- span sd.
/// Means are compared relatively, with an absolute floor far below the grid error.
inline bool grid_agrees(double mean, double var, const std::function<double(double)> &logf,
                        double lo_bound = -INFINITY, double span = 12.0, double tol = 1e-3) {
  double sd = std::sqrt(var);
  double lo = std::max(lo_bound, mean - span * sd);
  double hi = std::max(lo + sd, mean + span * sd);
  Moments g = grid_moments(logf, lo, hi);
  bool ok_mean = std::abs(g.mean - mean) <= tol * std::abs(g.mean) + 1e-8 * std::sqrt(g.var);
  bool ok_var = std::abs(g.var - var) <= tol * g.var;
  return ok_mean && ok_var;
}

inline double rel_err(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-12);
}

inline double normal_logpdf(double x, double mean, double var) {
  return -0.5 * (x - mean) * (x - mean) / var;
}

/// Unnormalized truncated-normal density.
inline double gtn_density(double x, const bmd::GtnParams &p) {
  if (x < p.a || x > p.b)
    return 0.0;
  return std::exp(-0.5 * p.tau * (x - p.mu) * (x - p.mu));
}

/// CDF from cumulative trapezoid integration of an unnormalized density on [lo, hi].
struct TabulatedCdf {
  double lo, hi, h;
  std::vector<double> F;

  TabulatedCdf(const std::function<double(double)> &pdf, double lo_, double hi_, int n = 200001)
      : lo(lo_), hi(hi_), h((hi_ - lo_) / (n - 1)), F(static_cast<std::size_t>(n), 0.0) {
    double prev = pdf(lo);
    for (int i = 1; i < n; ++i) {
      double cur = pdf(lo + i * h);
      F[static_cast<std::size_t>(i)] = F[static_cast<std::size_t>(i - 1)] + 0.5 * h * (prev + cur);
      prev = cur;
    }
    double total = F.back();
    for (double &v : F)
      v /= total;
  }
  double operator()(double x) const {
    if (x <= lo)
      return 0.0;
    if (x >= hi)
      return 1.0;
    double t = (x - lo) / h;
    auto i = static_cast<std::size_t>(t);
    if (i + 1 >= F.size())
      return 1.0;
    double f = t - static_cast<double>(i);
    return F[i] * (1 - f) + F[i + 1] * f;
  }
};

} // namespace testing
