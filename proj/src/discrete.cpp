#include "bmd/discrete.hpp"

#include "bmd/errors.hpp"
#include "bmd/rmf.hpp"

#include <cmath>
#include <limits>

namespace bmd {

Allocations::Allocations(Index M, Index N, Index K)
    : M_(M), N_(N), K_(K), o_(static_cast<std::size_t>(M * N * K), 0) {}

std::int64_t Allocations::cell_total(Index m, Index n) const {
  std::int64_t s = 0;
  for (Index k = 0; k < K_; ++k)
    s += (*this)(m, n, k);
  return s;
}

std::vector<std::int64_t> paa_allocate(std::int64_t a_mn, const Vec &w_m, const Vec &z_n, Rng &rng) {
  if (a_mn < 0)
    throw ParameterError("counts must be nonnegative");
  if (w_m.size() != z_n.size() || w_m.size() == 0)
    throw DimensionError("factor vectors must share a positive length");
  std::vector<std::int64_t> out(static_cast<std::size_t>(w_m.size()), 0);
  if (a_mn == 0)
    return out;
  Vec p = w_m.cwiseProduct(z_n);
  if (!(p.sum() > 1e-300))
    throw DegenerateError("Poisson rate vanishes for a positive count");
  return sample_multinomial(a_mn, p, rng);
}

GammaParams paa_w_posterior(Index m, Index k, const MaskedMatrix &A, const Allocations &o,
                            const Mat &Z, double alpha, double rate_prior) {
  double shape = alpha, rate = rate_prior;
  for (Index j = 0; j < A.cols(); ++j)
    if (A.mask(m, j)) {
      shape += static_cast<double>(o(m, j, k));
      rate += Z(k, j);
    }
  return GammaParams{shape, rate};
}

double paa_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const Allocations &o,
                          const Mat &Z, const PoissonHyper &h, Rng &rng) {
  return sample_gamma(paa_w_posterior(m, k, A, o, Z, h.alpha, h.beta), rng);
}

GammaParams paaa_lambda_posterior(Index m, const Mat &W, const PoissonHyper &h) {
  double K = static_cast<double>(W.cols());
  return GammaParams{K * h.alpha + h.a, h.a / h.b + W.row(m).sum()};
}

double paaa_sample_lambda_m(Index m, const Mat &W, const PoissonHyper &h, Rng &rng) {
  return sample_gamma(paaa_lambda_posterior(m, W, h), rng);
}

namespace {

double positive(double v) { return v > 0.0 ? v : std::numeric_limits<double>::min(); }

void check_counts(const MaskedMatrix &A) {
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      if (A.mask(i, j)) {
        double v = A.values(i, j);
        if (!(v >= 0.0) || v != std::floor(v))
          throw InputError("Poisson models need nonnegative integer counts");
      }
}

} // namespace

PoissonChain::PoissonChain(const MaskedMatrix &A, Index K, const PoissonHyper &h, bool hierarchical,
                           std::uint64_t seed)
    : A_(A), h_(h), hier_(hierarchical), rng_(seed), o_(A.rows(), A.cols(), K) {
  if (K < 1)
    throw ParameterError("K must be at least 1");
  if (!(h.alpha > 0.0 && h.beta > 0.0 && h.a > 0.0 && h.b > 0.0))
    throw ParameterError("Poisson hyperparameters must be positive");
  check_counts(A);
  Index M = A.rows(), N = A.cols();
  lambda_w_ = Vec::Constant(M, hier_ ? h.b : h.beta);
  lambda_z_ = Vec::Constant(N, hier_ ? h.b : h.beta);
  S_.W.resize(M, K);
  S_.Z.resize(K, N);
  for (Index m = 0; m < M; ++m)
    for (Index k = 0; k < K; ++k)
      S_.W(m, k) = positive(sample_gamma(h.alpha, lambda_w_(m), rng_));
  for (Index k = 0; k < K; ++k)
    for (Index n = 0; n < N; ++n)
      S_.Z(k, n) = positive(sample_gamma(h.alpha, lambda_z_(n), rng_));
  S_.sigma2 = 1.0;
}

void PoissonChain::allocate_all() {
  Index K = S_.K();
  for (Index m = 0; m < A_.rows(); ++m)
    for (Index n = 0; n < A_.cols(); ++n) {
      if (!A_.mask(m, n))
        continue;
      auto a = static_cast<std::int64_t>(std::llround(A_.values(m, n)));
      Vec w = S_.W.row(m).transpose();
      Vec z = S_.Z.col(n);
      int tries = 0;
      while (a > 0 && !(w.dot(z) > 1e-300)) {
        if (++tries > 100)
          throw DegenerateError("Poisson rate stays zero after prior redraws");
        ++guard_events_;
        for (Index k = 0; k < K; ++k) {
          S_.W(m, k) = positive(sample_gamma(h_.alpha, lambda_w_(m), rng_));
          S_.Z(k, n) = positive(sample_gamma(h_.alpha, lambda_z_(n), rng_));
        }
        w = S_.W.row(m).transpose();
        z = S_.Z.col(n);
      }
      auto alloc = paa_allocate(a, w, z, rng_);
      for (Index k = 0; k < K; ++k)
        o_(m, n, k) = alloc[static_cast<std::size_t>(k)];
    }
}

void PoissonChain::iterate() {
  allocate_all();
  Index M = A_.rows(), N = A_.cols(), K = S_.K();
  for (Index k = 0; k < K; ++k) {
    for (Index m = 0; m < M; ++m) {
      GammaParams p = paa_w_posterior(m, k, A_, o_, S_.Z, h_.alpha, lambda_w_(m));
      S_.W(m, k) = positive(sample_gamma(p, rng_));
      if (hier_)
        lambda_w_(m) = sample_gamma(paaa_lambda_posterior(m, S_.W, h_), rng_);
    }
    for (Index n = 0; n < N; ++n) {
      double shape = h_.alpha, rate = lambda_z_(n);
      for (Index i = 0; i < M; ++i)
        if (A_.mask(i, n)) {
          shape += static_cast<double>(o_(i, n, k));
          rate += S_.W(i, k);
        }
      S_.Z(k, n) = positive(sample_gamma(shape, rate, rng_));
      if (hier_) {
        double colsum = S_.Z.col(n).sum();
        lambda_z_(n) = sample_gamma(static_cast<double>(K) * h_.alpha + h_.a, h_.a / h_.b + colsum, rng_);
      }
    }
  }
}

namespace {

GibbsTrace run_poisson(const MaskedMatrix &A, Index K, const PoissonHyper &h, const GibbsConfig &cfg,
                       bool hier) {
  cfg.validate();
  PoissonChain ch(A, K, h, hier, cfg.seed);
  GibbsTrace tr;
  tr.config = cfg;
  for (int t = 1; t <= cfg.iters; ++t) {
    ch.iterate();
    tr.mse.push_back(masked_mse(A, ch.state()));
    if (cfg.keep(t)) {
      tr.samples.push_back(ch.state());
      if (hier) {
        Vec both(A.rows() + A.cols());
        both << ch.row_rates(), ch.col_rates();
        tr.lambda_samples.push_back(both);
      }
    }
    if (cfg.on_iteration)
      cfg.on_iteration(t, ch.state());
  }
  tr.state = ch.state();
  return tr;
}

} // namespace

GibbsTrace fit_paa(const MaskedMatrix &A, Index K, const PoissonHyper &h, const GibbsConfig &cfg) {
  return run_poisson(A, K, h, cfg, false);
}

GibbsTrace fit_paaa(const MaskedMatrix &A, Index K, const PoissonHyper &h, const GibbsConfig &cfg) {
  return run_poisson(A, K, h, cfg, true);
}

void OrdinalSpec::validate() const {
  Index n = boundaries.size();
  if (n < 3)
    throw ParameterError("ordinal model needs at least two categories");
  if (boundaries(0) != -kInf || boundaries(n - 1) != kInf)
    throw ParameterError("outer boundaries must be -inf and +inf");
  for (Index i = 1; i < n; ++i)
    if (!(boundaries(i) > boundaries(i - 1)))
      throw ParameterError("boundaries must be strictly increasing");
}

OrdinalSpec OrdinalSpec::integer_scale(int A) {
  if (A < 2)
    throw ParameterError("ordinal model needs at least two categories");
  OrdinalSpec s;
  s.boundaries.resize(A + 1);
  s.boundaries(0) = -kInf;
  for (int a = 1; a < A; ++a)
    s.boundaries(a) = a + 0.5;
  s.boundaries(A) = kInf;
  return s;
}

double ordinal_prob(int a, double h, const OrdinalSpec &spec) {
  if (a < 1 || a > spec.categories())
    throw ParameterError("category out of range");
  double lo = spec.boundaries(a - 1), hi = spec.boundaries(a);
  return norm_cdf(h - lo) - norm_cdf(h - hi);
}

std::pair<double, double> oggw_sample_latents(int a, double wz, double tau, const OrdinalSpec &spec,
                                              Rng &rng) {
  if (a < 1 || a > spec.categories())
    throw ParameterError("category out of range");
  if (!(tau > 0.0))
    throw ParameterError("tau must be positive");
  GtnParams g{wz, 1.0 / (1.0 + 1.0 / tau), spec.boundaries(a - 1), spec.boundaries(a)};
  double f = sample_gtn(g, rng);
  double h = sample_normal((f + tau * wz) / (1.0 + tau), 1.0 / (1.0 + tau), rng);
  return {f, h};
}

double oggw_expected_category(double wz, double tau, const OrdinalSpec &spec) {
  double s = std::sqrt(1.0 + 1.0 / tau);
  double e = 0.0;
  for (int a = 1; a <= spec.categories(); ++a)
    e += norm_cdf((wz - spec.boundaries(a - 1)) / s);
  return e;
}

double oggw_expected_category(const Vec &w_m, const Vec &z_n, double tau, const OrdinalSpec &spec) {
  return oggw_expected_category(w_m.dot(z_n), tau, spec);
}

double oggw_score(Index m, Index n, const std::vector<FactorState> &samples, const OrdinalSpec &spec) {
  if (samples.size() < 2)
    throw ParameterError("score needs at least two samples");
  std::vector<double> e;
  for (const auto &s : samples)
    e.push_back(oggw_expected_category(s.W.row(m).transpose(), s.Z.col(n), 1.0 / s.sigma2, spec));
  double mean = 0.0;
  for (double v : e)
    mean += v;
  mean /= static_cast<double>(e.size());
  double var = 0.0;
  for (double v : e)
    var += (v - mean) * (v - mean);
  var /= static_cast<double>(e.size() - 1);
  if (!(var > 0.0))
    throw DegenerateError("score undefined for zero posterior spread");
  return mean / std::sqrt(var);
}

Mat oggw_predict(const FactorState &S, const OrdinalSpec &spec) {
  Mat P = S.W * S.Z;
  double tau = 1.0 / S.sigma2;
  for (Index i = 0; i < P.size(); ++i)
    P.data()[i] = oggw_expected_category(P.data()[i], tau, spec);
  return P;
}

namespace {

struct OrdinalChain {
  const MaskedMatrix &A;
  OrdinalHyper h;
  NiwParams niw;
  Rng rng;
  Index M, N, K;
  FactorState S;
  Mat H;
  double tau = 1.0;
  Vec mu_w, mu_z;
  Mat prec_w, prec_z;
  std::vector<std::vector<Index>> row_obs, col_obs;
  std::vector<int> cat;

  OrdinalChain(const MaskedMatrix &a, Index k, const OrdinalHyper &hy, std::uint64_t seed)
      : A(a), h(hy), rng(seed), M(a.rows()), N(a.cols()), K(k) {
    h.spec.validate();
    niw = h.niw ? *h.niw : NiwParams::standard(K);
    niw.validate();
    if (niw.dim() != K)
      throw DimensionError("NIW prior dimension must equal K");
    row_obs.resize(static_cast<std::size_t>(M));
    col_obs.resize(static_cast<std::size_t>(N));
    cat.assign(static_cast<std::size_t>(M * N), 0);
    for (Index i = 0; i < M; ++i)
      for (Index j = 0; j < N; ++j)
        if (A.mask(i, j)) {
          double v = A.values(i, j);
          if (v != std::floor(v) || v < 1 || v > h.spec.categories())
            throw InputError("ordinal data must be categories 1..A");
          cat[static_cast<std::size_t>(i * N + j)] = static_cast<int>(v);
          row_obs[static_cast<std::size_t>(i)].push_back(j);
          col_obs[static_cast<std::size_t>(j)].push_back(i);
        }
    std::normal_distribution<double> nd(0.0, 1.0);
    S.W.resize(M, K);
    S.Z.resize(K, N);
    for (Index i = 0; i < S.W.size(); ++i)
      S.W.data()[i] = nd(rng);
    for (Index i = 0; i < S.Z.size(); ++i)
      S.Z.data()[i] = nd(rng);
    H = S.W * S.Z;
    mu_w = mu_z = Vec::Zero(K);
    prec_w = prec_z = Mat::Identity(K, K);
    S.sigma2 = 1.0 / tau;
  }

  void resample_h(Index m, Index n) {
    int a = cat[static_cast<std::size_t>(m * N + n)];
    H(m, n) = oggw_sample_latents(a, S.W.row(m).dot(S.Z.col(n)), tau, h.spec, rng).second;
  }

  void iterate() {
    for (Index m = 0; m < M; ++m) {
      const auto &obs = row_obs[static_cast<std::size_t>(m)];
      Mat C(K, static_cast<Index>(obs.size()));
      Vec t(static_cast<Index>(obs.size()));
      for (std::size_t i = 0; i < obs.size(); ++i) {
        C.col(static_cast<Index>(i)) = S.Z.col(obs[i]);
        t(static_cast<Index>(i)) = H(m, obs[i]);
      }
      auto [mean, prec] = gaussian_row_posterior(mu_w, prec_w, C, t, 1.0 / tau);
      S.W.row(m) = sample_mvn_precision(mean, prec, rng).transpose();
      for (Index n : obs)
        resample_h(m, n);
    }
    for (Index n = 0; n < N; ++n) {
      const auto &obs = col_obs[static_cast<std::size_t>(n)];
      Mat C(K, static_cast<Index>(obs.size()));
      Vec t(static_cast<Index>(obs.size()));
      for (std::size_t i = 0; i < obs.size(); ++i) {
        C.col(static_cast<Index>(i)) = S.W.row(obs[i]).transpose();
        t(static_cast<Index>(i)) = H(obs[i], n);
      }
      auto [mean, prec] = gaussian_row_posterior(mu_z, prec_z, C, t, 1.0 / tau);
      S.Z.col(n) = sample_mvn_precision(mean, prec, rng);
      for (Index m : obs)
        resample_h(m, n);
    }
    double ss = 0.0, cnt = 0.0;
    for (Index m = 0; m < M; ++m)
      for (Index n : row_obs[static_cast<std::size_t>(m)]) {
        double r = H(m, n) - S.W.row(m).dot(S.Z.col(n));
        ss += r * r;
        cnt += 1.0;
      }
    tau = sample_gamma(0.5 * cnt + h.alpha_tau, 0.5 * ss + h.beta_tau, rng);
    S.sigma2 = 1.0 / tau;
    auto [mw, Sw] = gggw_sample_hyper(S.W, niw, rng);
    mu_w = mw;
    prec_w = Sw.inverse();
    prec_w = 0.5 * (prec_w + prec_w.transpose());
    auto [mz, Sz] = gggw_sample_hyper(S.Z.transpose(), niw, rng);
    mu_z = mz;
    prec_z = Sz.inverse();
    prec_z = 0.5 * (prec_z + prec_z.transpose());
  }
};

} // namespace

GibbsTrace fit_oggw(const MaskedMatrix &A, Index K, const OrdinalHyper &h, const GibbsConfig &cfg) {
  cfg.validate();
  if (K < 1)
    throw ParameterError("K must be at least 1");
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
  OrdinalChain ch(A, K, h, cfg.seed);
  GibbsTrace tr;
  tr.config = cfg;
  for (int t = 1; t <= cfg.iters; ++t) {
    ch.iterate();
    tr.mse.push_back(masked_mse(A, oggw_predict(ch.S, ch.h.spec)));
    if (cfg.keep(t))
      tr.samples.push_back(ch.S);
    if (cfg.on_iteration)
      cfg.on_iteration(t, ch.S);
  }
  tr.state = ch.S;
  return tr;
}

} // namespace bmd
