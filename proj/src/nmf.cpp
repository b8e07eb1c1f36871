#include "bmd/nmf.hpp"

#include "bmd/errors.hpp"
#include "bmd/rmf.hpp"
#include "volume.hpp"
#include "work.hpp"

#include <cmath>

namespace bmd {

using detail::EntryStats;
using detail::Work;

namespace {

NormalPost gee_post(const EntryStats &s, double sigma2, double lambda) {
  if (!(s.scc > 0.0))
    throw DegenerateError("no observed information for this entry");
  double var = sigma2 / s.scc;
  return {var * (-lambda + s.scr / sigma2), var};
}

NormalPost gtt_post(const EntryStats &s, double sigma2, double mu, double tau) {
  double var = sigma2 / (s.scc + tau * sigma2);
  return {var * (s.scr / sigma2 + tau * mu), var};
}

NormalPost grr_post(const EntryStats &s, double sigma2, double mu, double tau, double lambda) {
  GtnParams g = rn_to_gtn(RnParams{mu, tau, lambda});
  return gtt_post(s, sigma2, g.mu, g.tau);
}

NormalPost gl_post(NormVariant v, const EntryStats &s, double sigma2, double lambda,
                   double sum_others, bool is_max) {
  double ind = is_max ? 1.0 : 0.0;
  switch (v) {
  case NormVariant::L12: {
    double var = sigma2 / (s.scc + sigma2 * lambda);
    return {var * (s.scr / sigma2 - lambda * sum_others), var};
  }
  case NormVariant::L22: {
    double var = sigma2 / (s.scc + sigma2 * lambda);
    return {var * s.scr / sigma2, var};
  }
  case NormVariant::Linf: {
    if (!(s.scc > 0.0))
      throw DegenerateError("no observed information for this entry");
    double var = sigma2 / s.scc;
    return {var * (s.scr / sigma2 - lambda * ind), var};
  }
  case NormVariant::L2inf2: {
    double var = sigma2 / (s.scc + sigma2 * lambda);
    return {var * (s.scr / sigma2 - lambda * ind), var};
  }
  }
  throw ParameterError("unknown norm variant");
}

NormVariant variant_of(NmfModel m) {
  switch (m) {
  case NmfModel::GL12:
    return NormVariant::L12;
  case NmfModel::GL22:
    return NormVariant::L22;
  case NmfModel::GLinf:
    return NormVariant::Linf;
  default:
    return NormVariant::L2inf2;
  }
}

} // namespace

double sample_tn(const NormalPost &p, Rng &rng) { return sample_gtn(tn_params(p.mean, p.var), rng); }

NormalPost gee_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                           double lambda) {
  detail::check_entry(A, S, m, k);
  Work wk(A, S.predict());
  return gee_post(wk.w_stats(m, k, S.W(m, k), S.Z), S.sigma2, lambda);
}

double gee_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                          double lambda, Rng &rng) {
  return sample_tn(gee_w_posterior(m, k, A, S, lambda), rng);
}

GammaParams geea_lambda_posterior(Index k, const FactorState &S, const NmfHyper &h) {
  if (k < 0 || k >= S.K())
    throw DimensionError("factor index out of range");
  double M = static_cast<double>(S.W.rows());
  double N = static_cast<double>(S.Z.cols());
  return GammaParams{M + N + h.alpha_lambda, S.W.col(k).sum() + S.Z.row(k).sum() + h.beta_lambda};
}

double geea_sample_lambda_k(Index k, const FactorState &S, const NmfHyper &h, Rng &rng) {
  return sample_gamma(geea_lambda_posterior(k, S, h), rng);
}

NormalPost gtt_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S, double mu,
                           double tau) {
  detail::check_entry(A, S, m, k);
  Work wk(A, S.predict());
  return gtt_post(wk.w_stats(m, k, S.W(m, k), S.Z), S.sigma2, mu, tau);
}

NormalPost gttn_mu_posterior(double w, double tau, double mu_mu, double tau_mu) {
  double t = tau + tau_mu;
  return {(tau * w + tau_mu * mu_mu) / t, 1.0 / t};
}

GammaParams gttn_tau_posterior(double w, double mu, double a, double b) {
  return GammaParams{a, b + 0.5 * (w - mu) * (w - mu)};
}

NormalPost grr_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S, double mu,
                           double tau, double lambda) {
  detail::check_entry(A, S, m, k);
  Work wk(A, S.predict());
  return grr_post(wk.w_stats(m, k, S.W(m, k), S.Z), S.sigma2, mu, tau, lambda);
}

GammaParams grrn_tau_posterior(double w, double mu, double a, double b) {
  return GammaParams{a + 0.5, b + 0.5 * (w - mu) * (w - mu)};
}

GammaParams grrn_lambda_posterior(double w, double alpha_lambda, double beta_lambda) {
  return GammaParams{alpha_lambda + 1.0, beta_lambda + w};
}

bool is_max_entry(const Eigen::Ref<const Vec> &v, Index k) {
  for (Index j = 0; j < v.size(); ++j) {
    if (j < k && v(j) >= v(k))
      return false;
    if (j > k && v(j) > v(k))
      return false;
  }
  return true;
}

NormalPost gl_w_posterior(NormVariant variant, Index m, Index k, const MaskedMatrix &A,
                          const FactorState &S, double lambda_k) {
  detail::check_entry(A, S, m, k);
  Work wk(A, S.predict());
  Vec row = S.W.row(m).transpose();
  return gl_post(variant, wk.w_stats(m, k, S.W(m, k), S.Z), S.sigma2, lambda_k, row.sum() - row(k),
                 is_max_entry(row, k));
}

NormalPost gnvg_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                            double gamma) {
  RmfHyper h;
  h.gamma = gamma;
  return gvg_w_posterior(m, k, A, S, h);
}

double geee_cross_term(Index i, Index j, Index k, Index l, const FactorState &S) {
  if (!S.F)
    throw DimensionError("tri-factorization state has no middle factor");
  const Mat &F = *S.F;
  double c = 0.0;
  for (Index kk = 0; kk < F.rows(); ++kk)
    for (Index ll = 0; ll < F.cols(); ++ll)
      if (kk != k || ll != l)
        c += S.W(i, kk) * F(kk, ll) * S.Z(ll, j);
  return c;
}

namespace {

NormalPost geee_f_post(const Work &wk, const FactorState &S, Index k, Index l, double lambda_f) {
  EntryStats s;
  double f = (*S.F)(k, l);
  const MaskedMatrix &A = wk.A();
  for (Index i = 0; i < A.rows(); ++i) {
    double wi = S.W(i, k);
    if (wi == 0.0)
      continue;
    for (Index j : wk.row_obs(i)) {
      double c = wi * S.Z(l, j);
      s.scc += c * c;
      s.scr += c * (wk.E(i, j) + c * f);
    }
  }
  if (!(s.scc > 0.0))
    throw DegenerateError("middle-factor entry has no information; re-randomize F");
  double var = S.sigma2 / s.scc;
  return {var * (-lambda_f + s.scr / S.sigma2), var};
}

} // namespace

NormalPost geee_f_posterior(Index k, Index l, const MaskedMatrix &A, const FactorState &S,
                            double lambda_f) {
  S.check_shapes(A.rows(), A.cols());
  if (!S.F)
    throw DimensionError("tri-factorization state has no middle factor");
  if (k < 0 || k >= S.F->rows() || l < 0 || l >= S.F->cols())
    throw DimensionError("entry index out of range");
  Work wk(A, S.predict());
  return geee_f_post(wk, S, k, l, lambda_f);
}

double geee_sample_f_entry(Index k, Index l, const MaskedMatrix &A, const FactorState &S,
                           double lambda_f, Rng &rng) {
  return sample_tn(geee_f_posterior(k, l, A, S, lambda_f), rng);
}

namespace {

struct NmfChain {
  NmfModel model;
  const MaskedMatrix &A;
  NmfHyper h;
  FactorState S;
  Work wk;
  Rng rng;
  Index M, N, K, L;
  Vec lambda_k;          // GEEA shared rates
  Mat mu_w, tau_w, lam_w; // per-entry hyper state (GTTN, GRRN)
  Mat mu_z, tau_z, lam_z;
  double beta_lambda_rn = 1.0;

  NmfChain(NmfModel md, const MaskedMatrix &a, Index k, const NmfHyper &hy, std::uint64_t seed)
      : model(md), A(a), h(hy), wk(a, Mat::Zero(a.rows(), a.cols())), rng(seed), M(a.rows()),
        N(a.cols()), K(k), L(hy.L > 0 ? hy.L : k) {
    S.W = detail::half_normal_matrix(M, K, rng);
    if (model == NmfModel::GEEE) {
      Mat F = Mat::Zero(K, L);
      std::uniform_real_distribution<double> ud(0.0, 1.0);
      for (Index i = 0; i < K; ++i)
        for (Index j = 0; j < L; ++j)
          F(i, j) = (i == j ? 1.0 : 0.0) + 0.1 * ud(rng);
      S.F = F;
      S.Z = detail::half_normal_matrix(L, N, rng);
    } else if (model == NmfModel::GEG || model == NmfModel::GnVG) {
      S.Z = detail::normal_matrix(K, N, rng);
    } else {
      S.Z = detail::half_normal_matrix(K, N, rng);
    }
    S.sigma2 = 1.0;
    wk.reset(S.predict());
    if (model == NmfModel::GEEA)
      lambda_k = Vec::Constant(K, h.alpha_lambda / h.beta_lambda);
    if (model == NmfModel::GTTN || model == NmfModel::GRRN) {
      mu_w = Mat::Constant(M, K, h.tn_mu);
      tau_w = Mat::Constant(M, K, h.tn_tau);
      mu_z = Mat::Constant(K, N, h.tn_mu);
      tau_z = Mat::Constant(K, N, h.tn_tau);
    }
    if (model == NmfModel::GRRN) {
      if (h.grrn_beta_lambda) {
        beta_lambda_rn = *h.grrn_beta_lambda;
      } else {
        double m0 = A.observed_mean();
        beta_lambda_rn = m0 > 0.0 ? std::sqrt(m0 / static_cast<double>(K)) : 1.0;
      }
      lam_w = Mat::Constant(M, K, h.rn_lambda);
      lam_z = Mat::Constant(K, N, h.rn_lambda);
    }
  }

  double draw_exp_family(const EntryStats &s, double lambda) {
    if (!(s.scc > 0.0))
      return sample_exponential(lambda, rng);
    return sample_tn(gee_post(s, S.sigma2, lambda), rng);
  }

  void set_w(Index m, Index k, double v) {
    wk.w_update(m, k, v - S.W(m, k), S.Z);
    S.W(m, k) = v;
  }

  void set_z(Index k, Index n, double v) {
    wk.z_update(k, n, v - S.Z(k, n), S.W);
    S.Z(k, n) = v;
  }

  EntryStats ws(Index m, Index k) const { return wk.w_stats(m, k, S.W(m, k), S.Z); }
  EntryStats zs(Index k, Index n) const { return wk.z_stats(k, n, S.Z(k, n), S.W); }

  void sweep_gee(bool shared_rates) {
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m)
        set_w(m, k, draw_exp_family(ws(m, k), shared_rates ? lambda_k(k) : h.lw(m, k)));
      for (Index n = 0; n < N; ++n)
        set_z(k, n, draw_exp_family(zs(k, n), shared_rates ? lambda_k(k) : h.lz(k, n)));
      if (shared_rates) {
        lambda_k(k) = geea_sample_lambda_k(k, S, h, rng);
      }
    }
  }

  void sweep_gtt() {
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m)
        set_w(m, k, sample_tn(gtt_post(ws(m, k), S.sigma2, h.tn_mu, h.tn_tau), rng));
      for (Index n = 0; n < N; ++n)
        set_z(k, n, sample_tn(gtt_post(zs(k, n), S.sigma2, h.tn_mu, h.tn_tau), rng));
    }
  }

  void sweep_grr() {
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m)
        set_w(m, k, sample_tn(grr_post(ws(m, k), S.sigma2, h.tn_mu, h.tn_tau, h.rn_lambda), rng));
      for (Index n = 0; n < N; ++n)
        set_z(k, n, sample_tn(grr_post(zs(k, n), S.sigma2, h.tn_mu, h.tn_tau, h.rn_lambda), rng));
    }
  }

  // Per-entry hyper update for one factor entry.
  void entry_hyper(double w, double &mu, double &tau, double *lam) {
    NormalPost pm = gttn_mu_posterior(w, tau, h.mu_mu, h.tau_mu);
    mu = sample_normal(pm.mean, pm.var, rng);
    GammaParams pt = lam ? grrn_tau_posterior(w, mu, h.a, h.b) : gttn_tau_posterior(w, mu, h.a, h.b);
    tau = sample_gamma(pt, rng);
    if (lam)
      *lam = sample_gamma(grrn_lambda_posterior(w, h.alpha_lambda, beta_lambda_rn), rng);
  }

  void sweep_hier(bool rn) {
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m) {
        NormalPost p = rn ? grr_post(ws(m, k), S.sigma2, mu_w(m, k), tau_w(m, k), lam_w(m, k))
                          : gtt_post(ws(m, k), S.sigma2, mu_w(m, k), tau_w(m, k));
        set_w(m, k, sample_tn(p, rng));
        entry_hyper(S.W(m, k), mu_w(m, k), tau_w(m, k), rn ? &lam_w(m, k) : nullptr);
      }
      for (Index n = 0; n < N; ++n) {
        NormalPost p = rn ? grr_post(zs(k, n), S.sigma2, mu_z(k, n), tau_z(k, n), lam_z(k, n))
                          : gtt_post(zs(k, n), S.sigma2, mu_z(k, n), tau_z(k, n));
        set_z(k, n, sample_tn(p, rng));
        entry_hyper(S.Z(k, n), mu_z(k, n), tau_z(k, n), rn ? &lam_z(k, n) : nullptr);
      }
    }
  }

  double gl_draw(NormVariant v, const EntryStats &s, double lambda, double others, bool is_max) {
    if (!(s.scc > 0.0) && v == NormVariant::Linf && is_max)
      return sample_exponential(lambda, rng);
    return sample_tn(gl_post(v, s, S.sigma2, lambda, others, is_max), rng);
  }

  void sweep_gl(NormVariant v) {
    for (Index k = 0; k < K; ++k) {
      double lam = h.nl(k);
      for (Index m = 0; m < M; ++m) {
        Vec row = S.W.row(m).transpose();
        set_w(m, k, gl_draw(v, ws(m, k), lam, row.sum() - row(k), is_max_entry(row, k)));
      }
      for (Index n = 0; n < N; ++n) {
        Vec col = S.Z.col(n);
        set_z(k, n, gl_draw(v, zs(k, n), lam, col.sum() - col(k), is_max_entry(col, k)));
      }
    }
  }

  void z_gaussian(Index k, Index n) {
    EntryStats s = zs(k, n);
    double var = 1.0 / (s.scc / S.sigma2 + h.lz(k, n));
    set_z(k, n, sample_normal(var * s.scr / S.sigma2, var, rng));
  }

  void sweep_geg() {
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m)
        set_w(m, k, draw_exp_family(ws(m, k), h.lw(m, k)));
      for (Index n = 0; n < N; ++n)
        z_gaussian(k, n);
    }
  }

  void sweep_gnvg() {
    for (Index k = 0; k < K; ++k) {
      detail::VolumeCache c = detail::volume_cache(S.W, k);
      for (Index m = 0; m < M; ++m) {
        double old = S.W(m, k);
        NormalPost p = detail::gvg_post(c, m, old, ws(m, k), S.sigma2, h.gamma);
        set_w(m, k, sample_tn(p, rng));
        c.g += c.Wk.row(m).transpose() * (S.W(m, k) - old);
      }
      for (Index n = 0; n < N; ++n)
        z_gaussian(k, n);
    }
  }

  void sweep_geee() {
    Mat &F = *S.F;
    Mat FZ = F * S.Z;
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m) {
        double old = S.W(m, k);
        double v = draw_exp_family(wk.w_stats(m, k, old, FZ), h.lw(m, k));
        wk.w_update(m, k, v - old, FZ);
        S.W(m, k) = v;
      }
      for (Index l = 0; l < L; ++l) {
        double old = F(k, l);
        double v = sample_tn(geee_f_post(wk, S, k, l, h.lambda_f), rng);
        double d = v - old;
        if (d != 0.0) {
          for (Index i = 0; i < M; ++i) {
            double wi = S.W(i, k);
            if (wi == 0.0)
              continue;
            for (Index j : wk.row_obs(i))
              wk.E(i, j) -= d * wi * S.Z(l, j);
          }
          FZ.row(k) += d * S.Z.row(l);
        }
        F(k, l) = v;
      }
    }
    Mat WF = S.W * F;
    for (Index l = 0; l < L; ++l)
      for (Index n = 0; n < N; ++n) {
        double old = S.Z(l, n);
        double v = draw_exp_family(wk.z_stats(l, n, old, WF), h.lz(l, n));
        wk.z_update(l, n, v - old, WF);
        S.Z(l, n) = v;
      }
  }

  void iterate() {
    wk.reset(S.predict());
    switch (model) {
    case NmfModel::GEE:
      sweep_gee(false);
      break;
    case NmfModel::GEEA:
      sweep_gee(true);
      break;
    case NmfModel::GTT:
      sweep_gtt();
      break;
    case NmfModel::GTTN:
      sweep_hier(false);
      break;
    case NmfModel::GRR:
      sweep_grr();
      break;
    case NmfModel::GRRN:
      sweep_hier(true);
      break;
    case NmfModel::GL12:
    case NmfModel::GL22:
    case NmfModel::GLinf:
    case NmfModel::GL2inf2:
      sweep_gl(variant_of(model));
      break;
    case NmfModel::GEG:
      sweep_geg();
      break;
    case NmfModel::GnVG:
      sweep_gnvg();
      break;
    case NmfModel::GEEE:
      sweep_geee();
      break;
    }
    S.sigma2 = detail::draw_sigma2(wk, h.alpha_sigma, h.beta_sigma, rng);
  }
};

} // namespace

GibbsTrace fit_nmf(NmfModel model, const MaskedMatrix &A, Index K, const NmfHyper &h,
                   const GibbsConfig &cfg) {
  cfg.validate();
  if (K < 1)
    throw ParameterError("K must be at least 1");
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
  NmfChain ch(model, A, K, h, cfg.seed);
  GibbsTrace tr;
  tr.config = cfg;
  for (int t = 1; t <= cfg.iters; ++t) {
    ch.iterate();
    ch.wk.reset(ch.S.predict());
    tr.mse.push_back(ch.wk.mse());
    if (cfg.keep(t)) {
      tr.samples.push_back(ch.S);
      if (model == NmfModel::GEEA)
        tr.lambda_samples.push_back(ch.lambda_k);
    }
    if (cfg.on_iteration)
      cfg.on_iteration(t, ch.S);
  }
  tr.state = ch.S;
  return tr;
}

} // namespace bmd
