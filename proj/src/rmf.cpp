#include "bmd/rmf.hpp"

#include "bmd/errors.hpp"
#include "volume.hpp"
#include "work.hpp"

#include <cmath>

namespace bmd {

using detail::EntryStats;
using detail::Work;
using detail::VolumeCache;
using detail::gvg_post;
using detail::volume_cache;

namespace {

NormalPost ggg_post(const EntryStats &s, double sigma2, double lambda) {
  double var = 1.0 / (s.scc / sigma2 + lambda);
  return {var * s.scr / sigma2, var};
}

Mat cofactor_adjugate(const Mat &B) {
  Index n = B.rows();
  Mat adj(n, n);
  if (n == 1) {
    adj(0, 0) = 1.0;
    return adj;
  }
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      Mat minor(n - 1, n - 1);
      for (Index r = 0, rr = 0; r < n; ++r) {
        if (r == j)
          continue;
        for (Index q = 0, qq = 0; q < n; ++q) {
          if (q == i)
            continue;
          minor(rr, qq++) = B(r, q);
        }
        ++rr;
      }
      adj(i, j) = (((i + j) % 2) ? -1.0 : 1.0) * minor.determinant();
    }
  return adj;
}

void check_common(const MaskedMatrix &A, Index K) {
  if (K < 1)
    throw ParameterError("K must be at least 1");
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
}

} // namespace

std::pair<double, Mat> det_adjugate(const Mat &B) {
  Index n = B.rows();
  if (B.cols() != n)
    throw DimensionError("adjugate needs a square matrix");
  if (n == 0)
    return {1.0, Mat(0, 0)};
  Eigen::FullPivLU<Mat> lu(B);
  double det = lu.determinant();
  double scale = std::pow(std::max(1e-300, B.cwiseAbs().maxCoeff()), static_cast<double>(n));
  if (std::abs(det) > 1e-12 * scale)
    return {det, det * lu.inverse()};
  if (n <= 3)
    return {det, cofactor_adjugate(B)};
  throw DegenerateError("volume block is singular and too large for cofactor expansion");
}

NormalPost ggg_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                           const RmfHyper &h) {
  detail::check_entry(A, S, m, k);
  Work wk(A, S.predict());
  return ggg_post(wk.w_stats(m, k, S.W(m, k), S.Z), S.sigma2, h.lw(m, k));
}

double ggg_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                          const RmfHyper &h, Rng &rng) {
  NormalPost p = ggg_w_posterior(m, k, A, S, h);
  return sample_normal(p.mean, p.var, rng);
}

std::pair<Vec, Mat> gaussian_row_posterior(const Vec &prior_mean, const Mat &prior_precision,
                                           const Mat &C, const Vec &targets, double sigma2) {
  Mat prec = prior_precision + (C * C.transpose()) / sigma2;
  Vec rhs = prior_precision * prior_mean + (C * targets) / sigma2;
  Eigen::LLT<Mat> llt(prec);
  if (llt.info() != Eigen::Success)
    throw LinearSolveError("row posterior precision is not positive definite");
  return {llt.solve(rhs), prec};
}

namespace {

// Observed coefficient columns and targets for row m of W.
std::pair<Mat, Vec> row_system(const Work &wk, Index m, const Mat &Z) {
  const auto &obs = wk.row_obs(m);
  Mat C(Z.rows(), static_cast<Index>(obs.size()));
  Vec t(static_cast<Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    C.col(static_cast<Index>(i)) = Z.col(obs[i]);
    t(static_cast<Index>(i)) = wk.A().values(m, obs[i]);
  }
  return {C, t};
}

std::pair<Mat, Vec> col_system(const Work &wk, Index n, const Mat &W) {
  const auto &obs = wk.col_obs(n);
  Mat C(W.cols(), static_cast<Index>(obs.size()));
  Vec t(static_cast<Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    C.col(static_cast<Index>(i)) = W.row(obs[i]).transpose();
    t(static_cast<Index>(i)) = wk.A().values(obs[i], n);
  }
  return {C, t};
}

void refresh_row(Work &wk, Index m, const Mat &W, const Mat &Z) {
  for (Index j : wk.row_obs(m))
    wk.E(m, j) = wk.A().values(m, j) - W.row(m).dot(Z.col(j));
}

void refresh_col(Work &wk, Index n, const Mat &W, const Mat &Z) {
  for (Index i : wk.col_obs(n))
    wk.E(i, n) = wk.A().values(i, n) - W.row(i).dot(Z.col(n));
}

} // namespace

std::pair<Vec, Mat> gggm_w_row_posterior(Index m, const MaskedMatrix &A, const FactorState &S,
                                         const RmfHyper &h) {
  detail::check_entry(A, S, m, 0);
  Work wk(A, S.predict());
  auto [C, t] = row_system(wk, m, S.Z);
  Index K = S.K();
  Mat P = Mat::Zero(K, K);
  for (Index k = 0; k < K; ++k)
    P(k, k) = h.lw(m, k);
  return gaussian_row_posterior(Vec::Zero(K), P, C, t, S.sigma2);
}

Vec gggm_sample_w_row(Index m, const MaskedMatrix &A, const FactorState &S, const RmfHyper &h,
                      Rng &rng) {
  auto [mean, prec] = gggm_w_row_posterior(m, A, S, h);
  return sample_mvn_precision(mean, prec, rng);
}

InvGammaParams sigma2_posterior(const MaskedMatrix &A, const FactorState &S, const RmfHyper &h) {
  S.check_shapes(A.rows(), A.cols());
  return inv_gamma_variance_posterior(InvGammaParams{h.alpha_sigma, h.beta_sigma}, A, S.predict());
}

double sample_sigma2(const MaskedMatrix &A, const FactorState &S, const RmfHyper &h, Rng &rng) {
  return sample_inv_gamma(sigma2_posterior(A, S, h), rng);
}

GammaParams ggga_lambda_posterior(Index k, const FactorState &S, const RmfHyper &h) {
  if (k < 0 || k >= S.K())
    throw DimensionError("factor index out of range");
  double M = static_cast<double>(S.W.rows());
  double N = static_cast<double>(S.Z.cols());
  return GammaParams{0.5 * (M + N) + h.alpha_lambda,
                     0.5 * S.W.col(k).squaredNorm() + 0.5 * S.Z.row(k).squaredNorm() + h.beta_lambda};
}

double ggga_sample_lambda_k(Index k, const FactorState &S, const RmfHyper &h, Rng &rng) {
  return sample_gamma(ggga_lambda_posterior(k, S, h), rng);
}

std::pair<Vec, Mat> gggw_sample_hyper(const Mat &block, const NiwParams &prior, Rng &rng) {
  if (block.cols() != prior.dim())
    throw DimensionError("NIW block dimension mismatch");
  NiwStats st(prior.dim());
  for (Index i = 0; i < block.rows(); ++i)
    st.add(block.row(i).transpose());
  return sample_niw(niw_posterior(prior, st), rng);
}

NormalPost gvg_w_posterior(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                           const RmfHyper &h) {
  detail::check_entry(A, S, m, k);
  Work wk(A, S.predict());
  VolumeCache c = volume_cache(S.W, k);
  return gvg_post(c, m, S.W(m, k), wk.w_stats(m, k, S.W(m, k), S.Z), S.sigma2, h.gamma);
}

double gvg_sample_w_entry(Index m, Index k, const MaskedMatrix &A, const FactorState &S,
                          const RmfHyper &h, Rng &rng) {
  NormalPost p = gvg_w_posterior(m, k, A, S, h);
  return sample_normal(p.mean, p.var, rng);
}

namespace {

struct RmfChain {
  RmfModel model;
  const MaskedMatrix &A;
  RmfHyper h;
  FactorState S;
  Work wk;
  Rng rng;
  Index M, N, K;
  // NIW hierarchy state
  NiwParams niw;
  Vec mu_w, mu_z;
  Mat prec_w, prec_z;
  NiwStats stats_w, stats_z;

  RmfChain(RmfModel md, const MaskedMatrix &a, Index k, const RmfHyper &hy, std::uint64_t seed)
      : model(md), A(a), h(hy), wk(a, Mat::Zero(a.rows(), a.cols())), rng(seed), M(a.rows()),
        N(a.cols()), K(k), stats_w(k), stats_z(k) {
    S.W = detail::normal_matrix(M, K, rng);
    S.Z = detail::normal_matrix(K, N, rng);
    S.sigma2 = 1.0;
    wk.reset(S.W * S.Z);
    if (model == RmfModel::GGGA && h.ard_lambda.size() != K)
      h.ard_lambda = Vec::Constant(K, h.alpha_lambda / h.beta_lambda);
    if (model == RmfModel::GGGW) {
      niw = h.niw ? *h.niw : NiwParams::standard(K);
      niw.validate();
      if (niw.dim() != K)
        throw DimensionError("NIW prior dimension must equal K");
      mu_w = mu_z = Vec::Zero(K);
      prec_w = prec_z = Mat::Identity(K, K);
      for (Index m = 0; m < M; ++m)
        stats_w.add(S.W.row(m).transpose());
      for (Index n = 0; n < N; ++n)
        stats_z.add(S.Z.col(n));
    }
  }

  void w_entry_gaussian(Index m, Index k, double lambda) {
    NormalPost p = ggg_post(wk.w_stats(m, k, S.W(m, k), S.Z), S.sigma2, lambda);
    double v = sample_normal(p.mean, p.var, rng);
    wk.w_update(m, k, v - S.W(m, k), S.Z);
    S.W(m, k) = v;
  }

  void z_entry_gaussian(Index k, Index n, double lambda) {
    NormalPost p = ggg_post(wk.z_stats(k, n, S.Z(k, n), S.W), S.sigma2, lambda);
    double v = sample_normal(p.mean, p.var, rng);
    wk.z_update(k, n, v - S.Z(k, n), S.W);
    S.Z(k, n) = v;
  }

  void sweep_ggg() {
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m)
        w_entry_gaussian(m, k, h.lw(m, k));
      for (Index n = 0; n < N; ++n)
        z_entry_gaussian(k, n, h.lz(k, n));
    }
  }

  void sweep_ggga() {
    for (Index k = 0; k < K; ++k) {
      for (Index m = 0; m < M; ++m)
        w_entry_gaussian(m, k, h.ard_lambda(k));
      for (Index n = 0; n < N; ++n)
        z_entry_gaussian(k, n, h.ard_lambda(k));
      h.ard_lambda(k) = ggga_sample_lambda_k(k, S, h, rng);
    }
  }

  void sweep_rows(const Vec &prior_mean, const Mat &prior_prec, bool niw_stats) {
    for (Index m = 0; m < M; ++m) {
      auto [C, t] = row_system(wk, m, S.Z);
      auto [mean, prec] = gaussian_row_posterior(prior_mean, prior_prec, C, t, S.sigma2);
      Vec w = sample_mvn_precision(mean, prec, rng);
      if (niw_stats) {
        stats_w.remove(S.W.row(m).transpose());
        stats_w.add(w);
      }
      S.W.row(m) = w.transpose();
      refresh_row(wk, m, S.W, S.Z);
    }
  }

  void sweep_cols(const Vec &prior_mean, const Mat &prior_prec, bool niw_stats) {
    for (Index n = 0; n < N; ++n) {
      auto [C, t] = col_system(wk, n, S.W);
      auto [mean, prec] = gaussian_row_posterior(prior_mean, prior_prec, C, t, S.sigma2);
      Vec z = sample_mvn_precision(mean, prec, rng);
      if (niw_stats) {
        stats_z.remove(S.Z.col(n));
        stats_z.add(z);
      }
      S.Z.col(n) = z;
      refresh_col(wk, n, S.W, S.Z);
    }
  }

  void sweep_gggm() {
    if (h.lambda_w_entries || h.lambda_z_entries) {
      for (Index m = 0; m < M; ++m) {
        Mat P = Mat::Zero(K, K);
        for (Index k = 0; k < K; ++k)
          P(k, k) = h.lw(m, k);
        auto [C, t] = row_system(wk, m, S.Z);
        auto [mean, prec] = gaussian_row_posterior(Vec::Zero(K), P, C, t, S.sigma2);
        S.W.row(m) = sample_mvn_precision(mean, prec, rng).transpose();
        refresh_row(wk, m, S.W, S.Z);
      }
      for (Index n = 0; n < N; ++n) {
        Mat P = Mat::Zero(K, K);
        for (Index k = 0; k < K; ++k)
          P(k, k) = h.lz(k, n);
        auto [C, t] = col_system(wk, n, S.W);
        auto [mean, prec] = gaussian_row_posterior(Vec::Zero(K), P, C, t, S.sigma2);
        S.Z.col(n) = sample_mvn_precision(mean, prec, rng);
        refresh_col(wk, n, S.W, S.Z);
      }
      return;
    }
    sweep_rows(Vec::Zero(K), h.lambda_w * Mat::Identity(K, K), false);
    sweep_cols(Vec::Zero(K), h.lambda_z * Mat::Identity(K, K), false);
  }

  void sweep_gggw() {
    sweep_rows(mu_w, prec_w, true);
    sweep_cols(mu_z, prec_z, true);
    auto [mw, Sw] = sample_niw(niw_posterior(niw, stats_w), rng);
    mu_w = mw;
    prec_w = Sw.inverse();
    prec_w = 0.5 * (prec_w + prec_w.transpose());
    auto [mz, Sz] = sample_niw(niw_posterior(niw, stats_z), rng);
    mu_z = mz;
    prec_z = Sz.inverse();
    prec_z = 0.5 * (prec_z + prec_z.transpose());
  }

  void sweep_gvg() {
    for (Index k = 0; k < K; ++k) {
      VolumeCache c = volume_cache(S.W, k);
      for (Index m = 0; m < M; ++m) {
        double old = S.W(m, k);
        NormalPost p = gvg_post(c, m, old, wk.w_stats(m, k, old, S.Z), S.sigma2, h.gamma);
        double v = sample_normal(p.mean, p.var, rng);
        wk.w_update(m, k, v - old, S.Z);
        c.g += c.Wk.row(m).transpose() * (v - old);
        S.W(m, k) = v;
      }
      for (Index n = 0; n < N; ++n)
        z_entry_gaussian(k, n, h.lz(k, n));
    }
  }

  void iterate() {
    wk.reset(S.W * S.Z);
    switch (model) {
    case RmfModel::GGG:
      sweep_ggg();
      break;
    case RmfModel::GGGM:
      sweep_gggm();
      break;
    case RmfModel::GGGA:
      sweep_ggga();
      break;
    case RmfModel::GGGW:
      sweep_gggw();
      break;
    case RmfModel::GVG:
      sweep_gvg();
      break;
    }
    S.sigma2 = detail::draw_sigma2(wk, h.alpha_sigma, h.beta_sigma, rng);
  }
};

} // namespace

GibbsTrace fit_rmf(RmfModel model, const MaskedMatrix &A, Index K, const RmfHyper &h,
                   const GibbsConfig &cfg) {
  cfg.validate();
  check_common(A, K);
  RmfChain ch(model, A, K, h, cfg.seed);
  GibbsTrace tr;
  tr.config = cfg;
  for (int t = 1; t <= cfg.iters; ++t) {
    ch.iterate();
    ch.wk.reset(ch.S.W * ch.S.Z);
    tr.mse.push_back(ch.wk.mse());
    if (cfg.keep(t)) {
      tr.samples.push_back(ch.S);
      if (model == RmfModel::GGGA)
        tr.lambda_samples.push_back(ch.h.ard_lambda);
    }
    if (cfg.on_iteration)
      cfg.on_iteration(t, ch.S);
  }
  tr.state = ch.S;
  return tr;
}

} // namespace bmd
