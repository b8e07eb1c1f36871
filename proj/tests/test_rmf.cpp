#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bmd/errors.hpp"
#include "bmd/rmf.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace bmd;
using testing::grid_agrees;
using testing::random_mask;
using testing::random_normal;

namespace {

FactorState random_state(Index M, Index K, Index N, Rng &rng, double sigma2 = 0.5) {
  FactorState S;
  S.W = random_normal(M, K, rng);
  S.Z = random_normal(K, N, rng);
  S.sigma2 = sigma2;
  return S;
}

/// Log-likelihood of the observed row m with w_mk replaced by x.
double row_loglik(const MaskedMatrix &A, const FactorState &S, Index m, Index k, double x) {
  Vec w = S.W.row(m).transpose();
  w(k) = x;
  double s = 0.0;
  for (Index j = 0; j < A.cols(); ++j)
    if (A.mask(m, j)) {
      double r = A.values(m, j) - w.dot(S.Z.col(j));
      s -= 0.5 * r * r / S.sigma2;
    }
  return s;
}

MaskedMatrix noisy_low_rank(Index M, Index N, Index R, double noise_var, Rng &rng) {
  Mat a = random_normal(M, R, rng) * random_normal(R, N, rng) + random_normal(M, N, rng, std::sqrt(noise_var));
  return MaskedMatrix(a);
}

} // namespace

TEST_CASE("GGG scalar example") {
  Mat a(1, 1);
  a << 2.0;
  MaskedMatrix A(a);
  FactorState S;
  S.W = Mat::Zero(1, 1);
  S.Z = Mat::Ones(1, 1);
  S.sigma2 = 1.0;
  RmfHyper h;
  h.lambda_w = 1.0;
  NormalPost p = ggg_w_posterior(0, 0, A, S, h);
  CHECK(1.0 / p.var == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p.mean == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(grid_agrees(p.mean, p.var, [](double w) { return -0.5 * (2 - w) * (2 - w) - 0.5 * w * w; }));
}

TEST_CASE("GGG with an unobserved row returns the prior") {
  Rng rng(1);
  Mat a = random_normal(3, 3, rng);
  Mask mask = Mask::Constant(3, 3, true);
  mask.row(1).setConstant(false);
  FactorState S = random_state(3, 2, 3, rng);
  RmfHyper h;
  h.lambda_w = 0.4;
  NormalPost p = ggg_w_posterior(1, 1, MaskedMatrix(a, mask), S, h);
  CHECK(p.mean == 0.0);
  CHECK(p.var == doctest::Approx(1 / 0.4).epsilon(1e-15));
}

TEST_CASE("GGG with vanishing likelihood") {
  Rng rng(2);
  FactorState S = random_state(3, 2, 3, rng, 1e12);
  MaskedMatrix A(random_normal(3, 3, rng));
  RmfHyper h;
  NormalPost p = ggg_w_posterior(0, 0, A, S, h);
  CHECK(std::abs(p.mean) < 1e-5);
  CHECK(1.0 / p.var == doctest::Approx(h.lambda_w).epsilon(1e-9));
}

TEST_CASE("GGG conditional matches the grid posterior") {
  Rng rng(3);
  for (int rep = 0; rep < 25; ++rep) {
    Index M = 1 + rep % 3, N = 1 + (rep / 3) % 3, K = 1 + rep % 2;
    Mask mask = random_mask(M, N, 0.7, rng);
    MaskedMatrix A(random_normal(M, N, rng), mask);
    FactorState S = random_state(M, K, N, rng, 0.3 + 0.1 * rep);
    RmfHyper h;
    h.lambda_w = 0.2 + 0.05 * rep;
    Index m = rep % M, k = rep % K;
    NormalPost p = ggg_w_posterior(m, k, A, S, h);
    CHECK(grid_agrees(p.mean, p.var,
                      [&](double x) { return row_loglik(A, S, m, k, x) - 0.5 * h.lambda_w * x * x; }));
  }
}

TEST_CASE("GGG variance falls as the data precision grows") {
  Rng rng(4);
  MaskedMatrix A(random_normal(2, 3, rng));
  FactorState S = random_state(2, 2, 3, rng);
  RmfHyper h;
  double prev = ggg_w_posterior(0, 1, A, S, h).var;
  for (int i = 0; i < 10; ++i) {
    S.Z(1, 2) *= 1.5;
    double v = ggg_w_posterior(0, 1, A, S, h).var;
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("row posterior") {
  Rng rng(5);
  SUBCASE("K = 1 agrees with the scalar sampler") {
    MaskedMatrix A(random_normal(3, 4, rng));
    FactorState S = random_state(3, 1, 4, rng, 0.7);
    RmfHyper h;
    h.lambda_w = 0.3;
    auto [mean, prec] = gggm_w_row_posterior(2, A, S, h);
    NormalPost p = ggg_w_posterior(2, 0, A, S, h);
    CHECK(mean(0) == doctest::Approx(p.mean).epsilon(1e-13));
    CHECK(1.0 / prec(0, 0) == doctest::Approx(p.var).epsilon(1e-13));
  }
  SUBCASE("unobserved row gives the prior") {
    Mask mask = Mask::Constant(3, 4, true);
    mask.row(0).setConstant(false);
    MaskedMatrix A(random_normal(3, 4, rng), mask);
    FactorState S = random_state(3, 2, 4, rng);
    RmfHyper h;
    h.lambda_w = 0.25;
    auto [mean, prec] = gggm_w_row_posterior(0, A, S, h);
    CHECK(mean.norm() == 0.0);
    CHECK((prec - 0.25 * Mat::Identity(2, 2)).norm() < 1e-15);
  }
  SUBCASE("K = 2, N = 3 against dense normal equations") {
    MaskedMatrix A(random_normal(2, 3, rng));
    FactorState S = random_state(2, 2, 3, rng, 0.4);
    RmfHyper h;
    h.lambda_w = 0.5;
    Mat P = h.lambda_w * Mat::Identity(2, 2);
    Vec rhs = Vec::Zero(2);
    for (Index j = 0; j < 3; ++j) {
      P += S.Z.col(j) * S.Z.col(j).transpose() / S.sigma2;
      rhs += A.values(1, j) * S.Z.col(j) / S.sigma2;
    }
    Vec mu = P.inverse() * rhs;
    auto [mean, prec] = gggm_w_row_posterior(1, A, S, h);
    CHECK((prec - P).norm() < 1e-13);
    CHECK((mean - mu).norm() < 1e-13);
  }
  SUBCASE("draws have the posterior covariance") {
    MaskedMatrix A(random_normal(2, 3, rng));
    FactorState S = random_state(2, 2, 3, rng, 0.4);
    RmfHyper h;
    auto [mean, prec] = gggm_w_row_posterior(0, A, S, h);
    Mat cov = prec.inverse();
    Vec m = Vec::Zero(2);
    Mat c = Mat::Zero(2, 2);
    const int n = 40000;
    std::vector<Vec> xs;
    for (int i = 0; i < n; ++i)
      xs.push_back(gggm_sample_w_row(0, A, S, h, rng));
    for (const auto &x : xs)
      m += x / n;
    for (const auto &x : xs)
      c += (x - m) * (x - m).transpose() / n;
    CHECK((m - mean).norm() < 0.02 * std::sqrt(cov.trace()));
    CHECK((c - cov).norm() < 0.03 * cov.norm());
  }
}

TEST_CASE("noise variance posterior") {
  Mat a = Mat::Ones(2, 2);
  MaskedMatrix A(a);
  FactorState S;
  S.W = Mat::Zero(2, 1);
  S.Z = Mat::Zero(1, 2);
  RmfHyper h;
  auto p = sigma2_posterior(A, S, h);
  CHECK(p.shape == 3.0);
  CHECK(p.scale == 3.0);
  S.W = Mat::Ones(2, 1);
  S.Z = Mat::Ones(1, 2);
  p = sigma2_posterior(A, S, h);
  CHECK(p.shape == 3.0);
  CHECK(p.scale == 1.0);
  auto g = gamma_precision_posterior(GammaParams{1.0, 1.0}, A, S.predict());
  CHECK(g.shape == p.shape);
  CHECK(g.rate == p.scale);
}

TEST_CASE("ARD precision posterior") {
  RmfHyper h;
  FactorState S;
  S.W = Mat::Zero(2, 2);
  S.Z = Mat::Zero(2, 2);
  auto g = ggga_lambda_posterior(0, S, h);
  CHECK(g.shape == 3.0);
  CHECK(g.rate == 1.0);
  S.W.col(1).setOnes();
  S.Z.row(1).setOnes();
  g = ggga_lambda_posterior(1, S, h);
  CHECK(g.shape == 3.0);
  CHECK(g.rate == 3.0);
  S.W *= 2.0;
  S.Z *= 2.0;
  CHECK(ggga_lambda_posterior(1, S, h).rate > g.rate);
}

TEST_CASE("NIW hyper draw uses the block rows") {
  Rng r1(6), r2(6);
  Mat block = random_normal(5, 2, r1);
  NiwParams prior = NiwParams::standard(2);
  std::vector<Vec> rows;
  for (Index i = 0; i < 5; ++i)
    rows.push_back(block.row(i).transpose());
  Rng a(7), b(7);
  auto [m1, S1] = gggw_sample_hyper(block, prior, a);
  auto [m2, S2] = sample_niw(niw_posterior(prior, rows), b);
  CHECK((m1 - m2).norm() < 1e-10);
  CHECK((S1 - S2).norm() < 1e-10);
}

TEST_CASE("determinant and adjugate") {
  Mat B(2, 2);
  B << 3.0, 1.0, 1.0, 2.0;
  auto [d, adj] = det_adjugate(B);
  CHECK(d == doctest::Approx(5.0).epsilon(1e-14));
  Mat want(2, 2);
  want << 2.0, -1.0, -1.0, 3.0;
  CHECK((adj - want).norm() < 1e-13);
  Mat sing(3, 3);
  sing << 1, 2, 3, 2, 4, 6, 1, 0, 1;
  auto [ds, adjs] = det_adjugate(sing);
  CHECK(std::abs(ds) < 1e-12);
  CHECK((sing * adjs).norm() < 1e-12);
  CHECK((adjs - adjs).norm() == 0.0);
  Mat one(1, 1);
  one << 4.0;
  auto [d1, a1] = det_adjugate(one);
  CHECK(d1 == 4.0);
  CHECK(a1(0, 0) == 1.0);
}

TEST_CASE("volume prior conditional") {
  Rng rng(8);
  SUBCASE("zero weight reduces to a flat Gaussian prior") {
    MaskedMatrix A(random_normal(3, 3, rng));
    FactorState S = random_state(3, 2, 3, rng);
    RmfHyper hv;
    hv.gamma = 0.0;
    RmfHyper hg;
    hg.lambda_w = 0.0;
    NormalPost v = gvg_w_posterior(1, 0, A, S, hv);
    NormalPost g = ggg_w_posterior(1, 0, A, S, hg);
    CHECK(v.mean == doctest::Approx(g.mean).epsilon(1e-13));
    CHECK(v.var == doctest::Approx(g.var).epsilon(1e-13));
  }
  SUBCASE("matches the grid posterior under exp(-gamma/2 det(W'W))") {
    for (int rep = 0; rep < 10; ++rep) {
      Index M = 2 + rep % 2, K = 2, N = 2 + rep % 2;
      MaskedMatrix A(random_normal(M, N, rng), random_mask(M, N, 0.8, rng));
      FactorState S = random_state(M, K, N, rng, 0.5);
      RmfHyper h;
      h.gamma = 0.5 + 0.2 * rep;
      Index m = rep % M, k = rep % K;
      NormalPost p = gvg_w_posterior(m, k, A, S, h);
      auto logf = [&](double x) {
        Mat W = S.W;
        W(m, k) = x;
        return row_loglik(A, S, m, k, x) - 0.5 * h.gamma * (W.transpose() * W).determinant();
      };
      CHECK(grid_agrees(p.mean, p.var, logf));
    }
  }
  SUBCASE("K = 2 closed form by hand") {
    // With K = 2 the other column is a vector u; det(W'W) = |w|^2 |u|^2 - (w.u)^2.
    MaskedMatrix A(random_normal(3, 2, rng));
    FactorState S = random_state(3, 2, 2, rng, 0.8);
    RmfHyper h;
    h.gamma = 0.7;
    Index m = 2, k = 0;
    Vec u = S.W.col(1);
    double D = u.squaredNorm(); // det of the 1x1 block
    double quad = D - u(m) * u(m);
    double g = 0.0;
    for (Index i = 0; i < 3; ++i)
      if (i != m)
        g += u(i) * S.W(i, k);
    double lin = u(m) * g;
    double scc = S.Z.row(k).squaredNorm();
    double scr = 0.0;
    for (Index j = 0; j < 2; ++j)
      scr += S.Z(k, j) * (A.values(m, j) - S.W(m, 1) * S.Z(1, j));
    double prec = scc / S.sigma2 + h.gamma * quad;
    double mean = (scr / S.sigma2 + h.gamma * lin) / prec;
    NormalPost p = gvg_w_posterior(m, k, A, S, h);
    CHECK(1.0 / p.var == doctest::Approx(prec).epsilon(1e-12));
    CHECK(p.mean == doctest::Approx(mean).epsilon(1e-12));
  }
  SUBCASE("larger volume pulls the mean toward a smaller volume") {
    Mat a = Mat::Zero(3, 3);
    Mask none = Mask::Constant(3, 3, false);
    none(0, 0) = true;
    MaskedMatrix A(a, none);
    FactorState S;
    S.W = Mat::Zero(3, 2);
    S.W(0, 0) = 1.0;
    S.W(1, 1) = 1.0;
    S.W(2, 0) = 0.5;
    S.W(2, 1) = 0.5;
    S.Z = Mat::Zero(2, 3);
    RmfHyper h;
    h.gamma = 1.0;
    NormalPost p1 = gvg_w_posterior(2, 0, A, S, h);
    S.W.col(1) *= 3.0;
    NormalPost p3 = gvg_w_posterior(2, 0, A, S, h);
    auto vol = [&](double x) {
      Mat W = S.W;
      W(2, 0) = x;
      return (W.transpose() * W).determinant();
    };
    CHECK(vol(p3.mean) < vol(S.W(2, 0)));
    CHECK(std::abs(p3.mean - S.W(2, 0)) > 0.0);
    CHECK(p1.var > p3.var);
  }
}

TEST_CASE("chains") {
  Rng rng(9);
  MaskedMatrix A = noisy_low_rank(12, 10, 2, 0.01, rng);
  GibbsConfig cfg;
  cfg.iters = 60;
  cfg.burn_in = 30;
  cfg.seed = 42;
  RmfHyper h;
  for (RmfModel md : {RmfModel::GGG, RmfModel::GGGM, RmfModel::GGGA, RmfModel::GGGW, RmfModel::GVG}) {
    CAPTURE(static_cast<int>(md));
    GibbsTrace a = fit_rmf(md, A, 2, h, cfg);
    GibbsTrace b = fit_rmf(md, A, 2, h, cfg);
    CHECK(a.mse.size() == 60);
    CHECK(a.samples.size() == 30);
    CHECK(a.mse == b.mse);
    CHECK((a.state.W - b.state.W).cwiseAbs().maxCoeff() == 0.0);
    CHECK(a.state.sigma2 > 0.0);
    CHECK(a.post_burn_in_mse() < 0.1);
  }
  cfg.iters = 0;
  cfg.burn_in = 0;
  GibbsTrace z = fit_rmf(RmfModel::GGG, A, 2, h, cfg);
  CHECK(z.mse.empty());
  CHECK(z.samples.empty());
  CHECK(z.state.W.rows() == 12);
  cfg.iters = 10;
  cfg.burn_in = 10;
  CHECK_THROWS_AS(fit_rmf(RmfModel::GGG, A, 2, h, cfg), ParameterError);
}

TEST_CASE("thinning keeps every t-th post-burn-in sample") {
  Rng rng(10);
  MaskedMatrix A = noisy_low_rank(6, 5, 1, 0.01, rng);
  GibbsConfig cfg;
  cfg.iters = 50;
  cfg.burn_in = 20;
  cfg.thin = 3;
  std::vector<int> kept;
  cfg.on_iteration = [&](int t, const FactorState &) {
    if (cfg.keep(t))
      kept.push_back(t);
  };
  GibbsTrace tr = fit_rmf(RmfModel::GGG, A, 1, RmfHyper{}, cfg);
  CHECK(tr.samples.size() == 10);
  CHECK(kept.front() == 23);
  CHECK(kept.back() == 50);
}

TEST_CASE("GGG recovers a noisy rank-five matrix") {
  Rng rng(11);
  MaskedMatrix A = noisy_low_rank(30, 20, 5, 0.01, rng);
  GibbsConfig cfg;
  cfg.iters = 500;
  cfg.burn_in = 250;
  cfg.seed = 1;
  GibbsTrace tr = fit_rmf(RmfModel::GGG, A, 5, RmfHyper{}, cfg);
  CHECK(tr.post_burn_in_mse() <= 0.02);
}

TEST_CASE("ARD switches off surplus factors") {
  Rng rng(12);
  // Factor scale 5: with alpha = beta = 1 an unused factor's precision stays O(1),
  // so the contrast with active factors grows with the data scale.
  Mat a = random_normal(30, 3, rng, 5.0) * random_normal(3, 20, rng, 5.0) + random_normal(30, 20, rng, 0.1);
  MaskedMatrix A(a);
  GibbsConfig cfg;
  cfg.iters = 600;
  cfg.burn_in = 300;
  cfg.seed = 5;
  GibbsTrace tr = fit_rmf(RmfModel::GGGA, A, 10, RmfHyper{}, cfg);
  REQUIRE(tr.lambda_samples.size() == 300);
  Vec lam = Vec::Zero(10);
  for (const auto &l : tr.lambda_samples)
    lam += l / 300.0;
  std::vector<double> sorted(lam.data(), lam.data() + 10);
  std::sort(sorted.begin(), sorted.end());
  double active_median = sorted[1];
  int off = 0;
  for (std::size_t i = 3; i < 10; ++i)
    if (sorted[i] > 10.0 * active_median)
      ++off;
  CHECK(off >= 5);
}
