#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "bmd/discrete.hpp"
#include "bmd/errors.hpp"
#include "support.hpp"

#include <cmath>
#include <numeric>

using namespace bmd;
using testing::grid_agrees;
using testing::random_normal;
using testing::random_uniform;
using testing::simpson;

namespace {

MaskedMatrix poisson_data(const Mat &rates, Rng &rng) {
  Mat a(rates.rows(), rates.cols());
  for (Index i = 0; i < rates.rows(); ++i)
    for (Index j = 0; j < rates.cols(); ++j)
      a(i, j) = static_cast<double>(sample_poisson(rates(i, j), rng));
  return MaskedMatrix(a);
}

/// Expected category by quadrature over h ~ N(wz, 1/tau) of sum_a a p(a | h).
double quadrature_expected(double wz, double tau, const OrdinalSpec &spec) {
  double sd = 1.0 / std::sqrt(tau);
  auto f = [&](double h) {
    double e = 0.0;
    for (int a = 1; a <= spec.categories(); ++a) {
      double lo = spec.boundaries(a - 1), hi = spec.boundaries(a);
      e += a * (0.5 * std::erfc(-(h - lo) / std::sqrt(2.0)) - 0.5 * std::erfc(-(h - hi) / std::sqrt(2.0)));
    }
    return e * std::exp(-0.5 * (h - wz) * (h - wz) / (sd * sd)) / (sd * std::sqrt(2 * M_PI));
  };
  return simpson(f, wz - 12 * sd, wz + 12 * sd, 20001);
}

} // namespace

TEST_CASE("allocation splits") {
  Rng rng(1);
  Vec w(2), z(2);
  w << 1.0, 3.0;
  z << 1.0, 1.0;
  auto zero = paa_allocate(0, w, z, rng);
  CHECK(zero == std::vector<std::int64_t>{0, 0});
  Vec w1(1), z1(1);
  w1 << 0.3;
  z1 << 2.0;
  CHECK(paa_allocate(17, w1, z1, rng) == std::vector<std::int64_t>{17});
  double s0 = 0, s1 = 0, q0 = 0;
  const int reps = 1000;
  for (int r = 0; r < reps; ++r) {
    auto o = paa_allocate(10000, w, z, rng);
    REQUIRE(o[0] + o[1] == 10000);
    s0 += static_cast<double>(o[0]);
    s1 += static_cast<double>(o[1]);
    q0 += static_cast<double>(o[0]) * static_cast<double>(o[0]);
  }
  double m0 = s0 / reps, se = std::sqrt(10000 * 0.25 * 0.75 / reps);
  CHECK(std::abs(m0 - 2500) < 3 * se);
  CHECK(std::abs(s1 / reps - 7500) < 3 * se);
  Vec zz = Vec::Zero(2);
  CHECK_THROWS_AS(paa_allocate(3, w, zz, rng), DegenerateError);
  CHECK(paa_allocate(0, w, zz, rng) == std::vector<std::int64_t>{0, 0});
}

TEST_CASE("Poisson factor posteriors") {
  Mat a = Mat::Zero(1, 2);
  MaskedMatrix A(a);
  Allocations o(1, 2, 1);
  Mat Z = Mat::Zero(1, 2);
  auto g = paa_w_posterior(0, 0, A, o, Z, 1.0, 1.0);
  CHECK(g.shape == 1.0);
  CHECK(g.rate == 1.0);
  o(0, 0, 0) = 2;
  o(0, 1, 0) = 1;
  Z << 1.5, 0.5;
  g = paa_w_posterior(0, 0, A, o, Z, 1.0, 1.0);
  CHECK(g.shape == 4.0);
  CHECK(g.rate == 3.0);
  CHECK(g.shape / g.rate == doctest::Approx(4.0 / 3.0));
  Allocations o2 = o;
  o2(0, 0, 0) *= 2;
  o2(0, 1, 0) *= 2;
  auto g2 = paa_w_posterior(0, 0, A, o2, Z, 1.0, 1.0);
  CHECK(g2.shape - 1.0 == 2 * (g.shape - 1.0));

  // Grid oracle from the Poisson likelihood of the allocations times the Gamma prior.
  Rng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    const Index N = 4, K = 2;
    Allocations al(1, N, K);
    Mat Zr = random_uniform(K, N, rng, 0.2, 2.0);
    std::vector<double> cnt;
    for (Index j = 0; j < N; ++j)
      for (Index k = 0; k < K; ++k)
        al(0, j, k) = sample_poisson(1.5, rng);
    double alpha = 0.5 + 0.3 * rep, beta = 0.5 + 0.1 * rep;
    Index k = rep % K;
    auto p = paa_w_posterior(0, k, MaskedMatrix(Mat(Mat::Zero(1, N))), al, Zr, alpha, beta);
    auto logf = [&](double x) {
      double s = (alpha - 1) * std::log(x) - beta * x;
      for (Index j = 0; j < N; ++j)
        s += static_cast<double>(al(0, j, k)) * std::log(x * Zr(k, j)) - x * Zr(k, j);
      return s;
    };
    double mean = p.shape / p.rate, var = p.shape / (p.rate * p.rate);
    CHECK(grid_agrees(mean, var, logf, 1e-12, 14.0));
  }
}

TEST_CASE("hierarchical rate posterior") {
  PoissonHyper h;
  Mat W = Mat::Zero(1, 2);
  auto g = paaa_lambda_posterior(0, W, h);
  CHECK(g.shape == 3.0);
  CHECK(g.rate == 1.0);
  W << 1.0, 2.0;
  g = paaa_lambda_posterior(0, W, h);
  CHECK(g.shape == 3.0);
  CHECK(g.rate == 4.0);
  W << 3.0, 4.0;
  auto g2 = paaa_lambda_posterior(0, W, h);
  CHECK(g2.shape / g2.rate < g.shape / g.rate);
}

TEST_CASE("allocations are conserved and factors stay positive") {
  Rng rng(3);
  Mat rates = random_uniform(10, 2, rng, 0.5, 2.0) * random_uniform(2, 8, rng, 0.5, 2.0);
  MaskedMatrix A = poisson_data(rates, rng);
  for (bool hier : {false, true}) {
    PoissonChain ch(A, 3, PoissonHyper{}, hier, 11);
    for (int it = 0; it < 100; ++it) {
      ch.iterate();
      const auto &o = ch.allocations();
      bool ok = true;
      for (Index m = 0; m < 10; ++m)
        for (Index n = 0; n < 8; ++n) {
          std::int64_t s = 0;
          for (Index k = 0; k < 3; ++k) {
            ok = ok && o(m, n, k) >= 0;
            s += o(m, n, k);
          }
          ok = ok && s == static_cast<std::int64_t>(A.values(m, n)) && o.cell_total(m, n) == s;
        }
      REQUIRE(ok);
      REQUIRE(ch.state().W.minCoeff() > 0.0);
      REQUIRE(ch.state().Z.minCoeff() > 0.0);
    }
  }
}

TEST_CASE("PAA recovers Poisson rates") {
  Rng rng(4);
  // Rank-2 rates in [1, 10]: each product term lies in [0.5, 5].
  Mat W = random_uniform(40, 2, rng, 0.5, 2.5), Z = random_uniform(2, 30, rng, 1.0, 2.0);
  Mat rates = W * Z;
  REQUIRE(rates.minCoeff() >= 1.0);
  REQUIRE(rates.maxCoeff() <= 10.0);
  MaskedMatrix A = poisson_data(rates, rng);
  GibbsConfig cfg;
  cfg.iters = 600;
  cfg.burn_in = 300;
  cfg.seed = 7;
  GibbsTrace tr = fit_paa(A, 2, PoissonHyper{}, cfg);
  Mat mean = Mat::Zero(40, 30);
  for (const auto &s : tr.samples)
    mean += s.predict() / static_cast<double>(tr.samples.size());
  int good = 0;
  for (Index i = 0; i < 40; ++i)
    for (Index j = 0; j < 30; ++j)
      if (std::abs(mean(i, j) - rates(i, j)) <= 0.15 * rates(i, j))
        ++good;
  CHECK(good >= 0.8 * 1200);
}

TEST_CASE("hierarchical model collapses to the flat one") {
  Rng rng(5);
  Mat rates = random_uniform(10, 2, rng, 0.5, 2.0) * random_uniform(2, 8, rng, 0.5, 2.0);
  MaskedMatrix A = poisson_data(rates, rng);
  PoissonHyper h;
  h.a = 1e6;
  h.b = 2.0; // prior mean of each rate; the flat model uses beta = 2
  PoissonChain ch(A, 2, h, true, 3);
  for (int it = 0; it < 50; ++it) {
    ch.iterate();
    REQUIRE((ch.row_rates().array() - 2.0).abs().maxCoeff() < 0.02);
    REQUIRE((ch.col_rates().array() - 2.0).abs().maxCoeff() < 0.02);
  }
  GibbsConfig cfg;
  cfg.iters = 400;
  cfg.burn_in = 200;
  PoissonHyper flat;
  flat.beta = 2.0;
  double hier_mse = fit_paaa(A, 2, h, cfg).post_burn_in_mse();
  double flat_mse = fit_paa(A, 2, flat, cfg).post_burn_in_mse();
  CHECK(std::abs(hier_mse - flat_mse) < 0.1 * flat_mse);
}

TEST_CASE("ordinal probabilities") {
  OrdinalSpec two;
  two.boundaries.resize(3);
  two.boundaries << -kInf, 0.0, kInf;
  CHECK(ordinal_prob(1, 0.0, two) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ordinal_prob(2, 0.0, two) == doctest::Approx(0.5).epsilon(1e-15));
  OrdinalSpec three;
  three.boundaries.resize(4);
  three.boundaries << -kInf, -1.0, 1.0, kInf;
  CHECK(ordinal_prob(2, 0.0, three) == doctest::Approx(0.682689492137086).epsilon(1e-12));
  for (int A : {2, 3, 5}) {
    OrdinalSpec s = OrdinalSpec::integer_scale(A);
    for (int i = 0; i < 100; ++i) {
      double h = -5.0 + 0.12 * i;
      double total = 0.0;
      for (int a = 1; a <= A; ++a) {
        double p = ordinal_prob(a, h, s);
        REQUIRE(p >= 0.0);
        REQUIRE(p <= 1.0);
        total += p;
      }
      REQUIRE(std::abs(total - 1.0) <= 1e-12);
    }
  }
  OrdinalSpec bad;
  bad.boundaries.resize(4);
  bad.boundaries << -kInf, 1.0, 1.0, kInf;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  CHECK_THROWS_AS(ordinal_prob(4, 0.0, three), ParameterError);
}

TEST_CASE("latent draws") {
  Rng rng(6);
  OrdinalSpec s = OrdinalSpec::integer_scale(5);
  for (int a = 1; a <= 5; ++a)
    for (int i = 0; i < 2000; ++i) {
      auto [f, h] = oggw_sample_latents(a, 2.7, 0.8, s, rng);
      REQUIRE(f >= s.boundaries(a - 1));
      REQUIRE(f <= s.boundaries(a));
    }
  double dev = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto [f, h] = oggw_sample_latents(3, 2.7, 1e6, s, rng);
    dev = std::max(dev, std::abs(h - 2.7));
  }
  CHECK(dev < 0.01);

  // Draw a category from its marginal, then latents given the category; h must be
  // distributed as N(wz, 1/tau), so remapping h through ordinal_prob reproduces the marginal.
  const double wz = 2.3, tau = 1.7;
  const double sd = std::sqrt(1 + 1 / tau);
  Vec marginal(5);
  for (int a = 1; a <= 5; ++a)
    marginal(a - 1) = norm_cdf((s.boundaries(a) - wz) / sd) - norm_cdf((s.boundaries(a - 1) - wz) / sd);
  std::discrete_distribution<int> pick(marginal.data(), marginal.data() + 5);
  Vec remap = Vec::Zero(5);
  std::vector<double> hs;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    int a = pick(rng) + 1;
    double h = oggw_sample_latents(a, wz, tau, s, rng).second;
    hs.push_back(h);
    for (int b = 1; b <= 5; ++b)
      remap(b - 1) += ordinal_prob(b, h, s) / n;
  }
  CHECK(0.5 * (remap - marginal).cwiseAbs().sum() < 0.01);
  CHECK(testing::ks_distance(hs, [&](double x) { return norm_cdf((x - wz) * std::sqrt(tau)); }) < 0.01);
}

TEST_CASE("expected category") {
  OrdinalSpec two;
  two.boundaries.resize(3);
  two.boundaries << -kInf, 0.0, kInf;
  CHECK(oggw_expected_category(0.0, 1.0, two) == doctest::Approx(1.5).epsilon(1e-15));
  OrdinalSpec five = OrdinalSpec::integer_scale(5);
  CHECK(oggw_expected_category(100.0, 1.0, five) == doctest::Approx(5.0).epsilon(1e-12));
  Rng rng(7);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 20; ++i) {
    double wz = -1 + 7 * u(rng), tau = 0.2 + 5 * u(rng);
    int A = 2 + i % 4;
    OrdinalSpec s = OrdinalSpec::integer_scale(A);
    CHECK(std::abs(oggw_expected_category(wz, tau, s) - quadrature_expected(wz, tau, s)) < 1e-4);
  }
  Vec w(2), z(2);
  w << 1.0, 2.0;
  z << 0.5, 1.0;
  CHECK(oggw_expected_category(w, z, 2.0, five) == oggw_expected_category(2.5, 2.0, five));
}

TEST_CASE("uncertainty-adjusted score") {
  OrdinalSpec s = OrdinalSpec::integer_scale(5);
  std::vector<FactorState> samples;
  std::vector<double> e;
  for (int i = 0; i < 4; ++i) {
    FactorState S;
    S.W = Mat::Constant(1, 1, 1.0 + 0.5 * i);
    S.Z = Mat::Constant(1, 1, 2.0);
    S.sigma2 = 0.5;
    samples.push_back(S);
    e.push_back(oggw_expected_category(S.W(0, 0) * 2.0, 2.0, s));
  }
  double mean = std::accumulate(e.begin(), e.end(), 0.0) / 4;
  double var = 0.0;
  for (double v : e)
    var += (v - mean) * (v - mean) / 3;
  CHECK(oggw_score(0, 0, samples, s) == doctest::Approx(mean / std::sqrt(var)).epsilon(1e-12));
}

TEST_CASE("ordinal factorization on its own forward model") {
  Rng rng(8);
  const Index M = 30, N = 25, K = 2;
  const double tau = 4.0;
  OrdinalSpec spec = OrdinalSpec::integer_scale(5);
  Mat W = random_normal(M, K, rng, 1.5), Z = random_normal(K, N, rng, 1.5);
  W.col(1).array() += 1.5;
  Z.row(1).array() += 2.0;
  Mat a(M, N);
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < N; ++j) {
      double h = sample_normal(W.row(i).dot(Z.col(j)), 1 / tau, rng);
      double f = sample_normal(h, 1.0, rng);
      int c = 1;
      while (c < 5 && f > spec.boundaries(c))
        ++c;
      a(i, j) = c;
    }
  MaskedMatrix A(a);
  OrdinalHyper h;
  h.spec = spec;
  GibbsConfig cfg;
  cfg.iters = 400;
  cfg.burn_in = 200;
  cfg.seed = 3;
  GibbsTrace tr = fit_oggw(A, K, h, cfg);
  Mat P = Mat::Zero(M, N);
  for (const auto &s : tr.samples)
    P += oggw_predict(s, spec) / static_cast<double>(tr.samples.size());
  int hit = 0;
  for (Index i = 0; i < M; ++i)
    for (Index j = 0; j < N; ++j)
      if (std::lround(P(i, j)) == std::lround(a(i, j)))
        ++hit;
  CHECK(hit >= 0.6 * M * N);
}
