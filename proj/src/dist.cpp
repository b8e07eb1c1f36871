#include "bmd/dist.hpp"

#include "bmd/errors.hpp"

#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bmd {

namespace {

constexpr double kTailCut = 5.0;

double uniform01(Rng &rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double phi_times(double x) { return std::isinf(x) ? 0.0 : x * norm_pdf(x); }

// Standard normal restricted to [lo, hi] with lo > kTailCut.
double sample_right_tail(double lo, double hi, Rng &rng) {
  if (std::isfinite(hi) && hi - lo < 1.0 / lo) {
    for (;;) {
      double z = lo + (hi - lo) * uniform01(rng);
      if (uniform01(rng) <= std::exp(0.5 * (lo * lo - z * z)))
        return z;
    }
  }
  double rate = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  std::exponential_distribution<double> ex(rate);
  for (;;) {
    double z = lo + ex(rng);
    if (z > hi)
      continue;
    double d = z - rate;
    if (uniform01(rng) <= std::exp(-0.5 * d * d))
      return z;
  }
}

// Standard normal restricted to [lo, hi].
double sample_std_truncated(double lo, double hi, Rng &rng) {
  if (lo > kTailCut)
    return sample_right_tail(lo, hi, rng);
  if (hi < -kTailCut)
    return -sample_right_tail(-hi, -lo, rng);
  bool mirror = lo > 0.0;
  double l = mirror ? -hi : lo;
  double h = mirror ? -lo : hi;
  double pl = norm_cdf(l);
  double ph = norm_cdf(h);
  double u = uniform01(rng);
  double x;
  if (ph - pl <= 0.0)
    x = l + (h - l) * u;
  else
    x = norm_ppf(pl + u * (ph - pl));
  x = std::clamp(x, l, h);
  return mirror ? -x : x;
}

} // namespace

double norm_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double norm_ppf(double p) {
  if (p <= 0.0)
    return -kInf;
  if (p >= 1.0)
    return kInf;
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

void GtnParams::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau))
    throw ParameterError("GTN precision must be positive and finite");
  if (!std::isfinite(mu))
    throw ParameterError("GTN parent mean must be finite");
  if (!(a < b))
    throw ParameterError("GTN bounds require a < b");
}

GtnParams tn_params(double mu, double var) {
  if (!(var > 0.0))
    throw ParameterError("TN variance must be positive");
  return GtnParams{mu, 1.0 / var, 0.0, kInf};
}

namespace {

// Standardized bounds and Phi(beta) - Phi(alpha) evaluated on the accurate side.
struct Standardized {
  double alpha, beta, Z;
};

Standardized standardize(const GtnParams &p) {
  double s = std::sqrt(p.tau);
  double alpha = std::isinf(p.a) ? p.a : (p.a - p.mu) * s;
  double beta = std::isinf(p.b) ? p.b : (p.b - p.mu) * s;
  double Z = alpha > 0.0 ? norm_cdf(-alpha) - norm_cdf(-beta) : norm_cdf(beta) - norm_cdf(alpha);
  return {alpha, beta, Z};
}

} // namespace

double gtn_pdf(double x, const GtnParams &p) {
  p.validate();
  if (x < p.a || x > p.b)
    return 0.0;
  auto st = standardize(p);
  if (st.Z < 1e-300)
    throw UnderflowError("GTN normalizer underflow");
  double s = std::sqrt(p.tau);
  return s * norm_pdf((x - p.mu) * s) / st.Z;
}

double gtn_cdf(double x, const GtnParams &p) {
  p.validate();
  if (x <= p.a)
    return 0.0;
  if (x >= p.b)
    return 1.0;
  auto st = standardize(p);
  if (st.Z < 1e-300)
    throw UnderflowError("GTN normalizer underflow");
  double z = (x - p.mu) * std::sqrt(p.tau);
  double num = st.alpha > 0.0 ? norm_cdf(-st.alpha) - norm_cdf(-z) : norm_cdf(z) - norm_cdf(st.alpha);
  return std::clamp(num / st.Z, 0.0, 1.0);
}

std::pair<double, double> gtn_moments(const GtnParams &p) {
  p.validate();
  auto st = standardize(p);
  if (st.Z < 1e-300)
    throw UnderflowError("GTN normalizer underflow");
  double pa = norm_pdf(st.alpha);
  double pb = norm_pdf(st.beta);
  double ratio = (pb - pa) / st.Z;
  double s = std::sqrt(p.tau);
  double mean = p.mu - ratio / s;
  double var = (1.0 - (phi_times(st.beta) - phi_times(st.alpha)) / st.Z - ratio * ratio) / p.tau;
  return {mean, var};
}

double sample_gtn(const GtnParams &p, Rng &rng) {
  p.validate();
  double s = std::sqrt(p.tau);
  double lo = std::isinf(p.a) ? p.a : (p.a - p.mu) * s;
  double hi = std::isinf(p.b) ? p.b : (p.b - p.mu) * s;
  double x = p.mu + sample_std_truncated(lo, hi, rng) / s;
  return std::clamp(x, p.a, p.b);
}

GtnParams rn_to_gtn(const RnParams &p) {
  if (!(p.tau > 0.0) || p.lambda < 0.0)
    throw ParameterError("RN requires tau > 0 and lambda >= 0");
  return GtnParams{(p.tau * p.mu - p.lambda) / p.tau, p.tau, 0.0, kInf};
}

double rn_normalizer(const RnParams &p) {
  if (!(p.tau > 0.0) || !(p.lambda > 0.0))
    throw ParameterError("RN requires tau > 0 and lambda > 0");
  double tail = norm_cdf((p.tau * p.mu - p.lambda) / std::sqrt(p.tau));
  return p.lambda * tail * std::exp(-p.mu * p.lambda + p.lambda * p.lambda / (2.0 * p.tau));
}

double rn_pdf(double x, const RnParams &p) {
  if (x < 0.0)
    return 0.0;
  double s = std::sqrt(p.tau);
  double normal = s * norm_pdf((x - p.mu) * s);
  return normal * p.lambda * std::exp(-p.lambda * x) / rn_normalizer(p);
}

double sample_normal(double mean, double var, Rng &rng) {
  if (!(var >= 0.0))
    throw ParameterError("normal variance must be nonnegative");
  return mean + std::sqrt(var) * std::normal_distribution<double>(0.0, 1.0)(rng);
}

double sample_gamma(double shape, double rate, Rng &rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(rate))
    throw ParameterError("Gamma requires positive shape and rate");
  return std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
}

double sample_gamma(const GammaParams &p, Rng &rng) { return sample_gamma(p.shape, p.rate, rng); }

double sample_inv_gamma(double shape, double scale, Rng &rng) {
  if (!(shape > 0.0) || !(scale > 0.0))
    throw ParameterError("inverse-Gamma requires positive shape and scale");
  return 1.0 / sample_gamma(shape, scale, rng);
}

double sample_inv_gamma(const InvGammaParams &p, Rng &rng) {
  return sample_inv_gamma(p.shape, p.scale, rng);
}

double sample_exponential(double rate, Rng &rng) {
  if (!(rate > 0.0))
    throw ParameterError("exponential rate must be positive");
  return std::exponential_distribution<double>(rate)(rng);
}

std::int64_t sample_poisson(double rate, Rng &rng) {
  if (!(rate >= 0.0))
    throw ParameterError("Poisson rate must be nonnegative");
  if (rate == 0.0)
    return 0;
  return std::poisson_distribution<std::int64_t>(rate)(rng);
}

std::int64_t sample_binomial(std::int64_t n, double p, Rng &rng) {
  if (n < 0 || !(p >= 0.0 && p <= 1.0))
    throw ParameterError("binomial requires n >= 0 and p in [0,1]");
  if (n == 0 || p == 0.0)
    return 0;
  if (p == 1.0)
    return n;
  return std::binomial_distribution<std::int64_t>(n, p)(rng);
}

Vec sample_dirichlet(const Vec &alpha, Rng &rng) {
  if (alpha.size() == 0 || (alpha.array() <= 0.0).any())
    throw ParameterError("Dirichlet concentrations must be positive");
  Vec g(alpha.size());
  for (Index k = 0; k < alpha.size(); ++k)
    g(k) = sample_gamma(alpha(k), 1.0, rng);
  double s = g.sum();
  if (s <= 0.0) {
    Index k = std::uniform_int_distribution<Index>(0, alpha.size() - 1)(rng);
    g.setZero();
    g(k) = 1.0;
    return g;
  }
  return g / s;
}

std::vector<std::int64_t> sample_multinomial(std::int64_t n, const Vec &prob, Rng &rng) {
  if (n < 0 || prob.size() == 0 || (prob.array() < 0.0).any())
    throw ParameterError("multinomial requires n >= 0 and nonnegative probabilities");
  double total = prob.sum();
  if (!(total > 0.0))
    throw ParameterError("multinomial probabilities sum to zero");
  std::vector<std::int64_t> out(static_cast<std::size_t>(prob.size()), 0);
  std::int64_t left = n;
  double mass = total;
  for (Index k = 0; k + 1 < prob.size() && left > 0; ++k) {
    double q = mass > 0.0 ? std::clamp(prob(k) / mass, 0.0, 1.0) : 0.0;
    std::int64_t x = sample_binomial(left, q, rng);
    out[static_cast<std::size_t>(k)] = x;
    left -= x;
    mass -= prob(k);
  }
  out.back() += left;
  return out;
}

Vec sample_mvn_precision(const Vec &mean, const Mat &precision, Rng &rng) {
  Eigen::LLT<Mat> llt(precision);
  if (llt.info() != Eigen::Success)
    throw LinearSolveError("precision matrix is not positive definite");
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec e(mean.size());
  for (Index i = 0; i < e.size(); ++i)
    e(i) = nd(rng);
  // precision = L L^T, so x = mean + L^-T e has covariance precision^-1.
  Vec x = llt.matrixU().solve(e);
  return mean + x;
}

Vec sample_mvn_covariance(const Vec &mean, const Mat &cov, Rng &rng) {
  Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success)
    throw LinearSolveError("covariance matrix is not positive definite");
  std::normal_distribution<double> nd(0.0, 1.0);
  Vec e(mean.size());
  for (Index i = 0; i < e.size(); ++i)
    e(i) = nd(rng);
  return mean + llt.matrixL() * e;
}

Mat sample_wishart(const Mat &scale, double nu, Rng &rng) {
  Index D = scale.rows();
  if (scale.cols() != D || D == 0)
    throw DimensionError("Wishart scale must be square");
  if (!(nu > static_cast<double>(D) - 1.0))
    throw ParameterError("Wishart requires nu > D - 1");
  Eigen::LLT<Mat> llt(scale);
  if (llt.info() != Eigen::Success)
    throw ParameterError("Wishart scale must be positive definite");
  Mat L = llt.matrixL();
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat out = Mat::Zero(D, D);
  if (nu == std::floor(nu)) {
    Vec e(D);
    for (long t = 0; t < static_cast<long>(nu); ++t) {
      for (Index i = 0; i < D; ++i)
        e(i) = nd(rng);
      Vec x = L * e;
      out.noalias() += x * x.transpose();
    }
  } else {
    Mat B = Mat::Zero(D, D);
    for (Index i = 0; i < D; ++i) {
      B(i, i) = std::sqrt(2.0 * sample_gamma(0.5 * (nu - static_cast<double>(i)), 1.0, rng));
      for (Index j = 0; j < i; ++j)
        B(i, j) = nd(rng);
    }
    Mat LB = L * B;
    out = LB * LB.transpose();
  }
  return 0.5 * (out + out.transpose());
}

Mat sample_inverse_wishart(const Mat &S, double nu, Rng &rng) {
  Mat Sinv = S.inverse();
  Mat W = sample_wishart(0.5 * (Sinv + Sinv.transpose()), nu, rng);
  Mat out = W.inverse();
  return 0.5 * (out + out.transpose());
}

void NiwParams::validate() const {
  Index D = m0.size();
  if (S0.rows() != D || S0.cols() != D)
    throw DimensionError("NIW scale matrix must be D x D");
  if (!(kappa0 > 0.0))
    throw ParameterError("NIW kappa0 must be positive");
  if (!(nu0 > static_cast<double>(D) - 1.0))
    throw ParameterError("NIW nu0 must exceed D - 1");
  if ((S0 - S0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, S0.cwiseAbs().maxCoeff()))
    throw ParameterError("NIW scale matrix must be symmetric");
}

NiwParams NiwParams::standard(Index D) {
  return NiwParams{Vec::Zero(D), 1.0, static_cast<double>(D) + 1.0, Mat::Identity(D, D)};
}

NiwStats::NiwStats(Index D) : sum(Vec::Zero(D)), outer(Mat::Zero(D, D)) {}

void NiwStats::add(const Vec &x) {
  n += 1.0;
  sum += x;
  outer.noalias() += x * x.transpose();
}

void NiwStats::remove(const Vec &x) {
  n -= 1.0;
  sum -= x;
  outer.noalias() -= x * x.transpose();
}

NiwParams niw_posterior(const NiwParams &prior, const NiwStats &stats) {
  prior.validate();
  Index D = prior.dim();
  if (stats.sum.size() != D)
    throw DimensionError("NIW data dimension mismatch");
  if (stats.n == 0.0)
    return prior;
  NiwParams post;
  post.kappa0 = prior.kappa0 + stats.n;
  post.nu0 = prior.nu0 + stats.n;
  post.m0 = (prior.kappa0 * prior.m0 + stats.sum) / post.kappa0;
  Mat S = prior.S0 + stats.outer + prior.kappa0 * prior.m0 * prior.m0.transpose() -
          post.kappa0 * post.m0 * post.m0.transpose();
  post.S0 = 0.5 * (S + S.transpose());
  return post;
}

NiwParams niw_posterior(const NiwParams &prior, const std::vector<Vec> &data) {
  NiwStats st(prior.dim());
  for (const auto &x : data) {
    if (x.size() != prior.dim())
      throw DimensionError("NIW data dimension mismatch");
    st.add(x);
  }
  return niw_posterior(prior, st);
}

std::pair<Vec, Mat> sample_niw(const NiwParams &p, Rng &rng) {
  p.validate();
  Mat Sigma = sample_inverse_wishart(p.S0, p.nu0, rng);
  Vec mu = sample_mvn_covariance(p.m0, Sigma / p.kappa0, rng);
  return {mu, Sigma};
}

GammaParams gamma_precision_posterior(const GammaParams &prior, const MaskedMatrix &A, const Mat &B) {
  if (B.rows() != A.rows() || B.cols() != A.cols())
    throw DimensionError("residual shapes differ");
  double n = 0.0, ss = 0.0;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      if (A.mask(i, j)) {
        double r = A.values(i, j) - B(i, j);
        ss += r * r;
        n += 1.0;
      }
  return GammaParams{prior.shape + 0.5 * n, prior.rate + 0.5 * ss};
}

InvGammaParams inv_gamma_variance_posterior(const InvGammaParams &prior, const MaskedMatrix &A,
                                            const Mat &B) {
  GammaParams g = gamma_precision_posterior(GammaParams{prior.shape, prior.scale}, A, B);
  return InvGammaParams{g.shape, g.rate};
}

} // namespace bmd
