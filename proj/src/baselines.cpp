#include "bmd/baselines.hpp"

#include "bmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace bmd {

void AlsConfig::validate() const {
  if (K < 1)
    throw ParameterError("K must be at least 1");
  if (lambda_w < 0.0 || lambda_z < 0.0)
    throw ParameterError("regularization must be nonnegative");
  if (!(tol > 0.0))
    throw ParameterError("tol must be positive");
  if (max_iters < 0)
    throw ParameterError("max_iters must be nonnegative");
  if ((mode == AlsMode::gradient || mode == AlsMode::sgd) && (eta_w < 0.0 || eta_z < 0.0))
    throw ParameterError("step sizes must be nonnegative");
}

void NmfConfig::validate() const {
  if (K < 1)
    throw ParameterError("K must be at least 1");
  if (lambda_w < 0.0 || lambda_z < 0.0)
    throw ParameterError("regularization must be nonnegative");
  if (!(eps > 0.0))
    throw ParameterError("eps must be positive");
  if (!(tol > 0.0))
    throw ParameterError("tol must be positive");
  if (max_iters < 0)
    throw ParameterError("max_iters must be nonnegative");
}

double als_objective(const MaskedMatrix &A, const FactorState &S, double lambda_w, double lambda_z) {
  return frobenius_loss(A, S) + lambda_w * S.W.squaredNorm() + lambda_z * S.Z.squaredNorm();
}

namespace {

struct Layout {
  std::vector<Index> free_w; // columns of W that are updated
  std::vector<Index> free_z; // rows of Z that are updated
};

Layout make_layout(Index Kt, bool bias) {
  Layout L;
  for (Index k = 0; k < Kt; ++k) {
    if (!bias || k != Kt - 1)
      L.free_w.push_back(k);
    if (!bias || k != 0)
      L.free_z.push_back(k);
  }
  return L;
}

double penalized(const MaskedMatrix &A, const FactorState &S, const Layout &L, double lw, double lz) {
  double p = 0.0;
  for (Index k : L.free_w)
    p += lw * S.W.col(k).squaredNorm();
  for (Index k : L.free_z)
    p += lz * S.Z.row(k).squaredNorm();
  return frobenius_loss(A, S) + p;
}

Vec cholesky_solve(const Mat &G, const Vec &rhs) {
  Eigen::LLT<Mat> llt(G);
  if (llt.info() != Eigen::Success)
    throw LinearSolveError("normal matrix is singular; use lambda > 0");
  return llt.solve(rhs);
}

// Solves every column of Z given W; fixed rows of Z contribute to the target.
void solve_z(const MaskedMatrix &A, FactorState &S, const Layout &L, double lambda) {
  Index F = static_cast<Index>(L.free_z.size());
  Index Kt = S.W.cols();
  std::vector<bool> is_free(static_cast<std::size_t>(Kt), false);
  for (Index k : L.free_z)
    is_free[static_cast<std::size_t>(k)] = true;
  Vec u(F);
  for (Index n = 0; n < A.cols(); ++n) {
    Mat G = lambda * Mat::Identity(F, F);
    Vec rhs = Vec::Zero(F);
    for (Index m = 0; m < A.rows(); ++m) {
      if (!A.mask(m, n))
        continue;
      double t = A.values(m, n);
      for (Index k = 0; k < Kt; ++k)
        if (!is_free[static_cast<std::size_t>(k)])
          t -= S.W(m, k) * S.Z(k, n);
      for (Index f = 0; f < F; ++f)
        u(f) = S.W(m, L.free_z[static_cast<std::size_t>(f)]);
      G.noalias() += u * u.transpose();
      rhs += t * u;
    }
    Vec z = cholesky_solve(G, rhs);
    for (Index f = 0; f < F; ++f)
      S.Z(L.free_z[static_cast<std::size_t>(f)], n) = z(f);
  }
}

void solve_w(const MaskedMatrix &A, FactorState &S, const Layout &L, double lambda) {
  Index F = static_cast<Index>(L.free_w.size());
  Index Kt = S.W.cols();
  std::vector<bool> is_free(static_cast<std::size_t>(Kt), false);
  for (Index k : L.free_w)
    is_free[static_cast<std::size_t>(k)] = true;
  Vec u(F);
  for (Index m = 0; m < A.rows(); ++m) {
    Mat G = lambda * Mat::Identity(F, F);
    Vec rhs = Vec::Zero(F);
    for (Index n = 0; n < A.cols(); ++n) {
      if (!A.mask(m, n))
        continue;
      double t = A.values(m, n);
      for (Index k = 0; k < Kt; ++k)
        if (!is_free[static_cast<std::size_t>(k)])
          t -= S.W(m, k) * S.Z(k, n);
      for (Index f = 0; f < F; ++f)
        u(f) = S.Z(L.free_w[static_cast<std::size_t>(f)], n);
      G.noalias() += u * u.transpose();
      rhs += t * u;
    }
    Vec w = cholesky_solve(G, rhs);
    for (Index f = 0; f < F; ++f)
      S.W(m, L.free_w[static_cast<std::size_t>(f)]) = w(f);
  }
}

Vec normalized(const Vec &g) {
  double nrm = g.norm();
  return nrm < 1e-14 ? g : Vec(g / nrm);
}

void gradient_sweep(const MaskedMatrix &A, FactorState &S, const Layout &L, const AlsConfig &cfg) {
  Mat R = masked_residual(A, S.W * S.Z);
  for (Index n = 0; n < A.cols(); ++n) {
    Vec g = Vec::Zero(S.Z.rows());
    for (Index m = 0; m < A.rows(); ++m)
      if (A.mask(m, n))
        g -= 2.0 * R(m, n) * S.W.row(m).transpose();
    for (Index k : L.free_z)
      g(k) += 2.0 * cfg.lambda_z * S.Z(k, n);
    for (Index k = 0; k < g.size(); ++k)
      if (std::find(L.free_z.begin(), L.free_z.end(), k) == L.free_z.end())
        g(k) = 0.0;
    S.Z.col(n) -= cfg.eta_z * normalized(g);
  }
  R = masked_residual(A, S.W * S.Z);
  for (Index m = 0; m < A.rows(); ++m) {
    Vec g = Vec::Zero(S.W.cols());
    for (Index n = 0; n < A.cols(); ++n)
      if (A.mask(m, n))
        g -= 2.0 * R(m, n) * S.Z.col(n);
    for (Index k : L.free_w)
      g(k) += 2.0 * cfg.lambda_w * S.W(m, k);
    for (Index k = 0; k < g.size(); ++k)
      if (std::find(L.free_w.begin(), L.free_w.end(), k) == L.free_w.end())
        g(k) = 0.0;
    S.W.row(m) -= cfg.eta_w * normalized(g).transpose();
  }
}

bool converged(double prev, double cur, double tol) {
  double scale = std::max(std::abs(prev), 1e-300);
  return std::abs(prev - cur) / scale < tol;
}

} // namespace

std::pair<Vec, Vec> sgd_gradients(const Vec &w, const Vec &z, double a, double lambda_w,
                                  double lambda_z) {
  double r = a - w.dot(z);
  Vec gw = -2.0 * r * z + 2.0 * lambda_w * w;
  Vec gz = -2.0 * r * w + 2.0 * lambda_z * z;
  return {gw, gz};
}

void als_sgd_step(FactorState &S, double a_mn, Index m, Index n, const AlsConfig &cfg) {
  Vec w = S.W.row(m).transpose();
  Vec z = S.Z.col(n);
  auto [gw, gz] = sgd_gradients(w, z, a_mn, cfg.lambda_w, cfg.lambda_z);
  S.Z.col(n) = z - cfg.eta_z * normalized(gz);
  S.W.row(m) = (w - cfg.eta_w * normalized(gw)).transpose();
}

FitResult als_fit(const MaskedMatrix &A, const AlsConfig &cfg, Rng &rng) {
  cfg.validate();
  Index Kt = cfg.bias ? cfg.K + 2 : cfg.K;
  std::normal_distribution<double> nd(0.0, 1.0);
  FactorState S;
  S.W.resize(A.rows(), Kt);
  S.Z.resize(Kt, A.cols());
  for (Index i = 0; i < S.W.size(); ++i)
    S.W.data()[i] = nd(rng);
  for (Index i = 0; i < S.Z.size(); ++i)
    S.Z.data()[i] = nd(rng);
  if (cfg.bias) {
    S.W.col(Kt - 1).setOnes();
    S.Z.row(0).setOnes();
  }
  if (cfg.mode == AlsMode::sgd) {
    // Visiting order for stochastic sweeps is drawn from the same generator.
    FitResult res;
    res.state = S;
    Layout L = make_layout(Kt, cfg.bias);
    res.loss.push_back(frobenius_loss(A, res.state));
    res.objective.push_back(penalized(A, res.state, L, cfg.lambda_w, cfg.lambda_z));
    std::vector<std::pair<Index, Index>> cells;
    for (Index m = 0; m < A.rows(); ++m)
      for (Index n = 0; n < A.cols(); ++n)
        if (A.mask(m, n))
          cells.emplace_back(m, n);
    for (int it = 0; it < cfg.max_iters; ++it) {
      std::shuffle(cells.begin(), cells.end(), rng);
      for (auto [m, n] : cells) {
        Vec wfix = res.state.W.row(m).transpose();
        Vec zfix = res.state.Z.col(n);
        als_sgd_step(res.state, A.values(m, n), m, n, cfg);
        if (cfg.bias) {
          res.state.W(m, Kt - 1) = wfix(Kt - 1);
          res.state.Z(0, n) = zfix(0);
        }
      }
      res.loss.push_back(frobenius_loss(A, res.state));
      res.objective.push_back(penalized(A, res.state, L, cfg.lambda_w, cfg.lambda_z));
      res.sweeps = it + 1;
    }
    return res;
  }
  return als_fit(A, cfg, std::move(S));
}

FitResult als_fit(const MaskedMatrix &A, const AlsConfig &cfg, FactorState init) {
  cfg.validate();
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
  if (cfg.mode == AlsMode::full && !A.fully_observed())
    throw InputError("full mode requires a fully observed matrix");
  init.check_shapes(A.rows(), A.cols());
  Index Kt = init.W.cols();
  Layout L = make_layout(Kt, cfg.bias);
  FitResult res;
  res.state = std::move(init);
  res.loss.push_back(frobenius_loss(A, res.state));
  res.objective.push_back(penalized(A, res.state, L, cfg.lambda_w, cfg.lambda_z));
  for (int it = 0; it < cfg.max_iters; ++it) {
    if (cfg.mode == AlsMode::gradient) {
      gradient_sweep(A, res.state, L, cfg);
    } else if (cfg.mode == AlsMode::sgd) {
      throw ParameterError("sgd mode needs a generator for the visiting order");
    } else {
      solve_z(A, res.state, L, cfg.lambda_z);
      solve_w(A, res.state, L, cfg.lambda_w);
    }
    res.loss.push_back(frobenius_loss(A, res.state));
    res.objective.push_back(penalized(A, res.state, L, cfg.lambda_w, cfg.lambda_z));
    res.sweeps = it + 1;
    if (converged(res.objective[res.objective.size() - 2], res.objective.back(), cfg.tol))
      break;
  }
  return res;
}

FitResult nmf_mu_fit(const MaskedMatrix &A, const NmfConfig &cfg, Rng &rng) {
  cfg.validate();
  std::uniform_real_distribution<double> ud(0.0, 1.0);
  FactorState S;
  S.W.resize(A.rows(), cfg.K);
  S.Z.resize(cfg.K, A.cols());
  for (Index i = 0; i < S.W.size(); ++i)
    S.W.data()[i] = ud(rng);
  for (Index i = 0; i < S.Z.size(); ++i)
    S.Z.data()[i] = ud(rng);
  return nmf_mu_fit(A, cfg, std::move(S));
}

FitResult nmf_mu_fit(const MaskedMatrix &A, const NmfConfig &cfg, FactorState init) {
  cfg.validate();
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
  init.check_shapes(A.rows(), A.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      if (A.mask(i, j) && !(A.values(i, j) >= 0.0))
        throw InputError("MU-NMF requires nonnegative observed entries");
  if ((init.W.array() < 0.0).any() || (init.Z.array() < 0.0).any())
    throw ParameterError("MU-NMF requires nonnegative initial factors");
  const Index M = A.rows(), N = A.cols(), K = init.W.cols();
  FitResult res;
  res.state = std::move(init);
  Mat &W = res.state.W;
  Mat &Z = res.state.Z;
  auto objective = [&] {
    return frobenius_loss(A, res.state) + cfg.lambda_w * W.squaredNorm() +
           cfg.lambda_z * Z.squaredNorm();
  };
  res.loss.push_back(frobenius_loss(A, res.state));
  res.objective.push_back(objective());
  Mat P = W * Z;
  Vec znew(N), wnew(M);
  for (int it = 0; it < cfg.max_iters; ++it) {
    for (Index k = 0; k < K; ++k) {
      for (Index n = 0; n < N; ++n) {
        double num = 0.0, den = 0.0;
        for (Index m = 0; m < M; ++m)
          if (A.mask(m, n)) {
            num += W(m, k) * A.values(m, n);
            den += W(m, k) * P(m, n);
          }
        num -= cfg.lambda_z * Z(k, n);
        znew(n) = std::max(0.0, Z(k, n) * num / (den + cfg.eps));
      }
      for (Index n = 0; n < N; ++n) {
        double d = znew(n) - Z(k, n);
        if (d != 0.0)
          P.col(n) += d * W.col(k);
        Z(k, n) = znew(n);
      }
      for (Index m = 0; m < M; ++m) {
        double num = 0.0, den = 0.0;
        for (Index n = 0; n < N; ++n)
          if (A.mask(m, n)) {
            num += A.values(m, n) * Z(k, n);
            den += P(m, n) * Z(k, n);
          }
        num -= cfg.lambda_w * W(m, k);
        wnew(m) = std::max(0.0, W(m, k) * num / (den + cfg.eps));
      }
      for (Index m = 0; m < M; ++m) {
        double d = wnew(m) - W(m, k);
        if (d != 0.0)
          P.row(m) += d * Z.row(k);
        W(m, k) = wnew(m);
      }
    }
    P = W * Z;
    res.loss.push_back(frobenius_loss(A, res.state));
    res.objective.push_back(objective());
    res.sweeps = it + 1;
    if (converged(res.objective[res.objective.size() - 2], res.objective.back(), cfg.tol))
      break;
  }
  return res;
}

} // namespace bmd
