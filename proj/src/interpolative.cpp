#include "bmd/interpolative.hpp"

#include "bmd/errors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace bmd {

namespace {

using ColMat = Eigen::MatrixXd;

Mat select_cols(const Mat &A, const std::vector<Index> &J) {
  Mat out(A.rows(), static_cast<Index>(J.size()));
  for (std::size_t c = 0; c < J.size(); ++c)
    out.col(static_cast<Index>(c)) = A.col(J[c]);
  return out;
}

Mat select_rows(const Mat &A, const std::vector<Index> &I) {
  Mat out(static_cast<Index>(I.size()), A.cols());
  for (std::size_t r = 0; r < I.size(); ++r)
    out.row(static_cast<Index>(r)) = A.row(I[r]);
  return out;
}

double binomial_count(Index n, Index r) {
  double c = 1.0;
  for (Index i = 1; i <= r; ++i)
    c = c * static_cast<double>(n - r + i) / static_cast<double>(i);
  return c;
}

// Advances a sorted R-subset of {0..N-1} in lexicographic order.
bool next_combination(std::vector<Index> &c, Index N) {
  Index R = static_cast<Index>(c.size());
  for (Index i = R - 1; i >= 0; --i) {
    auto u = static_cast<std::size_t>(i);
    if (c[u] < N - R + i) {
      ++c[u];
      for (Index j = i + 1; j < R; ++j)
        c[static_cast<std::size_t>(j)] = c[static_cast<std::size_t>(j - 1)] + 1;
      return true;
    }
  }
  return false;
}

double det_of(const Mat &B) {
  if (B.rows() == 0)
    return 1.0;
  return Eigen::PartialPivLU<ColMat>(ColMat(B)).determinant();
}

} // namespace

Index numerical_rank(const Mat &A, double rel_tol) {
  if (A.size() == 0)
    return 0;
  Eigen::JacobiSVD<ColMat> svd{ColMat(A)};
  const Vec &s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0)
    return 0;
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > rel_tol * s(0))
      ++r;
  return r;
}

Mat cramer_expansion(const Mat &Ctil, const Mat &Mblk) {
  Index R = Ctil.rows();
  if (Ctil.cols() != R || Mblk.rows() != R)
    throw DimensionError("Cramer expansion needs a square R x R block and R-row right-hand side");
  double d = det_of(Ctil);
  if (d == 0.0)
    throw DegenerateError("Cramer expansion with a singular block");
  Mat E(R, Mblk.cols());
  for (Index l = 0; l < Mblk.cols(); ++l)
    for (Index k = 0; k < R; ++k) {
      Mat T = Ctil;
      T.col(k) = Mblk.col(l);
      E(k, l) = det_of(T) / d;
    }
  return E;
}

ColumnId exact_column_id(const Mat &A, Index R) {
  Index N = A.cols();
  if (R < 1 || R > std::min(A.rows(), N))
    throw RankError("requested rank is out of range");
  Eigen::JacobiSVD<ColMat> svd(ColMat(A), Eigen::ComputeThinV);
  const Vec &s = svd.singularValues();
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(0) > 0.0 && s(i) > 1e-8 * s(0))
      ++rank;
  if (rank != R)
    throw RankError("numerical rank " + std::to_string(rank) + " differs from requested " +
                    std::to_string(R));
  if (binomial_count(N, R) > 1e5)
    throw InfeasibleError("exhaustive search infeasible: C(N,R) exceeds 1e5");
  // Row-basis factor: A = U_R * F, and determinant ratios of F equal those of any row basis.
  Mat F = s.head(R).asDiagonal() * svd.matrixV().leftCols(R).transpose();
  std::vector<Index> comb(static_cast<std::size_t>(R));
  std::iota(comb.begin(), comb.end(), Index{0});
  std::vector<Index> best = comb;
  double best_det = -1.0;
  do {
    double d = std::abs(det_of(select_cols(F, comb)));
    if (d > best_det * (1.0 + 1e-10)) {
      best_det = d;
      best = comb;
    }
  } while (next_combination(comb, N));
  std::vector<Index> rest;
  for (Index j = 0, p = 0; j < N; ++j) {
    if (p < R && best[static_cast<std::size_t>(p)] == j) {
      ++p;
      continue;
    }
    rest.push_back(j);
  }
  Mat E = cramer_expansion(select_cols(F, best), select_cols(F, rest));
  ColumnId out;
  out.J = best;
  out.C = select_cols(A, best);
  out.W = Mat::Zero(R, N);
  for (Index k = 0; k < R; ++k)
    out.W(k, best[static_cast<std::size_t>(k)]) = 1.0;
  for (std::size_t c = 0; c < rest.size(); ++c)
    out.W.col(rest[c]) = E.col(static_cast<Index>(c));
  return out;
}

RowId exact_row_id(const Mat &A, Index R) {
  ColumnId c = exact_column_id(A.transpose(), R);
  return RowId{c.W.transpose(), c.C.transpose(), c.J};
}

double skeleton_check(const Mat &A, const std::vector<Index> &I, const std::vector<Index> &J) {
  if (I.size() != J.size() || I.empty())
    throw DimensionError("skeleton needs equally many rows and columns");
  for (Index i : I)
    if (i < 0 || i >= A.rows())
      throw DimensionError("row index out of range");
  for (Index j : J)
    if (j < 0 || j >= A.cols())
      throw DimensionError("column index out of range");
  Mat C = select_cols(A, J);
  Mat Rw = select_rows(A, I);
  Mat U = select_cols(Rw, J);
  Eigen::FullPivLU<ColMat> lu{ColMat(U)};
  lu.setThreshold(1e-12);
  if (!lu.isInvertible())
    throw DegenerateError("singular intersection submatrix");
  ColMat X = lu.solve(ColMat(Rw));
  double nrm = A.norm();
  if (nrm == 0.0)
    throw DegenerateError("zero matrix");
  return (A - C * Mat(X)).norm() / nrm;
}

void IdHyper::validate(Index N) const {
  if (!(a < b))
    throw ParameterError("ID bounds require a < b");
  if (!(alpha_sigma > 0.0 && beta_sigma > 0.0 && tau > 0.0 && tau_mu > 0.0 && alpha_t > 0.0 &&
        beta_t > 0.0))
    throw ParameterError("ID hyperparameters must be positive");
  if (nu < 0)
    throw ParameterError("nu must be nonnegative");
  if (importance.size() != 0) {
    if (importance.size() != N)
      throw DimensionError("importance vector needs one entry per column");
    if ((importance.array() <= 0.0).any() || (importance.array() >= 1.0).any())
      throw ParameterError("importance entries must lie in (0, 1)");
  }
}

Vec importance_from_scores(const Vec &raw) {
  Vec p(raw.size());
  for (Index i = 0; i < raw.size(); ++i)
    p(i) = std::clamp(1.0 / (1.0 + std::exp(-raw(i))), 1e-6, 1.0 - 1e-6);
  return p;
}

std::vector<Index> IdState::J() const {
  std::vector<Index> out;
  for (std::size_t j = 0; j < r.size(); ++j)
    if (r[j])
      out.push_back(static_cast<Index>(j));
  return out;
}

std::vector<Index> IdState::I() const {
  std::vector<Index> out;
  for (std::size_t j = 0; j < r.size(); ++j)
    if (!r[j])
      out.push_back(static_cast<Index>(j));
  return out;
}

namespace {

Vec column_values(const MaskedMatrix &A, Index j) {
  Vec c(A.rows());
  for (Index i = 0; i < A.rows(); ++i)
    c(i) = A.mask(i, j) ? A.values(i, j) : 0.0;
  return c;
}

} // namespace

void IdState::rebuild_x(const MaskedMatrix &A) {
  X = Mat::Zero(A.rows(), A.cols());
  for (std::size_t j = 0; j < r.size(); ++j)
    if (r[j])
      X.col(static_cast<Index>(j)) = column_values(A, static_cast<Index>(j));
}

IdState make_id_state(const MaskedMatrix &A, const std::vector<char> &r, const IdHyper &h, Rng &rng) {
  Index N = A.cols();
  if (static_cast<Index>(r.size()) != N)
    throw DimensionError("state vector needs one entry per column");
  IdState st;
  st.r = r;
  st.mu = Mat::Constant(N, N, h.mu);
  st.tau = Mat::Constant(N, N, h.tau);
  st.Y.resize(N, N);
  for (Index k = 0; k < N; ++k)
    for (Index l = 0; l < N; ++l)
      st.Y(k, l) = sample_gtn(GtnParams{h.mu, h.tau, h.a, h.b}, rng);
  st.rebuild_x(A);
  return st;
}

namespace {

NormalPost y_post(const MaskedMatrix &A, const IdState &st, const Mat &E, Index k, Index l) {
  double sxx = 0.0, sxr = 0.0;
  double y = st.Y(k, l);
  for (Index i = 0; i < A.rows(); ++i) {
    if (!A.mask(i, l))
      continue;
    double x = st.X(i, k);
    if (x == 0.0)
      continue;
    sxx += x * x;
    sxr += x * (E(i, l) + x * y);
  }
  double t = sxx / st.sigma2 + st.tau(k, l);
  return {(sxr / st.sigma2 + st.tau(k, l) * st.mu(k, l)) / t, 1.0 / t};
}

// Change in observed SSE when column `rem` leaves the basis and column `add` joins it.
// A swap (both given) hands the coefficient row of `rem` to `add`.
double delta_sse(const MaskedMatrix &A, const IdState &st, const Mat &E, Index rem, Index add) {
  double d = 0.0;
  Index row = rem >= 0 ? rem : add;
  for (Index i = 0; i < A.rows(); ++i) {
    double xr = rem >= 0 ? st.X(i, rem) : 0.0;
    double xa = add >= 0 && A.mask(i, add) ? A.values(i, add) : 0.0;
    for (Index l = 0; l < A.cols(); ++l) {
      if (!A.mask(i, l))
        continue;
      double e = E(i, l);
      double back = rem >= 0 ? xr * st.Y(rem, l) : 0.0;
      double take = add >= 0 ? xa * st.Y(row, l) : 0.0;
      double en = e + (back - take);
      d += en * en - e * e;
    }
  }
  return d;
}

void apply_change(const MaskedMatrix &A, IdState &st, Mat &E, Index rem, Index add) {
  if (rem >= 0) {
    for (Index i = 0; i < A.rows(); ++i)
      for (Index l = 0; l < A.cols(); ++l)
        if (A.mask(i, l))
          E(i, l) += st.X(i, rem) * st.Y(rem, l);
    st.r[static_cast<std::size_t>(rem)] = 0;
    st.X.col(rem).setZero();
  }
  if (rem >= 0 && add >= 0) {
    st.Y.row(rem).swap(st.Y.row(add));
    st.mu.row(rem).swap(st.mu.row(add));
    st.tau.row(rem).swap(st.tau.row(add));
  }
  if (add >= 0) {
    st.r[static_cast<std::size_t>(add)] = 1;
    st.X.col(add) = column_values(A, add);
    for (Index i = 0; i < A.rows(); ++i)
      for (Index l = 0; l < A.cols(); ++l)
        if (A.mask(i, l))
          E(i, l) -= st.X(i, add) * st.Y(add, l);
  }
}

double prior_log_ratio_swap(const IdHyper &h, Index j, Index i) {
  if (h.importance.size() == 0)
    return 0.0;
  double pj = h.importance(j), pi = h.importance(i);
  return std::log(((1.0 - pj) * pi) / (pj * (1.0 - pi)));
}

bool accept(double log_odds, Rng &rng) {
  double p = 1.0 / (1.0 + std::exp(-log_odds));
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

double swap_log_odds_e(const IdState &st, Index j, Index i, const MaskedMatrix &A, const IdHyper &h,
                       const Mat &E) {
  return -delta_sse(A, st, E, j, i) / (2.0 * st.sigma2) + prior_log_ratio_swap(h, j, i);
}

double ard_log_odds_e(const IdState &st, Index j, const MaskedMatrix &A, const IdHyper &h,
                      const Mat &E) {
  bool on = st.r[static_cast<std::size_t>(j)] != 0;
  double d = on ? delta_sse(A, st, E, j, -1) : delta_sse(A, st, E, -1, j);
  double prior = 0.0;
  if (h.importance.size() != 0) {
    double p = h.importance(j);
    prior = on ? std::log((1.0 - p) / p) : std::log(p / (1.0 - p));
  }
  return -d / (2.0 * st.sigma2) + prior;
}

void check_state(const MaskedMatrix &A, const IdState &st) {
  Index N = A.cols();
  if (static_cast<Index>(st.r.size()) != N || st.Y.rows() != N || st.Y.cols() != N ||
      st.X.rows() != A.rows() || st.X.cols() != N)
    throw DimensionError("ID state does not match the data");
  if (!(st.sigma2 > 0.0))
    throw ParameterError("sigma2 must be positive");
}

} // namespace

NormalPost gbt_y_posterior(Index k, Index l, const MaskedMatrix &A, const IdState &st) {
  check_state(A, st);
  return y_post(A, st, masked_residual(A, st.X * st.Y), k, l);
}

double gbt_sample_y(Index k, Index l, const MaskedMatrix &A, const IdState &st, const IdHyper &h,
                    Rng &rng) {
  NormalPost p = gbt_y_posterior(k, l, A, st);
  return sample_gtn(GtnParams{p.mean, 1.0 / p.var, h.a, h.b}, rng);
}

double swap_log_odds(const IdState &st, Index j, Index i, const MaskedMatrix &A, const IdHyper &h) {
  check_state(A, st);
  if (!st.r[static_cast<std::size_t>(j)] || st.r[static_cast<std::size_t>(i)])
    throw ParameterError("swap needs j selected and i unselected");
  return swap_log_odds_e(st, j, i, A, h, masked_residual(A, st.X * st.Y));
}

bool gbt_swap_state(IdState &st, Index j, Index i, const MaskedMatrix &A, const IdHyper &h, Rng &rng) {
  IdHyper u = h;
  u.importance.resize(0);
  Mat E = masked_residual(A, st.X * st.Y);
  check_state(A, st);
  if (!accept(swap_log_odds_e(st, j, i, A, u, E), rng))
    return false;
  apply_change(A, st, E, j, i);
  return true;
}

bool iid_swap(IdState &st, Index j, Index i, const MaskedMatrix &A, const IdHyper &h, const Vec &p,
              Rng &rng) {
  IdHyper u = h;
  u.importance = p;
  u.validate(A.cols());
  check_state(A, st);
  Mat E = masked_residual(A, st.X * st.Y);
  if (!accept(swap_log_odds_e(st, j, i, A, u, E), rng))
    return false;
  apply_change(A, st, E, j, i);
  return true;
}

double ard_log_odds(const IdState &st, Index j, const MaskedMatrix &A, const IdHyper &h) {
  check_state(A, st);
  return ard_log_odds_e(st, j, A, h, masked_residual(A, st.X * st.Y));
}

bool ard_flip(IdState &st, Index j, const MaskedMatrix &A, const IdHyper &h, Rng &rng) {
  check_state(A, st);
  Mat E = masked_residual(A, st.X * st.Y);
  if (!accept(ard_log_odds_e(st, j, A, h, E), rng))
    return false;
  if (st.r[static_cast<std::size_t>(j)])
    apply_change(A, st, E, j, -1);
  else
    apply_change(A, st, E, -1, j);
  return true;
}

ColumnId post_process(const MaskedMatrix &A, const IdState &st) {
  std::vector<Index> J = st.J();
  ColumnId out;
  out.J = J;
  out.C = Mat(A.rows(), static_cast<Index>(J.size()));
  for (std::size_t c = 0; c < J.size(); ++c)
    out.C.col(static_cast<Index>(c)) = column_values(A, J[c]);
  out.W = Mat(static_cast<Index>(J.size()), A.cols());
  for (std::size_t c = 0; c < J.size(); ++c)
    out.W.row(static_cast<Index>(c)) = st.Y.row(J[c]);
  for (std::size_t c = 0; c < J.size(); ++c) {
    out.W.col(J[c]).setZero();
    out.W(static_cast<Index>(c), J[c]) = 1.0;
  }
  return out;
}

double IdTrace::post_burn_in_mse() const {
  std::size_t start = static_cast<std::size_t>(config.burn_in);
  if (mse.size() <= start)
    throw ParameterError("no post-burn-in iterations");
  double s = 0.0;
  for (std::size_t i = start; i < mse.size(); ++i)
    s += mse[i];
  return s / static_cast<double>(mse.size() - start);
}

double IdTrace::selection_frequency(Index j) const {
  if (selections.empty())
    throw ParameterError("no retained selections");
  double c = 0.0;
  for (const auto &J : selections)
    if (std::find(J.begin(), J.end(), j) != J.end())
      c += 1.0;
  return c / static_cast<double>(selections.size());
}

Index IdTrace::modal_rank() const {
  if (selections.empty())
    throw ParameterError("no retained selections");
  std::map<Index, int> counts;
  for (const auto &J : selections)
    ++counts[static_cast<Index>(J.size())];
  Index best = 0;
  int bc = -1;
  for (auto [k, c] : counts)
    if (c > bc) {
      bc = c;
      best = k;
    }
  return best;
}

namespace {

struct IdChain {
  IdVariant v;
  const MaskedMatrix &A;
  IdHyper h;
  Rng rng;
  IdState st;
  Mat E;
  bool nested;
  // Proposal pair for the aggressive variant.
  IdState st2;
  Mat E2;

  IdChain(IdVariant var, const MaskedMatrix &a, Index K, const IdHyper &hy, std::uint64_t seed,
          IdInit init)
      : v(var), A(a), h(hy), rng(seed) {
    Index N = A.cols();
    nested = v == IdVariant::GBTN || v == IdVariant::GBTN_ARD;
    bool ard = v == IdVariant::GBT_ARD || v == IdVariant::GBTN_ARD;
    if (v != IdVariant::IID && !ard && h.importance.size() != 0)
      h.importance.resize(0);
    std::vector<char> r(static_cast<std::size_t>(N), 0);
    if (ard) {
      if (init == IdInit::all) {
        std::fill(r.begin(), r.end(), 1);
      } else {
        std::bernoulli_distribution bd(0.5);
        for (auto &x : r)
          x = bd(rng) ? 1 : 0;
        if (std::find(r.begin(), r.end(), 1) == r.end())
          r[static_cast<std::size_t>(std::uniform_int_distribution<Index>(0, N - 1)(rng))] = 1;
      }
    } else {
      if (K < 1 || K > N)
        throw ParameterError("K must lie in [1, N]");
      if (init == IdInit::all && K != N)
        throw ParameterError("all-columns start needs K = N");
      std::vector<Index> idx(static_cast<std::size_t>(N));
      std::iota(idx.begin(), idx.end(), Index{0});
      std::shuffle(idx.begin(), idx.end(), rng);
      for (Index c = 0; c < K; ++c)
        r[static_cast<std::size_t>(idx[static_cast<std::size_t>(c)])] = 1;
    }
    st = make_id_state(A, r, h, rng);
    E = masked_residual(A, st.X * st.Y);
    st.sigma2 = draw_sigma2(E);
    if (v == IdVariant::GBT_aggressive)
      propose();
  }

  double draw_sigma2(const Mat &R) {
    return sample_inv_gamma(0.5 * static_cast<double>(A.n_observed()) + h.alpha_sigma,
                            0.5 * R.squaredNorm() + h.beta_sigma, rng);
  }

  // Uniform j from J and i from I; false when either set is empty.
  bool pick_pair(const IdState &s, Index &j, Index &i) {
    auto J = s.J(), I = s.I();
    if (J.empty() || I.empty())
      return false;
    j = J[static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, J.size() - 1)(rng))];
    i = I[static_cast<std::size_t>(std::uniform_int_distribution<std::size_t>(0, I.size() - 1)(rng))];
    return true;
  }

  void y_sweep(IdState &s, Mat &R) {
    Index N = A.cols();
    for (Index k = 0; k < N; ++k)
      for (Index l = 0; l < N; ++l) {
        NormalPost p = y_post(A, s, R, k, l);
        double y = sample_gtn(GtnParams{p.mean, 1.0 / p.var, h.a, h.b}, rng);
        double d = y - s.Y(k, l);
        if (d != 0.0)
          for (Index i = 0; i < A.rows(); ++i)
            if (A.mask(i, l))
              R(i, l) -= s.X(i, k) * d;
        s.Y(k, l) = y;
        if (nested) {
          NormalPost pm{(s.tau(k, l) * y + h.tau_mu * h.mu_mu) / (s.tau(k, l) + h.tau_mu),
                        1.0 / (s.tau(k, l) + h.tau_mu)};
          s.mu(k, l) = sample_normal(pm.mean, pm.var, rng);
          double dev = y - s.mu(k, l);
          s.tau(k, l) = sample_gamma(h.alpha_t + 0.5, h.beta_t + 0.5 * dev * dev, rng);
        }
      }
  }

  void propose() {
    st2 = st;
    E2 = E;
    Index j, i;
    if (pick_pair(st2, j, i))
      apply_change(A, st2, E2, j, i);
  }

  void iterate() {
    E = masked_residual(A, st.X * st.Y);
    switch (v) {
    case IdVariant::GBT:
    case IdVariant::GBTN:
    case IdVariant::IID: {
      Index j, i;
      if (pick_pair(st, j, i) && accept(swap_log_odds_e(st, j, i, A, h, E), rng))
        apply_change(A, st, E, j, i);
      st.rebuild_x(A);
      st.sigma2 = draw_sigma2(E);
      y_sweep(st, E);
      break;
    }
    case IdVariant::GBT_ARD:
    case IdVariant::GBTN_ARD: {
      for (Index j = 0; j < A.cols(); ++j)
        if (accept(ard_log_odds_e(st, j, A, h, E), rng)) {
          if (st.r[static_cast<std::size_t>(j)])
            apply_change(A, st, E, j, -1);
          else
            apply_change(A, st, E, -1, j);
        }
      st.rebuild_x(A);
      st.sigma2 = draw_sigma2(E);
      for (int s = 0; s < h.nu; ++s)
        y_sweep(st, E);
      break;
    }
    case IdVariant::GBT_aggressive: {
      E2 = masked_residual(A, st2.X * st2.Y);
      double lo = -(E2.squaredNorm() - E.squaredNorm()) / (2.0 * st.sigma2);
      if (accept(lo, rng)) {
        st2.sigma2 = st.sigma2;
        st = st2;
        E = E2;
      }
      propose();
      st.sigma2 = draw_sigma2(E);
      st2.sigma2 = st.sigma2;
      y_sweep(st, E);
      y_sweep(st2, E2);
      break;
    }
    }
    E = masked_residual(A, st.X * st.Y);
  }

  double mse() const { return E.squaredNorm() / static_cast<double>(A.n_observed()); }
};

} // namespace

IdTrace fit_id(IdVariant variant, const MaskedMatrix &A, Index K, const IdHyper &h,
               const GibbsConfig &cfg, IdInit init) {
  cfg.validate();
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
  h.validate(A.cols());
  IdChain ch(variant, A, K, h, cfg.seed, init);
  IdTrace tr;
  tr.config = cfg;
  for (int t = 1; t <= cfg.iters; ++t) {
    ch.iterate();
    tr.mse.push_back(ch.mse());
    if (cfg.keep(t)) {
      tr.selections.push_back(ch.st.J());
      tr.y_samples.push_back(ch.st.Y);
    }
    if (cfg.on_iteration) {
      FactorState fs;
      fs.W = ch.st.X;
      fs.Z = ch.st.Y;
      fs.sigma2 = ch.st.sigma2;
      cfg.on_iteration(t, fs);
    }
  }
  tr.state = ch.st;
  return tr;
}

} // namespace bmd
