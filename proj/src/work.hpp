#pragma once

#include "bmd/dist.hpp"
#include "bmd/errors.hpp"
#include "bmd/matrix.hpp"

#include <vector>

namespace bmd::detail {

/// Sufficient statistics for one factor entry: sum c^2 and sum c * r where r
/// is the residual with the entry's own contribution added back.
struct EntryStats {
  double scc = 0.0;
  double scr = 0.0;
};

/// Residual bookkeeping for a Gaussian likelihood on observed entries.
/// E holds a - prediction on observed cells and zero elsewhere.
class Work {
public:
  Work(const MaskedMatrix &A, const Mat &prediction) : E(masked_residual(A, prediction)), A_(A) {
    rows_.resize(static_cast<std::size_t>(A.rows()));
    cols_.resize(static_cast<std::size_t>(A.cols()));
    for (Index i = 0; i < A.rows(); ++i)
      for (Index j = 0; j < A.cols(); ++j)
        if (A.mask(i, j)) {
          rows_[static_cast<std::size_t>(i)].push_back(j);
          cols_[static_cast<std::size_t>(j)].push_back(i);
        }
  }

  const MaskedMatrix &A() const { return A_; }
  const std::vector<Index> &row_obs(Index m) const { return rows_[static_cast<std::size_t>(m)]; }
  const std::vector<Index> &col_obs(Index n) const { return cols_[static_cast<std::size_t>(n)]; }

  /// Entry W(m,k) of a product W * C.
  EntryStats w_stats(Index m, Index k, double w, const Mat &C) const {
    EntryStats s;
    for (Index j : row_obs(m)) {
      double c = C(k, j);
      s.scc += c * c;
      s.scr += c * (E(m, j) + w * c);
    }
    return s;
  }

  void w_update(Index m, Index k, double delta, const Mat &C) {
    if (delta == 0.0)
      return;
    for (Index j : row_obs(m))
      E(m, j) -= delta * C(k, j);
  }

  /// Entry Z(l,n) of a product B * Z.
  EntryStats z_stats(Index l, Index n, double z, const Mat &B) const {
    EntryStats s;
    for (Index i : col_obs(n)) {
      double c = B(i, l);
      s.scc += c * c;
      s.scr += c * (E(i, n) + z * c);
    }
    return s;
  }

  void z_update(Index l, Index n, double delta, const Mat &B) {
    if (delta == 0.0)
      return;
    for (Index i : col_obs(n))
      E(i, n) -= delta * B(i, l);
  }

  void reset(const Mat &prediction) { E = masked_residual(A_, prediction); }

  double sse() const { return E.squaredNorm(); }
  double n_obs() const { return static_cast<double>(A_.n_observed()); }
  double mse() const { return sse() / n_obs(); }

  Mat E;

private:
  const MaskedMatrix &A_;
  std::vector<std::vector<Index>> rows_;
  std::vector<std::vector<Index>> cols_;
};

/// Inverse-Gamma draw for the noise variance.
inline double draw_sigma2(const Work &w, double alpha, double beta, Rng &rng) {
  return sample_inv_gamma(0.5 * w.n_obs() + alpha, 0.5 * w.sse() + beta, rng);
}

inline Mat normal_matrix(Index r, Index c, Rng &rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat X(r, c);
  for (Index i = 0; i < X.size(); ++i)
    X.data()[i] = nd(rng);
  return X;
}

inline Mat half_normal_matrix(Index r, Index c, Rng &rng) {
  return normal_matrix(r, c, rng).cwiseAbs();
}

inline FactorState transposed(const FactorState &S) {
  FactorState T;
  T.W = S.Z.transpose();
  T.Z = S.W.transpose();
  T.sigma2 = S.sigma2;
  return T;
}

inline MaskedMatrix transposed(const MaskedMatrix &A) {
  return MaskedMatrix(A.values.transpose(), A.mask.transpose());
}

inline void check_entry(const MaskedMatrix &A, const FactorState &S, Index m, Index k) {
  S.check_shapes(A.rows(), A.cols());
  if (m < 0 || m >= A.rows() || k < 0 || k >= S.W.cols())
    throw DimensionError("entry index out of range");
  if (!(S.sigma2 > 0.0))
    throw ParameterError("sigma2 must be positive");
}

} // namespace bmd::detail
