#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>

namespace bmd {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using Index = Eigen::Index;

/// Dense matrix with a boolean observation mask.
struct MaskedMatrix {
  Mat values;
  Mask mask;

  MaskedMatrix() = default;
  /// Fully observed matrix.
  explicit MaskedMatrix(Mat v);
  MaskedMatrix(Mat v, Mask m);

  Index rows() const { return values.rows(); }
  Index cols() const { return values.cols(); }
  bool observed(Index m, Index n) const { return mask(m, n); }
  std::size_t n_observed() const;
  bool fully_observed() const;
  /// Mean of the observed values.
  double observed_mean() const;
};

/// Factor pair W (M x K), Z (K x N), optional middle factor F (K x L) and noise variance.
struct FactorState {
  Mat W;
  Mat Z;
  std::optional<Mat> F;
  double sigma2 = 1.0;

  Index K() const { return W.cols(); }
  /// W*Z or W*F*Z.
  Mat predict() const;
  /// Throws DimensionError unless the factors conform with an M x N target.
  void check_shapes(Index M, Index N) const;
};

/// Mean squared error over observed entries.
double masked_mse(const MaskedMatrix &A, const FactorState &S);
double masked_mse(const MaskedMatrix &A, const Mat &prediction);

/// Sum of squared errors over observed entries.
double frobenius_loss(const MaskedMatrix &A, const FactorState &S);
double frobenius_loss(const MaskedMatrix &A, const Mat &prediction);

/// Residual a - prediction on observed entries, zero elsewhere.
Mat masked_residual(const MaskedMatrix &A, const Mat &prediction);

} // namespace bmd
