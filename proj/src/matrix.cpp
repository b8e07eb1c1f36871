#include "bmd/matrix.hpp"

#include "bmd/errors.hpp"

#include <string>
#include <utility>

namespace bmd {

MaskedMatrix::MaskedMatrix(Mat v) : values(std::move(v)) {
  mask = Mask::Constant(values.rows(), values.cols(), true);
}

MaskedMatrix::MaskedMatrix(Mat v, Mask m) : values(std::move(v)), mask(std::move(m)) {
  if (values.rows() != mask.rows() || values.cols() != mask.cols())
    throw DimensionError("values and mask differ in shape");
}

std::size_t MaskedMatrix::n_observed() const {
  return static_cast<std::size_t>(mask.count());
}

bool MaskedMatrix::fully_observed() const { return mask.all(); }

double MaskedMatrix::observed_mean() const {
  std::size_t n = n_observed();
  if (n == 0)
    throw EmptyMaskError("no observed entries");
  double s = 0.0;
  for (Index i = 0; i < rows(); ++i)
    for (Index j = 0; j < cols(); ++j)
      if (mask(i, j))
        s += values(i, j);
  return s / static_cast<double>(n);
}

Mat FactorState::predict() const {
  if (F)
    return W * (*F) * Z;
  return W * Z;
}

void FactorState::check_shapes(Index M, Index N) const {
  Index inner = Z.rows();
  if (F) {
    if (F->rows() != W.cols())
      throw DimensionError("F rows must equal K");
    inner = F->cols();
    if (Z.rows() != inner)
      throw DimensionError("Z rows must equal F cols");
  } else if (W.cols() != Z.rows()) {
    throw DimensionError("W cols must equal Z rows");
  }
  if (W.rows() != M || Z.cols() != N)
    throw DimensionError("factor shapes do not match " + std::to_string(M) + "x" +
                         std::to_string(N));
}

Mat masked_residual(const MaskedMatrix &A, const Mat &prediction) {
  if (prediction.rows() != A.rows() || prediction.cols() != A.cols())
    throw DimensionError("prediction shape mismatch");
  Mat R = Mat::Zero(A.rows(), A.cols());
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      if (A.mask(i, j))
        R(i, j) = A.values(i, j) - prediction(i, j);
  return R;
}

double frobenius_loss(const MaskedMatrix &A, const Mat &prediction) {
  if (prediction.rows() != A.rows() || prediction.cols() != A.cols())
    throw DimensionError("prediction shape mismatch");
  if (A.n_observed() == 0)
    throw EmptyMaskError("no observed entries");
  if (A.fully_observed())
    return (A.values - prediction).squaredNorm();
  double s = 0.0;
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j)
      if (A.mask(i, j)) {
        double r = A.values(i, j) - prediction(i, j);
        s += r * r;
      }
  return s;
}

double frobenius_loss(const MaskedMatrix &A, const FactorState &S) {
  S.check_shapes(A.rows(), A.cols());
  return frobenius_loss(A, S.predict());
}

double masked_mse(const MaskedMatrix &A, const Mat &prediction) {
  double s = frobenius_loss(A, prediction);
  return s / static_cast<double>(A.n_observed());
}

double masked_mse(const MaskedMatrix &A, const FactorState &S) {
  S.check_shapes(A.rows(), A.cols());
  return masked_mse(A, S.predict());
}

} // namespace bmd
