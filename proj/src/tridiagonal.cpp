#include "atp/tridiagonal.hpp"

#include <cmath>

#include "atp/errors.hpp"

namespace atp {

SpdTridiagonal::SpdTridiagonal(Eigen::VectorXd diag, Eigen::VectorXd off)
    : diag_(std::move(diag)), off_(std::move(off)) {
  const Eigen::Index n = diag_.size();
  require(n >= 1, "tridiagonal matrix must be non-empty");
  require_dims(off_.size() == n - 1, "off-diagonal length must be n-1");
  chol_diag_.resize(n);
  chol_sub_.resize(n - 1);
  double prev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double pivot = diag_[i];
    if (i > 0) {
      chol_sub_[i - 1] = off_[i - 1] / prev;
      pivot -= chol_sub_[i - 1] * chol_sub_[i - 1];
    }
    if (!(pivot > 0.0)) throw NumericError("tridiagonal matrix is not positive definite");
    prev = std::sqrt(pivot);
    chol_diag_[i] = prev;
  }
}

SpdTridiagonal SpdTridiagonal::second_difference(int n) {
  return SpdTridiagonal(Eigen::VectorXd::Constant(n, 2.0), Eigen::VectorXd::Constant(n - 1, -1.0));
}

Eigen::MatrixXd SpdTridiagonal::dense() const {
  const Eigen::Index n = size();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  A.diagonal() = diag_;
  for (Eigen::Index i = 0; i + 1 < n; ++i) A(i, i + 1) = A(i + 1, i) = off_[i];
  return A;
}

Eigen::MatrixXd SpdTridiagonal::solve(const Eigen::MatrixXd& rhs) const {
  require_dims(rhs.rows() == size(), "tridiagonal solve: row mismatch");
  const Eigen::Index n = size();
  Eigen::MatrixXd x = rhs;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    auto col = x.col(c);
    // L y = b
    col[0] /= chol_diag_[0];
    for (Eigen::Index i = 1; i < n; ++i) col[i] = (col[i] - chol_sub_[i - 1] * col[i - 1]) / chol_diag_[i];
    // L^T x = y
    col[n - 1] /= chol_diag_[n - 1];
    for (Eigen::Index i = n - 2; i >= 0; --i) col[i] = (col[i] - chol_sub_[i] * col[i + 1]) / chol_diag_[i];
  }
  return x;
}

Eigen::MatrixXd SpdTridiagonal::multiply(const Eigen::MatrixXd& rhs) const {
  require_dims(rhs.rows() == size(), "tridiagonal multiply: row mismatch");
  const Eigen::Index n = size();
  Eigen::MatrixXd y(n, rhs.cols());
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = diag_[i] * rhs(i, c);
      if (i > 0) v += off_[i - 1] * rhs(i - 1, c);
      if (i + 1 < n) v += off_[i] * rhs(i + 1, c);
      y(i, c) = v;
    }
  }
  return y;
}

}  // namespace atp
