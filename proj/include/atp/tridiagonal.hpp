#pragma once

#include <Eigen/Dense>

namespace atp {

/// Symmetric positive definite tridiagonal matrix with a cached bidiagonal
/// Cholesky factor (A = L L^T). Solves cost O(n) per right-hand side.
class SpdTridiagonal {
 public:
  SpdTridiagonal() = default;
  SpdTridiagonal(Eigen::VectorXd diag, Eigen::VectorXd off);

  /// The standard second-difference matrix tridiag(-1, 2, -1) of size n.
  static SpdTridiagonal second_difference(int n);

  int size() const { return static_cast<int>(diag_.size()); }
  const Eigen::VectorXd& diag() const { return diag_; }
  const Eigen::VectorXd& off() const { return off_; }

  Eigen::MatrixXd dense() const;

  /// A^{-1} B, column by column.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  /// A B without forming A.
  Eigen::MatrixXd multiply(const Eigen::MatrixXd& rhs) const;

 private:
  Eigen::VectorXd diag_, off_;
  Eigen::VectorXd chol_diag_, chol_sub_;
};

}  // namespace atp
