#pragma once

#include <Eigen/Dense>

// Dense-layer kernels over a batch stored column-wise (one sample per column).
//
// Every output entry is accumulated by exactly one thread in a fixed order
// (ascending inner index), so results are identical for any thread count.
// The serial namespace holds the textbook triple loops the parallel kernels
// are tested and benchmarked against.
namespace atp::kernels {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Y = W X + b 1^T.
void affine_forward(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, MatrixXd& Y);

/// dW = dY X^T, db = dY 1, and dX = W^T dY when dX is non-null.
void affine_backward(const MatrixXd& W, const MatrixXd& X, const MatrixXd& dY, MatrixXd& dW, VectorXd& db,
                     MatrixXd* dX);

namespace serial {
void affine_forward(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, MatrixXd& Y);
void affine_backward(const MatrixXd& W, const MatrixXd& X, const MatrixXd& dY, MatrixXd& dW, VectorXd& db,
                     MatrixXd* dX);
}  // namespace serial

/// Threads the parallel kernels will use.
int max_threads();

}  // namespace atp::kernels
