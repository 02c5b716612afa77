#include "atp/kernels.hpp"

#include <omp.h>

#include "atp/errors.hpp"

namespace atp::kernels {

namespace {

constexpr Eigen::Index kTile = 4;

// acc(:, t) += sum_k A(:, k) * coef(k, c0 + t) for t < width, k ascending.
// Column-major A keeps the innermost loop contiguous; tiling reuses each
// column of A across `width` outputs.
inline void accumulate_tile(const MatrixXd& A, const MatrixXd& coef, Eigen::Index c0, Eigen::Index width,
                            double* acc, Eigen::Index acc_stride) {
  const Eigen::Index rows = A.rows();
  const Eigen::Index inner = A.cols();
  if (width == kTile) {
    double* y0 = acc;
    double* y1 = acc + acc_stride;
    double* y2 = acc + 2 * acc_stride;
    double* y3 = acc + 3 * acc_stride;
    for (Eigen::Index k = 0; k < inner; ++k) {
      const double* a = A.data() + k * rows;
      const double x0 = coef(k, c0), x1 = coef(k, c0 + 1), x2 = coef(k, c0 + 2), x3 = coef(k, c0 + 3);
#pragma omp simd
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double ai = a[i];
        y0[i] += ai * x0;
        y1[i] += ai * x1;
        y2[i] += ai * x2;
        y3[i] += ai * x3;
      }
    }
    return;
  }
  for (Eigen::Index t = 0; t < width; ++t) {
    double* y = acc + t * acc_stride;
    for (Eigen::Index k = 0; k < inner; ++k) {
      const double* a = A.data() + k * rows;
      const double x = coef(k, c0 + t);
#pragma omp simd
      for (Eigen::Index i = 0; i < rows; ++i) y[i] += a[i] * x;
    }
  }
}

}  // namespace

void affine_forward(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, MatrixXd& Y) {
  require_dims(W.cols() == X.rows(), "affine_forward: W cols != X rows");
  require_dims(W.rows() == b.size(), "affine_forward: bias size mismatch");
  const Eigen::Index out = W.rows();
  const Eigen::Index batch = X.cols();
  Y.resize(out, batch);
  const Eigen::Index tiles = (batch + kTile - 1) / kTile;
#pragma omp parallel for schedule(static)
  for (Eigen::Index t = 0; t < tiles; ++t) {
    const Eigen::Index c0 = t * kTile;
    const Eigen::Index width = std::min(kTile, batch - c0);
    for (Eigen::Index c = c0; c < c0 + width; ++c) Y.col(c) = b;
    accumulate_tile(W, X, c0, width, Y.data() + c0 * out, out);
  }
}

void affine_backward(const MatrixXd& W, const MatrixXd& X, const MatrixXd& dY, MatrixXd& dW, VectorXd& db,
                     MatrixXd* dX) {
  require_dims(W.cols() == X.rows() && W.rows() == dY.rows() && X.cols() == dY.cols(),
               "affine_backward: shape mismatch");
  const Eigen::Index out = W.rows();
  const Eigen::Index in = W.cols();
  const Eigen::Index batch = X.cols();
  dW.setZero(out, in);
  db = dY.rowwise().sum();

  // dW(:, k) = sum_j dY(:, j) X(k, j): treat X^T as the coefficient matrix.
  const MatrixXd Xt = X.transpose();
  const Eigen::Index w_tiles = (in + kTile - 1) / kTile;
#pragma omp parallel for schedule(static)
  for (Eigen::Index t = 0; t < w_tiles; ++t) {
    const Eigen::Index c0 = t * kTile;
    const Eigen::Index width = std::min(kTile, in - c0);
    accumulate_tile(dY, Xt, c0, width, dW.data() + c0 * out, out);
  }

  if (dX) {
    const MatrixXd Wt = W.transpose();
    dX->setZero(in, batch);
    const Eigen::Index x_tiles = (batch + kTile - 1) / kTile;
#pragma omp parallel for schedule(static)
    for (Eigen::Index t = 0; t < x_tiles; ++t) {
      const Eigen::Index c0 = t * kTile;
      const Eigen::Index width = std::min(kTile, batch - c0);
      accumulate_tile(Wt, dY, c0, width, dX->data() + c0 * in, in);
    }
  }
}

int max_threads() { return omp_get_max_threads(); }

namespace serial {

void affine_forward(const MatrixXd& W, const VectorXd& b, const MatrixXd& X, MatrixXd& Y) {
  require_dims(W.cols() == X.rows() && W.rows() == b.size(), "serial affine_forward: shape mismatch");
  Y.resize(W.rows(), X.cols());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
      double acc = b[i];
      for (Eigen::Index k = 0; k < W.cols(); ++k) acc += W(i, k) * X(k, j);
      Y(i, j) = acc;
    }
  }
}

void affine_backward(const MatrixXd& W, const MatrixXd& X, const MatrixXd& dY, MatrixXd& dW, VectorXd& db,
                     MatrixXd* dX) {
  require_dims(W.cols() == X.rows() && W.rows() == dY.rows() && X.cols() == dY.cols(),
               "serial affine_backward: shape mismatch");
  dW.resize(W.rows(), W.cols());
  db.resize(W.rows());
  for (Eigen::Index i = 0; i < W.rows(); ++i) {
    double bias_acc = 0.0;
    for (Eigen::Index j = 0; j < X.cols(); ++j) bias_acc += dY(i, j);
    db[i] = bias_acc;
    for (Eigen::Index k = 0; k < W.cols(); ++k) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < X.cols(); ++j) acc += dY(i, j) * X(k, j);
      dW(i, k) = acc;
    }
  }
  if (dX) {
    dX->resize(W.cols(), X.cols());
    for (Eigen::Index k = 0; k < W.cols(); ++k) {
      for (Eigen::Index j = 0; j < X.cols(); ++j) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < W.rows(); ++i) acc += W(i, k) * dY(i, j);
        (*dX)(k, j) = acc;
      }
    }
  }
}

}  // namespace serial

}  // namespace atp::kernels
