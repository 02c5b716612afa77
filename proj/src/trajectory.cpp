#include "atp/trajectory.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "atp/errors.hpp"

namespace atp {

namespace {
constexpr double kPi = std::numbers::pi;
}

Trajectory::Trajectory(MatrixXd points) : points_(std::move(points)) {
  require(points_.rows() >= 3, "trajectory needs at least 3 rows");
  require(points_.cols() >= 1, "trajectory needs at least one joint");
  for (Eigen::Index i = 0; i < points_.size(); ++i) {
    const double v = points_.data()[i];
    if (!std::isfinite(v) || v < -kPi || v > kPi) {
      throw ContractError("trajectory entry outside [-pi, pi]: " + std::to_string(v));
    }
  }
}

Trajectory Trajectory::clamped(MatrixXd points) {
  require(points.allFinite(), "trajectory has non-finite entries");
  return Trajectory(points.cwiseMax(-kPi).cwiseMin(kPi));
}

VectorXd Trajectory::flatten() const {
  VectorXd flat(points_.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(flat.data(), points_.rows(),
                                                                                    points_.cols()) = points_;
  return flat;
}

Trajectory Trajectory::unflatten(const VectorXd& flat, int dof) {
  require_dims(dof > 0 && flat.size() % dof == 0, "flattened trajectory size is not a multiple of dof");
  const Eigen::Index rows = flat.size() / dof;
  MatrixXd pts = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      flat.data(), rows, dof);
  return Trajectory(std::move(pts));
}

int count_out_of_range(const MatrixXd& points) {
  return static_cast<int>(((points.array() < -kPi) || (points.array() > kPi)).count());
}

SmoothnessOperator::SmoothnessOperator(int steps) : steps_(steps) {
  require(steps >= 2, "smoothness operator needs T >= 2");
  start_clamped_ = SpdTridiagonal::second_difference(steps);
  interior_ = SpdTridiagonal::second_difference(steps - 1);
  // diag((K^T K)^{-1}) = squared row norms of K^{-1} since K is symmetric.
  const MatrixXd k_inv = interior_.solve(MatrixXd::Identity(steps - 1, steps - 1));
  perturbation_normalizer_ = k_inv.rowwise().squaredNorm().maxCoeff();
}

MatrixXd SmoothnessOperator::dense() const {
  MatrixXd M = MatrixXd::Zero(size(), size());
  M.bottomRightCorner(steps_, steps_) = start_clamped_.dense();
  return M;
}

MatrixXd SmoothnessOperator::solve_start_clamped(const MatrixXd& rhs) const {
  require_dims(rhs.rows() == size(), "solve: expected " + std::to_string(size()) + " rows");
  MatrixXd out = MatrixXd::Zero(rhs.rows(), rhs.cols());
  out.bottomRows(steps_) = start_clamped_.solve(rhs.bottomRows(steps_));
  return out;
}

MatrixXd SmoothnessOperator::apply(const MatrixXd& xi) const {
  require_dims(xi.rows() == size(), "apply: expected " + std::to_string(size()) + " rows");
  MatrixXd out = MatrixXd::Zero(xi.rows(), xi.cols());
  out.bottomRows(steps_) = start_clamped_.multiply(xi.bottomRows(steps_));
  return out;
}

MatrixXd SmoothnessOperator::interior_precision_inverse() const {
  const MatrixXd k_inv = interior_.solve(MatrixXd::Identity(steps_ - 1, steps_ - 1));
  return k_inv * k_inv.transpose();
}

MatrixXd SmoothnessOperator::color_interior_noise(const MatrixXd& white) const {
  require_dims(white.rows() == steps_ - 1, "interior noise must have T-1 rows");
  // K^{-1} w has covariance K^{-1} K^{-T} = (K^T K)^{-1}.
  return interior_.solve(white) / std::sqrt(perturbation_normalizer_);
}

SmoothnessOperator build_smoothness_operator(int steps) { return SmoothnessOperator(steps); }

MatrixXd propagate_goal_shift(const SmoothnessOperator& op, const VectorXd& goal_shift) {
  MatrixXd rhs = MatrixXd::Zero(op.size(), goal_shift.size());
  rhs.row(op.steps()) = goal_shift.transpose();
  return op.solve_start_clamped(rhs);
}

double smoothness_norm(const SmoothnessOperator& op, const MatrixXd& xi) {
  require_dims(xi.rows() == op.size(), "smoothness_norm: size mismatch");
  return (xi.array() * op.apply(xi).array()).sum();
}

}  // namespace atp
