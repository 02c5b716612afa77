#pragma once

#include <Eigen/Dense>

#include "atp/tridiagonal.hpp"

namespace atp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Joint-space trajectory: row t is the configuration q_t, so a trajectory
/// with T steps has T+1 rows. Entries are radians in [-pi, pi].
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(MatrixXd points);

  /// Clamps every entry into [-pi, pi] instead of rejecting.
  static Trajectory clamped(MatrixXd points);

  int steps() const { return static_cast<int>(points_.rows()) - 1; }
  int rows() const { return static_cast<int>(points_.rows()); }
  int dof() const { return static_cast<int>(points_.cols()); }
  const MatrixXd& points() const { return points_; }
  VectorXd row(int t) const { return points_.row(t).transpose(); }
  VectorXd start() const { return row(0); }
  VectorXd goal() const { return row(steps()); }

  /// Row-major flattening (q_0 first), the network input layout.
  VectorXd flatten() const;
  static Trajectory unflatten(const VectorXd& flat, int dof);

  bool operator==(const Trajectory& other) const { return points_ == other.points_; }

 private:
  MatrixXd points_;
};

/// Number of entries a clamp would move, for diagnostics.
int count_out_of_range(const MatrixXd& points);

/// The banded second-difference metric over T+1 time indices. Index 0 (the
/// start) has a zero row and column; indices 1..T carry tridiag(-1, 2, -1).
///
/// Inverses of the singular full matrix are realized on its blocks:
///   - start-clamped block, indices 1..T, used to propagate goal shifts;
///   - interior block, indices 1..T-1, used when start and goal are both held.
/// Perturbation sampling draws from N(0, B) with B = (K^T K)^{-1} / max diag,
/// K the interior block, so the scale parameter equals the peak variance.
class SmoothnessOperator {
 public:
  explicit SmoothnessOperator(int steps);

  int steps() const { return steps_; }
  int size() const { return steps_ + 1; }

  /// Full (T+1)x(T+1) matrix including the zero first row and column.
  MatrixXd dense() const;

  const SpdTridiagonal& start_clamped_block() const { return start_clamped_; }
  const SpdTridiagonal& interior_block() const { return interior_; }

  /// Solves the start-clamped block for rows 1..T of rhs; row 0 of the
  /// result is zero.
  MatrixXd solve_start_clamped(const MatrixXd& rhs) const;

  /// M * xi over the full trajectory.
  MatrixXd apply(const MatrixXd& xi) const;

  /// Dense (K^T K)^{-1} before normalization.
  MatrixXd interior_precision_inverse() const;

  /// Largest diagonal entry of (K^T K)^{-1}; perturbation covariance is
  /// (K^T K)^{-1} divided by this value.
  double perturbation_normalizer() const { return perturbation_normalizer_; }

  /// Maps white noise (T-1 x d) to a draw with covariance
  /// (K^T K)^{-1} / perturbation_normalizer().
  MatrixXd color_interior_noise(const MatrixXd& white) const;

 private:
  int steps_;
  SpdTridiagonal start_clamped_;
  SpdTridiagonal interior_;
  double perturbation_normalizer_ = 1.0;
};

SmoothnessOperator build_smoothness_operator(int steps);

/// Displacement that spreads a final-configuration shift over the trajectory:
/// zero at t = 0 and the start-clamped solve of e_T * delta^T for t = 1..T.
MatrixXd propagate_goal_shift(const SmoothnessOperator& op, const VectorXd& goal_shift);

/// Sum over joints of xi_j^T M xi_j.
double smoothness_norm(const SmoothnessOperator& op, const MatrixXd& xi);

}  // namespace atp
