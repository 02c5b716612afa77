#pragma once

#include <Eigen/Dense>
#include <vector>

namespace atp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Serial chain of revolute joints. Planar chains rotate every joint about z;
/// spatial chains alternate z and y axes starting with z. Every link extends
/// along the local x axis.
class KinematicChain {
 public:
  KinematicChain(std::vector<double> link_lengths, int workspace_dim = 2);

  /// Planar 3-link arm with l = [0.4, 0.4, 0.3] m.
  static KinematicChain default_planar();

  int dof() const { return static_cast<int>(links_.size()); }
  int workspace_dim() const { return workspace_dim_; }
  const std::vector<double>& link_lengths() const { return links_; }
  double reach() const;

  bool operator==(const KinematicChain&) const = default;

 private:
  std::vector<double> links_;
  int workspace_dim_;
};

/// End-effector position for configuration q (radians).
VectorXd forward_kinematics(const KinematicChain& chain, const VectorXd& q);

/// Position Jacobian, workspace_dim x dof.
MatrixXd jacobian(const KinematicChain& chain, const VectorXd& q);

/// Damped least squares: J^T (J J^T + lambda^2 I)^{-1} r.
/// Throws SingularityError when lambda == 0 and J J^T is singular.
VectorXd dls_solve(const MatrixXd& J, const VectorXd& r, double lambda);

/// Iterative position-only IK from an initial guess. Throws InfeasibleGoalError
/// if the goal is out of reach or the iteration does not converge.
VectorXd solve_ik(const KinematicChain& chain, const VectorXd& seed, const VectorXd& goal,
                  double tol = 1e-12, int max_iters = 500);

}  // namespace atp
