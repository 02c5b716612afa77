#include "atp/kinematics.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "atp/errors.hpp"

namespace atp {

KinematicChain::KinematicChain(std::vector<double> link_lengths, int workspace_dim)
    : links_(std::move(link_lengths)), workspace_dim_(workspace_dim) {
  require(!links_.empty(), "kinematic chain needs at least one link");
  require(workspace_dim_ == 2 || workspace_dim_ == 3, "workspace_dim must be 2 or 3");
  for (double l : links_) {
    require(std::isfinite(l) && l > 0.0, "link lengths must be positive");
  }
}

KinematicChain KinematicChain::default_planar() { return KinematicChain({0.4, 0.4, 0.3}, 2); }

double KinematicChain::reach() const { return std::accumulate(links_.begin(), links_.end(), 0.0); }

namespace {

void check_config(const KinematicChain& chain, const VectorXd& q) {
  require_dims(q.size() == chain.dof(), "configuration has " + std::to_string(q.size()) +
                                            " entries, chain has " + std::to_string(chain.dof()) +
                                            " joints");
}

Eigen::Matrix3d axis_rotation(int joint, double angle) {
  const Eigen::Vector3d axis = (joint % 2 == 0) ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

// Joint origins, world joint axes and the end point of a spatial chain.
struct SpatialFrames {
  std::vector<Eigen::Vector3d> origins;
  std::vector<Eigen::Vector3d> axes;
  Eigen::Vector3d tip;
};

SpatialFrames spatial_frames(const KinematicChain& chain, const VectorXd& q) {
  SpatialFrames f;
  Eigen::Matrix3d R = Eigen::Matrix3d::Identity();
  Eigen::Vector3d p = Eigen::Vector3d::Zero();
  const auto& l = chain.link_lengths();
  for (int i = 0; i < chain.dof(); ++i) {
    const Eigen::Vector3d local_axis = (i % 2 == 0) ? Eigen::Vector3d::UnitZ() : Eigen::Vector3d::UnitY();
    f.origins.push_back(p);
    f.axes.push_back(R * local_axis);
    R = R * axis_rotation(i, q[i]);
    p += R * Eigen::Vector3d(l[i], 0.0, 0.0);
  }
  f.tip = p;
  return f;
}

}  // namespace

VectorXd forward_kinematics(const KinematicChain& chain, const VectorXd& q) {
  check_config(chain, q);
  const auto& l = chain.link_lengths();
  if (chain.workspace_dim() == 2) {
    VectorXd x = VectorXd::Zero(2);
    double angle = 0.0;
    for (int i = 0; i < chain.dof(); ++i) {
      angle += q[i];
      x[0] += l[i] * std::cos(angle);
      x[1] += l[i] * std::sin(angle);
    }
    return x;
  }
  return spatial_frames(chain, q).tip;
}

MatrixXd jacobian(const KinematicChain& chain, const VectorXd& q) {
  check_config(chain, q);
  const int d = chain.dof();
  const auto& l = chain.link_lengths();
  if (chain.workspace_dim() == 2) {
    // Column i sums the contributions of every link at or beyond joint i.
    MatrixXd J = MatrixXd::Zero(2, d);
    std::vector<double> cum(d);
    double angle = 0.0;
    for (int i = 0; i < d; ++i) {
      angle += q[i];
      cum[i] = angle;
    }
    for (int i = d - 1; i >= 0; --i) {
      const double dx = -l[i] * std::sin(cum[i]);
      const double dy = l[i] * std::cos(cum[i]);
      for (int j = 0; j <= i; ++j) {
        J(0, j) += dx;
        J(1, j) += dy;
      }
    }
    return J;
  }
  const SpatialFrames f = spatial_frames(chain, q);
  MatrixXd J(3, d);
  for (int i = 0; i < d; ++i) J.col(i) = f.axes[i].cross(f.tip - f.origins[i]);
  return J;
}

VectorXd dls_solve(const MatrixXd& J, const VectorXd& r, double lambda) {
  require_dims(J.rows() == r.size(), "dls_solve: residual size does not match Jacobian rows");
  require(lambda >= 0.0 && std::isfinite(lambda), "dls_solve: damping must be finite and >= 0");
  MatrixXd A = J * J.transpose();
  A.diagonal().array() += lambda * lambda;
  Eigen::LDLT<MatrixXd> ldlt(A);
  if (lambda == 0.0) {
    // Rank test on the Gram matrix; LDLT alone does not flag rank deficiency.
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(A, Eigen::EigenvaluesOnly);
    const double top = eig.eigenvalues().cwiseAbs().maxCoeff();
    if (top == 0.0 || eig.eigenvalues().minCoeff() <= 1e-14 * top) {
      throw SingularityError("dls_solve: J J^T is singular; retry with damping > 0");
    }
  }
  return J.transpose() * ldlt.solve(r);
}

VectorXd solve_ik(const KinematicChain& chain, const VectorXd& seed, const VectorXd& goal, double tol,
                  int max_iters) {
  require_dims(goal.size() == chain.workspace_dim(), "goal dimension does not match chain workspace");
  if (goal.norm() > chain.reach()) throw InfeasibleGoalError("IK goal is outside the reachable ball");
  VectorXd q = seed;
  for (int it = 0; it < max_iters; ++it) {
    const VectorXd r = goal - forward_kinematics(chain, q);
    if (r.norm() < tol) return q;
    q += dls_solve(jacobian(chain, q), r, 1e-3);
  }
  throw InfeasibleGoalError("IK did not converge to the requested goal");
}

}  // namespace atp
