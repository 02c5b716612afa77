#include "atp/projection.hpp"

#include <cmath>
#include <sstream>

namespace atp {

void ProjectionConfig::validate() const {
  require(eta > 0.0, "projection: eta must be > 0");
  require(alpha > 0.0 && alpha <= 1.0, "projection: alpha must lie in (0, 1]");
  require(lambda >= 0.0, "projection: lambda must be >= 0");
  require(tol > 0.0, "projection: tol must be > 0");
  require(max_iters >= 1, "projection: max_iters must be >= 1");
  require(smooth_every >= 0, "projection: smooth_every must be >= 0");
  require(max_step > 0.0, "projection: max_step must be > 0");
}

nlohmann::json to_json(const ProjectionReport& r) {
  return {{"iters", r.iters}, {"err_before_m", r.err_before_m}, {"err_after_m", r.err_after_m},
          {"converged", r.converged}};
}

double start_relative_smoothness(const SmoothnessOperator& op, const MatrixXd& xi) {
  const MatrixXd rel = xi.rowwise() - xi.row(0);
  return 0.5 * smoothness_norm(op, rel);
}

Trajectory chomp_smooth_step(const SmoothnessOperator& op, const Trajectory& xi, double eta) {
  require(eta > 0.0, "chomp_smooth_step: eta must be > 0");
  require_dims(xi.rows() == op.size(), "chomp_smooth_step: trajectory length does not match operator");
  const int T = op.steps();
  const MatrixXd rel = xi.points().rowwise() - xi.points().row(0);
  const MatrixXd grad = op.apply(rel).middleRows(1, T - 1);
  MatrixXd pts = xi.points();
  pts.middleRows(1, T - 1) -= op.interior_block().solve(grad) / eta;
  return Trajectory::clamped(std::move(pts));
}

void check_reachable(const KinematicChain& chain, const VectorXd& goal) {
  require_dims(goal.size() == chain.workspace_dim(), "goal has " + std::to_string(goal.size()) +
                                                         " coordinates, chain workspace is " +
                                                         std::to_string(chain.workspace_dim()) + "-D");
  if (!goal.allFinite() || goal.norm() > chain.reach()) {
    std::ostringstream msg;
    msg << "goal at distance " << goal.norm() << " m is outside the reachable radius " << chain.reach() << " m";
    throw InfeasibleGoalError(msg.str());
  }
}

double goal_error(const KinematicChain& chain, const Trajectory& xi, const VectorXd& goal) {
  return (forward_kinematics(chain, xi.goal()) - goal).norm();
}

Trajectory goal_projection_step(const KinematicChain& chain, const SmoothnessOperator& op, const Trajectory& xi,
                                const VectorXd& goal, const ProjectionConfig& cfg) {
  check_reachable(chain, goal);
  require_dims(xi.rows() == op.size() && xi.dof() == chain.dof(),
               "goal_projection_step: trajectory does not match operator/chain");
  const VectorXd q_goal = xi.goal();
  const VectorXd residual = goal - forward_kinematics(chain, q_goal);
  VectorXd dq = dls_solve(jacobian(chain, q_goal), residual, cfg.lambda);
  const double largest = dq.cwiseAbs().maxCoeff();
  if (largest > cfg.max_step) dq *= cfg.max_step / largest;
  MatrixXd pts = xi.points() + cfg.alpha * propagate_goal_shift(op, dq);
  pts.row(0) = xi.points().row(0);
  return Trajectory::clamped(std::move(pts));
}

ProjectionResult project_to_constraints(const KinematicChain& chain, const SmoothnessOperator& op,
                                        const Trajectory& xi, const VectorXd& goal, const ProjectionConfig& cfg) {
  cfg.validate();
  check_reachable(chain, goal);
  ProjectionResult current{xi, {}};
  double err = goal_error(chain, xi, goal);
  current.report.err_before_m = err;
  ProjectionResult best = current;
  best.report.err_after_m = err;

  int iters = 0;
  while (err >= cfg.tol && iters < cfg.max_iters) {
    current.trajectory = goal_projection_step(chain, op, current.trajectory, goal, cfg);
    ++iters;
    if (cfg.smooth_every > 0 && iters % cfg.smooth_every == 0) {
      current.trajectory = chomp_smooth_step(op, current.trajectory, cfg.eta);
    }
    err = goal_error(chain, current.trajectory, goal);
    if (err < best.report.err_after_m) {
      best.trajectory = current.trajectory;
      best.report.err_after_m = err;
    }
  }
  current.report.iters = iters;
  current.report.err_after_m = err;
  current.report.converged = err < cfg.tol;
  if (!current.report.converged) {
    best.report.iters = iters;
    best.report.converged = false;
    std::ostringstream msg;
    msg << "projection did not reach tolerance " << cfg.tol << " m in " << iters << " iterations (best error "
        << best.report.err_after_m << " m)";
    throw ProjectionError(msg.str(), std::move(best));
  }
  return current;
}

}  // namespace atp
