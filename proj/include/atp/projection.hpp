#pragma once

#include <json.hpp>

#include "atp/errors.hpp"
#include "atp/kinematics.hpp"
#include "atp/trajectory.hpp"

namespace atp {

struct ProjectionConfig {
  double eta = 10.0;     // covariant step regularization
  double alpha = 0.5;    // goal-shift learning rate
  double lambda = 1e-4;  // DLS damping
  double tol = 1e-4;     // goal tolerance (m)
  int max_iters = 200;
  int smooth_every = 5;  // one smoothing step after this many goal steps; 0 disables
  double max_step = 0.25;  // cap on |dq_j| per goal step (rad); keeps near-singular steps sane

  void validate() const;
};

struct ProjectionReport {
  int iters = 0;
  double err_before_m = 0.0;
  double err_after_m = 0.0;
  bool converged = false;
};

nlohmann::json to_json(const ProjectionReport& r);

/// Smoothness cost minimized by chomp_smooth_step: 1/2 ||xi - 1 q_0^T||_M^2,
/// the metric applied to the displacement from the start configuration.
double start_relative_smoothness(const SmoothnessOperator& op, const MatrixXd& xi);

/// Covariant gradient step on start_relative_smoothness over rows 1..T-1 with
/// the start and goal rows held: xi_int -= (1/eta) K^{-1} g_int, K the
/// interior block. Straight lines between the endpoints are fixed points.
Trajectory chomp_smooth_step(const SmoothnessOperator& op, const Trajectory& xi, double eta);

/// End-effector distance from `goal` at the trajectory's last row.
double goal_error(const KinematicChain& chain, const Trajectory& xi, const VectorXd& goal);

/// dq = DLS(J(q_T), goal - x(q_T)), scaled down so no joint moves more than
/// cfg.max_step; xi + alpha * propagate_goal_shift(dq), clamped into
/// [-pi, pi]. Row 0 is never modified.
Trajectory goal_projection_step(const KinematicChain& chain, const SmoothnessOperator& op, const Trajectory& xi,
                                const VectorXd& goal, const ProjectionConfig& cfg);

struct ProjectionResult {
  Trajectory trajectory;
  ProjectionReport report;
};

class ProjectionError : public Error {
 public:
  ProjectionError(const std::string& what, ProjectionResult best) : Error(what), best_(std::move(best)) {}
  const ProjectionResult& best() const { return best_; }

 private:
  ProjectionResult best_;
};

/// Iterates goal_projection_step, with a smoothing step every
/// cfg.smooth_every iterations, until the goal error drops below cfg.tol.
/// Throws ProjectionError carrying the best trajectory seen on failure.
ProjectionResult project_to_constraints(const KinematicChain& chain, const SmoothnessOperator& op,
                                        const Trajectory& xi, const VectorXd& goal, const ProjectionConfig& cfg);

/// Throws InfeasibleGoalError when the goal lies outside the chain's reach.
void check_reachable(const KinematicChain& chain, const VectorXd& goal);

}  // namespace atp
