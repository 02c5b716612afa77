#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "atp/model.hpp"
#include "atp/projection.hpp"

namespace atp {

struct PlanRequest {
  VectorXd z;
  VectorXd c;  // one-hot (or probability) vector of size k_c
  VectorXd goal;
  bool project = false;
  ProjectionConfig projection;

  static PlanRequest with_class(VectorXd z, int class_index, int k_c, VectorXd goal, bool project = false);
};

struct PlanResult {
  Trajectory trajectory;
  MatrixXd ee_path;  // row t = forward kinematics of trajectory row t
  double err_before_m = 0.0;
  double err_after_m = 0.0;
  std::optional<ProjectionReport> report;
};

class PlanNotConvergedError : public Error {
 public:
  PlanNotConvergedError(const std::string& what, PlanResult best) : Error(what), best_(std::move(best)) {}
  const PlanResult& best() const { return best_; }

 private:
  PlanResult best_;
};

MatrixXd ee_path(const KinematicChain& chain, const Trajectory& xi);

/// Checks request dimensions against the model and goal reachability.
void validate_request(const AtpModel& model, const PlanRequest& req);

/// Decode, then optionally project onto the goal constraint.
PlanResult plan(const AtpModel& model, const PlanRequest& req);

/// Like plan, but a projection that misses the tolerance returns its best
/// trajectory (report->converged == false) instead of throwing.
PlanResult plan_or_best(const AtpModel& model, const PlanRequest& req);

struct Reconstruction {
  PlanResult result;
  LatentCode code;  // z = posterior mean, c = hard argmax
  int class_index = 0;
  VectorXd predicted_goal;
};

/// Mean-code reconstruction: decode(mu_z, onehot(argmax logits), goal head).
Reconstruction reconstruct(const AtpModel& model, const Trajectory& xi);

struct TraversalAxis {
  bool discrete = false;
  int index = 0;  // continuous unit when !discrete
};

/// Evenly spaced values from lo to hi inclusive.
std::vector<double> linspace(double lo, double hi, int count);

/// Sweeps one continuous unit over `grid` (or every class when the axis is
/// discrete) with the remaining inputs taken from `fixed`. Entries that miss
/// the projection tolerance are kept with report->converged == false.
std::vector<PlanResult> latent_traversal(const AtpModel& model, const TraversalAxis& axis,
                                         const std::vector<double>& grid, const PlanRequest& fixed);

struct GeneralizationRow {
  VectorXd goal;
  double err_before_m = 0.0;
  double err_after_m = 0.0;
  int iters = 0;
  bool converged = false;
};

struct GeneralizationTable {
  std::vector<GeneralizationRow> rows;
  double median_before_m = 0.0;
  double median_after_m = 0.0;
  double p95_before_m = 0.0;
  double p95_after_m = 0.0;
  double fraction_below_tol = 0.0;
};

/// Plans every goal with the latent code of `templ` and projection enabled.
/// Non-convergence is recorded in the row rather than thrown.
GeneralizationTable evaluate_generalization(const AtpModel& model, const std::vector<VectorXd>& goals,
                                            const PlanRequest& templ);

/// goal_x, goal_y[, goal_z], err_before_m, err_after_m, iters, converged
void write_generalization_csv(const std::filesystem::path& path, const GeneralizationTable& table);

double percentile(std::vector<double> values, double q);

}  // namespace atp
