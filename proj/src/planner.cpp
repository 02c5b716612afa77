#include "atp/planner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "atp/io.hpp"

namespace atp {

PlanRequest PlanRequest::with_class(VectorXd z, int class_index, int k_c, VectorXd goal, bool project) {
  PlanRequest r;
  r.z = std::move(z);
  r.c = one_hot(class_index, k_c);
  r.goal = std::move(goal);
  r.project = project;
  return r;
}

MatrixXd ee_path(const KinematicChain& chain, const Trajectory& xi) {
  MatrixXd path(xi.rows(), chain.workspace_dim());
  for (int t = 0; t < xi.rows(); ++t) path.row(t) = forward_kinematics(chain, xi.row(t)).transpose();
  return path;
}

void validate_request(const AtpModel& model, const PlanRequest& req) {
  const auto& d = model.dims();
  require_dims(req.z.size() == d.k_z, "z has " + std::to_string(req.z.size()) + " entries, model expects " +
                                          std::to_string(d.k_z));
  require_dims(req.c.size() == d.k_c, "c has " + std::to_string(req.c.size()) + " entries, model expects " +
                                          std::to_string(d.k_c));
  require(req.z.allFinite(), "z must be finite");
  require((req.c.array() >= 0.0).all() && std::abs(req.c.sum() - 1.0) < 1e-9, "c must sum to 1");
  check_reachable(model.chain(), req.goal);
  if (req.project) req.projection.validate();
}

PlanResult plan(const AtpModel& model, const PlanRequest& req) {
  validate_request(model, req);
  PlanResult result;
  result.trajectory = decode(model, req.z, req.c, req.goal);
  result.err_before_m = goal_error(model.chain(), result.trajectory, req.goal);
  result.err_after_m = result.err_before_m;
  if (req.project) {
    const SmoothnessOperator op(model.dims().steps);
    try {
      ProjectionResult projected = project_to_constraints(model.chain(), op, result.trajectory, req.goal,
                                                          req.projection);
      result.trajectory = std::move(projected.trajectory);
      result.err_after_m = projected.report.err_after_m;
      result.report = projected.report;
    } catch (const ProjectionError& e) {
      PlanResult best = result;
      best.trajectory = e.best().trajectory;
      best.err_after_m = e.best().report.err_after_m;
      best.report = e.best().report;
      best.ee_path = ee_path(model.chain(), best.trajectory);
      throw PlanNotConvergedError(e.what(), std::move(best));
    }
  }
  result.ee_path = ee_path(model.chain(), result.trajectory);
  return result;
}

PlanResult plan_or_best(const AtpModel& model, const PlanRequest& req) {
  try {
    return plan(model, req);
  } catch (const PlanNotConvergedError& e) {
    return e.best();
  }
}

Reconstruction reconstruct(const AtpModel& model, const Trajectory& xi) {
  const Encoding enc = encode(model, xi);
  Reconstruction r;
  r.class_index = argmax(enc.logits);
  r.code = LatentCode{enc.mu, one_hot(r.class_index, model.dims().k_c)};
  r.predicted_goal = enc.goal;
  r.result.trajectory = decode(model, r.code.z, r.code.c, enc.goal);
  r.result.err_before_m = goal_error(model.chain(), r.result.trajectory, enc.goal);
  r.result.err_after_m = r.result.err_before_m;
  r.result.ee_path = ee_path(model.chain(), r.result.trajectory);
  return r;
}

std::vector<double> linspace(double lo, double hi, int count) {
  require(count >= 1, "linspace needs count >= 1");
  std::vector<double> v(count);
  for (int i = 0; i < count; ++i) v[i] = count == 1 ? lo : lo + (hi - lo) * i / (count - 1);
  return v;
}

std::vector<PlanResult> latent_traversal(const AtpModel& model, const TraversalAxis& axis,
                                         const std::vector<double>& grid, const PlanRequest& fixed) {
  validate_request(model, fixed);
  std::vector<PlanResult> out;
  if (axis.discrete) {
    for (int k = 0; k < model.dims().k_c; ++k) {
      PlanRequest req = fixed;
      req.c = one_hot(k, model.dims().k_c);
      out.push_back(plan_or_best(model, req));
    }
    return out;
  }
  require(axis.index >= 0 && axis.index < model.dims().k_z, "traversal axis out of range");
  for (double v : grid) {
    require(std::isfinite(v), "traversal grid values must be finite");
    PlanRequest req = fixed;
    req.z[axis.index] = v;
    out.push_back(plan_or_best(model, req));
  }
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

GeneralizationTable evaluate_generalization(const AtpModel& model, const std::vector<VectorXd>& goals,
                                            const PlanRequest& templ) {
  GeneralizationTable table;
  std::vector<GeneralizationRow> rows(goals.size());
  for (const auto& g : goals) check_reachable(model.chain(), g);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < goals.size(); ++i) {
    PlanRequest req = templ;
    req.goal = goals[i];
    req.project = true;
    GeneralizationRow row;
    row.goal = goals[i];
    try {
      const PlanResult r = plan(model, req);
      row.err_before_m = r.err_before_m;
      row.err_after_m = r.err_after_m;
      row.iters = r.report->iters;
      row.converged = r.report->converged;
    } catch (const PlanNotConvergedError& e) {
      row.err_before_m = e.best().err_before_m;
      row.err_after_m = e.best().err_after_m;
      row.iters = e.best().report->iters;
      row.converged = false;
    }
    rows[i] = std::move(row);
  }
  table.rows = std::move(rows);
  if (table.rows.empty()) return table;
  std::vector<double> before, after;
  int ok = 0;
  for (const auto& r : table.rows) {
    before.push_back(r.err_before_m);
    after.push_back(r.err_after_m);
    ok += r.converged;
  }
  table.median_before_m = percentile(before, 0.5);
  table.median_after_m = percentile(after, 0.5);
  table.p95_before_m = percentile(before, 0.95);
  table.p95_after_m = percentile(after, 0.95);
  table.fraction_below_tol = static_cast<double>(ok) / static_cast<double>(table.rows.size());
  return table;
}

void write_generalization_csv(const std::filesystem::path& path, const GeneralizationTable& table) {
  std::ostringstream out;
  out.precision(17);
  const int dims = table.rows.empty() ? 2 : static_cast<int>(table.rows.front().goal.size());
  out << "goal_x,goal_y";
  if (dims == 3) out << ",goal_z";
  out << ",err_before_m,err_after_m,iters,converged\n";
  for (const auto& r : table.rows) {
    for (int k = 0; k < r.goal.size(); ++k) out << r.goal[k] << ',';
    out << r.err_before_m << ',' << r.err_after_m << ',' << r.iters << ',' << (r.converged ? "true" : "false")
        << '\n';
  }
  io::write_text(path, out.str());
}

}  // namespace atp
