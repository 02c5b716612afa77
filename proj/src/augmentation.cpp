#include "atp/augmentation.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "atp/errors.hpp"

namespace atp {

namespace {

constexpr double kPi = std::numbers::pi;

// Offset from the family base toward the final configuration; odd families
// mirror it, which lands them on the other IK branch.
VectorXd family_pattern(int dof) {
  VectorXd p(dof);
  for (int j = 0; j < dof; ++j) {
    if (j == 0) {
      p[j] = 0.55;
    } else if (j == 1) {
      p[j] = -1.2;
    } else {
      p[j] = -0.6 * std::pow(0.5, j - 2);
    }
  }
  return p;
}

VectorXd bend_pattern(int dof) {
  VectorXd p = VectorXd::Zero(dof);
  p[0] = 0.35;
  if (dof > 1) p[1] = 0.25;
  return p;
}

double min_jerk(double s) { return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s); }

LabeledSample make_sample(const KinematicChain& chain, const SmoothnessOperator& op,
                          const std::vector<Trajectory>& demos, const AugmentationConfig& cfg, std::size_t index,
                          AugmentationStats& stats) {
  Rng rng = make_stream(cfg.seed, index);
  const MatrixXd shift = sample_goal_shift(op, cfg, rng);
  PerturbedSample base = sample_smooth_perturbation(op, demos, cfg.a, rng);
  const MatrixXd raw = shift + base.points;
  stats.clamped_entries += count_out_of_range(raw);
  stats.total_entries += raw.size();
  Trajectory traj = Trajectory::clamped(raw);
  VectorXd goal = forward_kinematics(chain, traj.goal());
  return LabeledSample{std::move(traj), std::move(goal), base.source_demo};
}

void check_inputs(const KinematicChain& chain, const SmoothnessOperator& op, const std::vector<Trajectory>& demos,
                  const AugmentationConfig& cfg) {
  require(!demos.empty(), "augmentation needs at least one demonstration");
  for (const auto& d : demos) {
    require_dims(d.rows() == op.size(), "demo length does not match smoothness operator");
    require_dims(d.dof() == chain.dof(), "demo dof does not match chain");
  }
  cfg.validate(chain.dof());
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

AugmentationConfig AugmentationConfig::defaults(int dof) {
  AugmentationConfig cfg;
  cfg.goal_sigma = VectorXd::Constant(dof, 0.15);
  return cfg;
}

void AugmentationConfig::validate(int dof) const {
  require_dims(goal_sigma.size() == dof, "goal_sigma must have one entry per joint");
  require((goal_sigma.array() >= 0.0).all(), "goal_sigma entries must be >= 0");
  require(a >= 0.0 && std::isfinite(a), "perturbation scale a must be >= 0");
  require(n_samples >= 1, "n_samples must be >= 1");
}

VectorXd home_configuration(int dof) {
  require(dof >= 1, "dof must be positive");
  VectorXd q = VectorXd::Constant(dof, dof > 1 ? -kPi / (2.0 * (dof - 1)) : 0.0);
  q[0] = kPi / 2.0;
  return q;
}

std::vector<Trajectory> generate_demos(const KinematicChain& chain, const DemoOptions& opts) {
  require(opts.family_count >= 1, "family_count must be >= 1");
  require(opts.variants_per_family >= 1, "variants_per_family must be >= 1");
  require(opts.steps >= 2, "demos need T >= 2");
  const int d = chain.dof();
  const VectorXd q0 = home_configuration(d);
  VectorXd base = VectorXd::Zero(d);
  base[0] = 0.2;
  const VectorXd pattern = family_pattern(d);
  const VectorXd bend = bend_pattern(d);

  VectorXd goal = opts.goal ? *opts.goal : forward_kinematics(chain, base + pattern);
  require_dims(goal.size() == chain.workspace_dim(), "demo goal dimension does not match chain");

  Rng rng(opts.seed);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  std::vector<Trajectory> demos;
  for (int f = 0; f < opts.family_count; ++f) {
    const double side = (f % 2 == 0) ? 1.0 : -1.0;
    const double spread = 1.0 + 0.35 * (f / 2);
    for (int v = 0; v < opts.variants_per_family; ++v) {
      const double offset =
          opts.variants_per_family > 1 ? (v - 0.5 * (opts.variants_per_family - 1)) / (opts.variants_per_family - 1)
                                       : 0.0;
      VectorXd seed = base + side * spread * pattern;
      seed[d - 1] += 0.5 * offset + jitter(rng);
      VectorXd q_goal;
      try {
        q_goal = solve_ik(chain, seed, goal);
      } catch (const InfeasibleGoalError& e) {
        throw InfeasibleGoalError("demo family " + std::to_string(f) + " variant " + std::to_string(v) +
                                  ": goal unreachable (" + e.what() + ")");
      }
      for (Eigen::Index j = 0; j < q_goal.size(); ++j) q_goal[j] = std::remainder(q_goal[j], 2.0 * kPi);
      const double bend_scale = side * spread * (1.0 + 0.5 * offset + jitter(rng));
      MatrixXd pts(opts.steps + 1, d);
      for (int t = 0; t <= opts.steps; ++t) {
        const double s = static_cast<double>(t) / opts.steps;
        const VectorXd q = q0 + min_jerk(s) * (q_goal - q0) + std::sin(kPi * s) * bend_scale * bend;
        pts.row(t) = q.transpose();
      }
      // Exact endpoints regardless of rounding in the blend.
      pts.row(0) = q0.transpose();
      pts.row(opts.steps) = q_goal.transpose();
      if (count_out_of_range(pts) > 0) {
        throw InfeasibleGoalError("demo family " + std::to_string(f) + " leaves the joint range [-pi, pi]");
      }
      demos.emplace_back(std::move(pts));
    }
  }
  return demos;
}

MatrixXd sample_goal_shift(const SmoothnessOperator& op, const AugmentationConfig& cfg, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd shift(cfg.goal_sigma.size());
  for (Eigen::Index j = 0; j < shift.size(); ++j) shift[j] = cfg.goal_sigma[j] * normal(rng);
  return propagate_goal_shift(op, shift);
}

PerturbedSample sample_smooth_perturbation(const SmoothnessOperator& op, const std::vector<Trajectory>& demos,
                                           double a, Rng& rng) {
  require(!demos.empty(), "perturbation needs at least one demonstration");
  require(a >= 0.0, "perturbation scale a must be >= 0");
  std::uniform_int_distribution<int> pick(0, static_cast<int>(demos.size()) - 1);
  const int m = pick(rng);
  const Trajectory& demo = demos[m];
  require_dims(demo.rows() == op.size(), "demo length does not match smoothness operator");
  MatrixXd points = demo.points();
  if (a > 0.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    MatrixXd white(op.steps() - 1, demo.dof());
    for (Eigen::Index c = 0; c < white.cols(); ++c)
      for (Eigen::Index r = 0; r < white.rows(); ++r) white(r, c) = normal(rng);
    points.middleRows(1, op.steps() - 1) += std::sqrt(a) * op.color_interior_noise(white);
  }
  return PerturbedSample{std::move(points), m};
}

std::vector<LabeledSample> build_dataset(const KinematicChain& chain, const SmoothnessOperator& op,
                                         const std::vector<Trajectory>& demos, const AugmentationConfig& cfg,
                                         AugmentationStats* stats) {
  check_inputs(chain, op, demos, cfg);
  const long n = cfg.n_samples;
  std::vector<LabeledSample> out(n);
  long clamped = 0, total = 0;
#pragma omp parallel reduction(+ : clamped, total)
  {
    AugmentationStats local;
#pragma omp for schedule(static)
    for (long i = 0; i < n; ++i) out[i] = make_sample(chain, op, demos, cfg, i, local);
    clamped += local.clamped_entries;
    total += local.total_entries;
  }
  if (stats) *stats = AugmentationStats{clamped, total};
  return out;
}

std::vector<LabeledSample> build_dataset_serial(const KinematicChain& chain, const SmoothnessOperator& op,
                                                const std::vector<Trajectory>& demos,
                                                const AugmentationConfig& cfg, AugmentationStats* stats) {
  check_inputs(chain, op, demos, cfg);
  std::vector<LabeledSample> out;
  out.reserve(cfg.n_samples);
  AugmentationStats local;
  for (long i = 0; i < cfg.n_samples; ++i) out.push_back(make_sample(chain, op, demos, cfg, i, local));
  if (stats) *stats = local;
  return out;
}

}  // namespace atp
