#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "atp/kinematics.hpp"
#include "atp/trajectory.hpp"

namespace atp {

using Rng = std::mt19937_64;

/// Independent generator for stream `index` of a run seeded with `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t index);

struct AugmentationConfig {
  VectorXd goal_sigma;  // per-joint std-dev of the final-configuration shift (rad)
  double a = 0.01;      // peak variance of the whole-trajectory perturbation (rad^2)
  int n_samples = 4000;
  std::uint64_t seed = 7;

  static AugmentationConfig defaults(int dof);
  void validate(int dof) const;
};

struct LabeledSample {
  Trajectory trajectory;
  VectorXd goal;  // forward kinematics of the trajectory's last row
  int source_demo = 0;
};

struct DemoOptions {
  int steps = 49;  // T; trajectories have T+1 rows
  int family_count = 2;
  int variants_per_family = 2;
  std::uint64_t seed = 7;
  std::optional<VectorXd> goal;  // shared goal; defaults to a chain-specific point
};

/// Shared start configuration of scripted demos: [pi/2, -pi/4, -pi/4] for
/// three joints, with the elbow bend split evenly over the remaining joints.
VectorXd home_configuration(int dof);

/// Scripted demonstrations. Families end at the same goal on different IK
/// branches and bend differently on the way; variants within a family differ
/// in final orientation and bend amplitude. Ordered family-major.
std::vector<Trajectory> generate_demos(const KinematicChain& chain, const DemoOptions& opts);

inline int demo_family(int demo_index, int variants_per_family) { return demo_index / variants_per_family; }

MatrixXd sample_goal_shift(const SmoothnessOperator& op, const AugmentationConfig& cfg, Rng& rng);

struct PerturbedSample {
  MatrixXd points;
  int source_demo = 0;
};

/// Picks a demo uniformly and adds interior noise with covariance a*B; rows 0
/// and T are copied from the demo untouched.
PerturbedSample sample_smooth_perturbation(const SmoothnessOperator& op, const std::vector<Trajectory>& demos,
                                           double a, Rng& rng);

struct AugmentationStats {
  long clamped_entries = 0;
  long total_entries = 0;
};

/// Sample i is drawn from make_stream(cfg.seed, i), so the result does not
/// depend on thread count or scheduling.
std::vector<LabeledSample> build_dataset(const KinematicChain& chain, const SmoothnessOperator& op,
                                         const std::vector<Trajectory>& demos, const AugmentationConfig& cfg,
                                         AugmentationStats* stats = nullptr);

/// Single-threaded reference for build_dataset.
std::vector<LabeledSample> build_dataset_serial(const KinematicChain& chain, const SmoothnessOperator& op,
                                                const std::vector<Trajectory>& demos,
                                                const AugmentationConfig& cfg, AugmentationStats* stats = nullptr);

}  // namespace atp
