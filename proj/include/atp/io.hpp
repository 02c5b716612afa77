#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "atp/augmentation.hpp"
#include "atp/kinematics.hpp"
#include "atp/trajectory.hpp"

// JSON file formats:
//   chain       {"workspace_dim": 2, "link_lengths": [...]}
//   trajectory  {"dof": d, "steps": T+1, "data": [[q...], ...]}
//   dataset     JSON lines of {"trajectory": {...}, "goal": [...], "source_demo": m}
namespace atp::io {

using json = nlohmann::json;

json to_json(const KinematicChain& chain);
KinematicChain chain_from_json(const json& j);

json to_json(const Trajectory& xi);
Trajectory trajectory_from_json(const json& j);

json to_json(const VectorXd& v);
VectorXd vector_from_json(const json& j);
json matrix_rows_to_json(const MatrixXd& m);

json to_json(const LabeledSample& s);
LabeledSample sample_from_json(const json& j);

std::string read_text(const std::filesystem::path& path);
/// Writes through a temporary file and renames, so readers never see a
/// partial file.
void write_text(const std::filesystem::path& path, const std::string& text);

json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const json& j);

KinematicChain load_chain(const std::filesystem::path& path);
void save_chain(const std::filesystem::path& path, const KinematicChain& chain);

Trajectory load_trajectory(const std::filesystem::path& path);
void save_trajectory(const std::filesystem::path& path, const Trajectory& xi);

/// demo_000.json, demo_001.json, ... in `dir`.
void save_demos(const std::filesystem::path& dir, const std::vector<Trajectory>& demos);
/// Every *.json file in `dir`, in filename order.
std::vector<Trajectory> load_demos(const std::filesystem::path& dir);

void save_dataset(const std::filesystem::path& path, const std::vector<LabeledSample>& samples);
std::vector<LabeledSample> load_dataset(const std::filesystem::path& path);

}  // namespace atp::io
