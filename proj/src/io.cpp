#include "atp/io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "atp/errors.hpp"

namespace atp::io {

namespace fs = std::filesystem;

json to_json(const KinematicChain& chain) {
  return json{{"workspace_dim", chain.workspace_dim()}, {"link_lengths", chain.link_lengths()}};
}

KinematicChain chain_from_json(const json& j) {
  try {
    return KinematicChain(j.at("link_lengths").get<std::vector<double>>(), j.value("workspace_dim", 2));
  } catch (const json::exception& e) {
    throw IoError(std::string("invalid chain definition: ") + e.what());
  }
}

json to_json(const VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

VectorXd vector_from_json(const json& j) {
  const auto values = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

json matrix_rows_to_json(const MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) rows.push_back(to_json(VectorXd(m.row(r).transpose())));
  return rows;
}

json to_json(const Trajectory& xi) {
  return json{{"dof", xi.dof()}, {"steps", xi.rows()}, {"data", matrix_rows_to_json(xi.points())}};
}

Trajectory trajectory_from_json(const json& j) {
  try {
    const int dof = j.at("dof").get<int>();
    const int steps = j.at("steps").get<int>();
    const auto& data = j.at("data");
    if (dof <= 0 || steps <= 0 || static_cast<int>(data.size()) != steps) {
      throw IoError("trajectory: 'steps' does not match the number of data rows");
    }
    MatrixXd pts(steps, dof);
    for (int t = 0; t < steps; ++t) {
      const auto row = data[t].get<std::vector<double>>();
      if (static_cast<int>(row.size()) != dof) throw IoError("trajectory: row " + std::to_string(t) + " has wrong length");
      for (int k = 0; k < dof; ++k) pts(t, k) = row[k];
    }
    return Trajectory(std::move(pts));
  } catch (const json::exception& e) {
    throw IoError(std::string("invalid trajectory: ") + e.what());
  }
}

json to_json(const LabeledSample& s) {
  return json{{"trajectory", to_json(s.trajectory)}, {"goal", to_json(s.goal)}, {"source_demo", s.source_demo}};
}

LabeledSample sample_from_json(const json& j) {
  try {
    return LabeledSample{trajectory_from_json(j.at("trajectory")), vector_from_json(j.at("goal")),
                         j.at("source_demo").get<int>()};
  } catch (const json::exception& e) {
    throw IoError(std::string("invalid dataset record: ") + e.what());
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << text;
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

KinematicChain load_chain(const fs::path& path) { return chain_from_json(read_json(path)); }
void save_chain(const fs::path& path, const KinematicChain& chain) { write_json(path, to_json(chain)); }

Trajectory load_trajectory(const fs::path& path) { return trajectory_from_json(read_json(path)); }
void save_trajectory(const fs::path& path, const Trajectory& xi) { write_json(path, to_json(xi)); }

void save_demos(const fs::path& dir, const std::vector<Trajectory>& demos) {
  fs::create_directories(dir);
  for (std::size_t i = 0; i < demos.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "demo_%03zu.json", i);
    save_trajectory(dir / name, demos[i]);
  }
}

std::vector<Trajectory> load_demos(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw IoError("no demo files in " + dir.string());
  std::vector<Trajectory> demos;
  for (const auto& f : files) demos.push_back(load_trajectory(f));
  return demos;
}

void save_dataset(const fs::path& path, const std::vector<LabeledSample>& samples) {
  std::string text;
  for (const auto& s : samples) {
    text += to_json(s).dump();
    text += '\n';
  }
  write_text(path, text);
}

std::vector<LabeledSample> load_dataset(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<LabeledSample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      samples.push_back(sample_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (samples.empty()) throw IoError("dataset " + path.string() + " is empty");
  return samples;
}

}  // namespace atp::io
