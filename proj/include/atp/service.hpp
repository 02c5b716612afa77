#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "atp/model.hpp"
#include "atp/planner.hpp"

namespace atp::service {

using json = nlohmann::json;

struct Response {
  int status = 200;
  json body;
};

// Wire format shared with the CLI.
//   request  {"z": [...], "c": index | [probs], "goal": [...], "project": bool,
//             optional "tol", "max_iters", "alpha", "eta", "lambda"}
//   result   {"trajectory": {...}, "ee_path": [[...]], "err_before_m", "err_after_m",
//             "report": {...} | null}
PlanRequest plan_request_from_json(const json& j, const AtpModel& model, const ProjectionConfig& defaults);
json to_json(const PlanResult& r);

/// Immutable snapshot served over HTTP. Handlers are const and safe to call
/// from several threads at once.
class ServiceState {
 public:
  ServiceState(AtpModel model, std::vector<Trajectory> demos, ProjectionConfig defaults = {});

  Response handle_model_info() const;
  Response handle_demos() const;
  Response handle_plan(const std::string& body) const;
  /// {"axis": unit index | "c", "grid": [...] (optional), ...plan request}
  Response handle_traverse(const std::string& body) const;

  const AtpModel& model() const { return model_; }

 private:
  AtpModel model_;
  std::vector<Trajectory> demos_;
  ProjectionConfig defaults_;
  json model_info_;
  json demos_json_;
};

/// Thin HTTP front end over ServiceState.
class Server {
 public:
  explicit Server(std::shared_ptr<const ServiceState> state);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop() is called.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace atp::service
