#include "atp/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "atp/io.hpp"

namespace atp::service {

namespace {

// Shape or type problems in an otherwise well-formed JSON body.
class SchemaError : public ContractError {
 public:
  using ContractError::ContractError;
};

VectorXd number_array(const json& j, const char* key) {
  if (!j.contains(key)) throw SchemaError(std::string("missing field '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_array()) throw SchemaError(std::string("'") + key + "' must be an array of numbers");
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw SchemaError(std::string("'") + key + "' must be an array of numbers");
    out[static_cast<Eigen::Index>(i)] = v[i].get<double>();
  }
  return out;
}

json error_body(const std::string& kind, const std::string& message) {
  return json{{"error", kind}, {"message", message}};
}

template <class Fn>
Response guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const json::parse_error& e) {
    return {400, error_body("malformed_json", e.what())};
  } catch (const PlanNotConvergedError& e) {
    json body = error_body("not_converged", e.what());
    body["best"] = to_json(e.best());
    return {409, body};
  } catch (const InfeasibleGoalError& e) {
    return {422, error_body("unreachable_goal", e.what())};
  } catch (const DimensionError& e) {
    return {422, error_body("dimension_mismatch", e.what())};
  } catch (const ContractError& e) {
    return {422, error_body("invalid_request", e.what())};
  } catch (const json::exception& e) {
    return {422, error_body("invalid_request", e.what())};
  } catch (const Error& e) {
    return {422, error_body("domain_error", e.what())};
  }
}

}  // namespace

PlanRequest plan_request_from_json(const json& j, const AtpModel& model, const ProjectionConfig& defaults) {
  if (!j.is_object()) throw SchemaError("request body must be a JSON object");
  PlanRequest req;
  req.z = number_array(j, "z");
  if (!j.contains("c")) throw SchemaError("missing field 'c'");
  const json& c = j.at("c");
  if (c.is_number_integer()) {
    req.c = one_hot(c.get<int>(), model.dims().k_c);
  } else if (c.is_array()) {
    req.c = number_array(j, "c");
  } else {
    throw SchemaError("'c' must be a class index or a probability array");
  }
  req.goal = number_array(j, "goal");
  req.project = j.value("project", false);
  req.projection = defaults;
  req.projection.tol = j.value("tol", defaults.tol);
  req.projection.max_iters = j.value("max_iters", defaults.max_iters);
  req.projection.alpha = j.value("alpha", defaults.alpha);
  req.projection.eta = j.value("eta", defaults.eta);
  req.projection.lambda = j.value("lambda", defaults.lambda);
  return req;
}

json to_json(const PlanResult& r) {
  return json{{"trajectory", io::to_json(r.trajectory)},
              {"ee_path", io::matrix_rows_to_json(r.ee_path)},
              {"err_before_m", r.err_before_m},
              {"err_after_m", r.err_after_m},
              {"report", r.report ? atp::to_json(*r.report) : json(nullptr)}};
}

ServiceState::ServiceState(AtpModel model, std::vector<Trajectory> demos, ProjectionConfig defaults)
    : model_(std::move(model)), demos_(std::move(demos)), defaults_(defaults) {
  defaults_.validate();
  const auto& d = model_.dims();
  require_dims(model_.chain().dof() == d.dof && model_.chain().workspace_dim() == d.workspace_dim,
               "model dims do not match its chain");
  VectorXd kl = model_.final_unit_kl.size() == d.k_z ? model_.final_unit_kl : VectorXd::Zero(d.k_z);
  json goals = json::array();
  demos_json_ = json::array();
  for (const auto& demo : demos_) {
    require_dims(demo.dof() == d.dof && demo.steps() == d.steps, "demo shape does not match model");
    const VectorXd g = forward_kinematics(model_.chain(), demo.goal());
    goals.push_back(io::to_json(g));
    demos_json_.push_back(json{{"trajectory", io::to_json(demo)},
                               {"ee_path", io::matrix_rows_to_json(ee_path(model_.chain(), demo))},
                               {"goal", io::to_json(g)}});
  }
  model_info_ = json{{"k_z", d.k_z},
                     {"k_c", d.k_c},
                     {"dof", d.dof},
                     {"steps", d.steps + 1},
                     {"workspace_dim", d.workspace_dim},
                     {"link_lengths", model_.chain().link_lengths()},
                     {"per_unit_kl", io::to_json(kl)},
                     {"demo_goals", goals}};
}

Response ServiceState::handle_model_info() const { return {200, model_info_}; }

Response ServiceState::handle_demos() const { return {200, json{{"demos", demos_json_}}}; }

Response ServiceState::handle_plan(const std::string& body) const {
  return guarded([&] {
    const PlanRequest req = plan_request_from_json(json::parse(body), model_, defaults_);
    return Response{200, to_json(plan(model_, req))};
  });
}

Response ServiceState::handle_traverse(const std::string& body) const {
  return guarded([&] {
    const json j = json::parse(body);
    const PlanRequest req = plan_request_from_json(j, model_, defaults_);
    if (!j.contains("axis")) throw SchemaError("missing field 'axis'");
    TraversalAxis axis;
    const json& a = j.at("axis");
    if (a.is_string() && a.get<std::string>() == "c") {
      axis.discrete = true;
    } else if (a.is_number_integer()) {
      axis.index = a.get<int>();
    } else {
      throw SchemaError("'axis' must be a unit index or \"c\"");
    }
    std::vector<double> grid = linspace(-2.5, 2.5, 7);
    if (j.contains("grid")) {
      const VectorXd g = number_array(j, "grid");
      require(g.size() >= 1 && g.size() <= 101, "'grid' must hold 1 to 101 values");
      grid.assign(g.data(), g.data() + g.size());
    }
    if (axis.discrete) {
      grid.clear();
      for (int k = 0; k < model_.dims().k_c; ++k) grid.push_back(k);
    }
    json results = json::array();
    for (const auto& r : latent_traversal(model_, axis, grid, req)) results.push_back(to_json(r));
    return Response{200, json{{"axis", a}, {"values", grid}, {"results", results}}};
  });
}

struct Server::Impl {
  std::shared_ptr<const ServiceState> state;
  httplib::Server http;
};

Server::Server(std::shared_ptr<const ServiceState> state) : impl_(std::make_unique<Impl>()) {
  impl_->state = std::move(state);
  auto& http = impl_->http;
  auto st = impl_->state;

  http.set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
  });
  auto reply = [](httplib::Response& res, const Response& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  http.Get("/api/model", [st, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, st->handle_model_info());
  });
  http.Get("/api/demos", [st, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, st->handle_demos());
  });
  http.Post("/api/plan", [st, reply](const httplib::Request& req, httplib::Response& res) {
    const Response r = st->handle_plan(req.body);
    spdlog::debug("POST /api/plan -> {}", r.status);
    reply(res, r);
  });
  http.Post("/api/traverse", [st, reply](const httplib::Request& req, httplib::Response& res) {
    const Response r = st->handle_traverse(req.body);
    spdlog::debug("POST /api/traverse -> {}", r.status);
    reply(res, r);
  });
  http.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    spdlog::error("unhandled exception in handler: {}", what);
    res.status = 500;
    res.set_content(error_body("internal", what).dump(), "application/json");
  });
}

Server::~Server() { stop(); }

int Server::bind(const std::string& host, int port) {
  const int bound = port == 0 ? impl_->http.bind_to_any_port(host) : (impl_->http.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void Server::run() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_) impl_->http.stop();
}

}  // namespace atp::service
