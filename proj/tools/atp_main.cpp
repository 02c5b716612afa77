// atp: command-line front end for demo generation, augmentation, training,
// planning and the HTTP service.

#include <csignal>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "atp/augmentation.hpp"
#include "atp/io.hpp"
#include "atp/log.hpp"
#include "atp/model.hpp"
#include "atp/model_io.hpp"
#include "atp/planner.hpp"
#include "atp/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitDomain = 1;
constexpr int kExitUsage = 2;

atp::KinematicChain resolve_chain(const std::string& spec) {
  if (spec.empty() || spec == "planar") return atp::KinematicChain::default_planar();
  if (spec == "spatial") return atp::KinematicChain({0.4, 0.4, 0.3}, 3);
  return atp::io::load_chain(spec);
}

atp::VectorXd to_vec(const std::vector<double>& v) {
  return Eigen::Map<const atp::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void emit(const std::string& out, const json& j) {
  if (out.empty() || out == "-") {
    std::cout << j.dump(1) << '\n';
  } else {
    atp::io::write_json(out, j);
  }
}

const char* error_kind(const std::exception& e) {
  if (dynamic_cast<const atp::InfeasibleGoalError*>(&e)) return "unreachable_goal";
  if (dynamic_cast<const atp::DimensionError*>(&e)) return "dimension_mismatch";
  if (dynamic_cast<const atp::ContractError*>(&e)) return "invalid_argument";
  if (dynamic_cast<const atp::IoError*>(&e)) return "io_error";
  if (dynamic_cast<const atp::NumericError*>(&e)) return "numeric_error";
  if (dynamic_cast<const atp::SingularityError*>(&e)) return "singular";
  if (dynamic_cast<const atp::PlanNotConvergedError*>(&e)) return "not_converged";
  if (dynamic_cast<const atp::TrainingError*>(&e)) return "training_failed";
  return "error";
}

std::string metrics_csv(const std::vector<atp::EpochMetrics>& rows, int k_z) {
  std::ostringstream out;
  out.precision(17);
  out << "epoch,loss,recon_mse,goal_mse,kl_z,kl_c,capacity_z,capacity_c";
  for (int i = 0; i < k_z; ++i) out << ",kl_z" << i;
  out << '\n';
  for (const auto& m : rows) {
    out << m.epoch << ',' << m.loss << ',' << m.recon_mse << ',' << m.goal_mse << ',' << m.kl_z << ',' << m.kl_c
        << ',' << m.capacity_z << ',' << m.capacity_c;
    for (int i = 0; i < k_z; ++i) out << ',' << m.kl_z_per_unit[i];
    out << '\n';
  }
  return out.str();
}

fs::path default_metrics_path(const fs::path& model_path) {
  fs::path p = model_path;
  p.replace_extension(".metrics.csv");
  return p;
}

atp::service::Server* g_server = nullptr;
extern "C" void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  atp::init_logging_from_env();

  CLI::App app{"Autoencoder trajectory primitives: learn latent codes of demonstrations and plan with them"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  // Shared flag values. CLI11 binds straight into these.
  std::string chain_spec = "planar", out, demos_dir, data_path, model_path, metrics_path;
  std::uint64_t seed = 7;
  int steps = 49, families = 2, variants = 2, n = 4000, n_goals = 20;
  double a = 0.01, goal_sigma = 0.15;
  std::vector<double> goal, z;
  int c = 0;
  bool project = false;
  double tol = 1e-4;
  int max_iters = 200;
  atp::TrainingConfig tcfg;
  double cc_max = -1.0;
  int k_z = 5, k_c = 4;
  std::string axis = "1";
  std::vector<double> grid{-2.5, 2.5, 7};
  int demo_index = 0;
  int port = 8080;
  std::string host = "127.0.0.1";

  auto* gen = app.add_subcommand("gen-demos", "write scripted demonstrations as JSON files");
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--chain", chain_spec, "planar, spatial or a chain JSON file")->capture_default_str();
  gen->add_option("--steps", steps, "T; each demo has T+1 rows")->capture_default_str()->check(CLI::Range(2, 10000));
  gen->add_option("--families", families)->capture_default_str()->check(CLI::Range(1, 2));
  gen->add_option("--variants", variants)->capture_default_str()->check(CLI::Range(1, 16));
  gen->add_option("--goal", goal, "shared goal position, comma separated")->delimiter(',');
  gen->add_option("--seed", seed)->capture_default_str();

  auto* aug = app.add_subcommand("augment", "build a labelled dataset from demos");
  aug->add_option("--demos", demos_dir, "directory of demo JSON files")->required();
  aug->add_option("--out", out, "output JSONL")->required();
  aug->add_option("--n", n, "number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  aug->add_option("--seed", seed)->capture_default_str();
  aug->add_option("--chain", chain_spec)->capture_default_str();
  aug->add_option("--a", a, "peak variance of the smooth perturbation (rad^2)")->capture_default_str();
  aug->add_option("--goal-sigma", goal_sigma, "std-dev of the final-configuration shift (rad)")
      ->capture_default_str();

  auto* tr = app.add_subcommand("train", "train a model; writes the model and a per-epoch metrics CSV");
  tr->add_option("--data", data_path, "dataset JSONL")->required();
  tr->add_option("--out", out, "model JSON")->required();
  tr->add_option("--metrics", metrics_path, "metrics CSV (default: <out>.metrics.csv)");
  tr->add_option("--chain", chain_spec)->capture_default_str();
  tr->add_option("--epochs", tcfg.epochs)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--batch", tcfg.batch_size)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--gamma", tcfg.gamma)->capture_default_str();
  tr->add_option("--cz-max", tcfg.cz_max)->capture_default_str();
  tr->add_option("--cc-max", cc_max, "discrete capacity (default: ln k_c)");
  tr->add_option("--tau", tcfg.tau)->capture_default_str();
  tr->add_option("--lr", tcfg.adam.lr)->capture_default_str();
  tr->add_option("--goal-weight", tcfg.goal_weight, "weight of the goal-head error")->capture_default_str();
  tr->add_option("--kz", k_z)->capture_default_str()->check(CLI::PositiveNumber);
  tr->add_option("--kc", k_c)->capture_default_str()->check(CLI::Range(2, 64));
  tr->add_option("--seed", seed)->capture_default_str();

  auto add_code_flags = [&](CLI::App* sub) {
    sub->add_option("--model", model_path)->required();
    sub->add_option("--c", c, "class index")->capture_default_str();
    sub->add_option("--z", z, "continuous code, comma separated (default zeros)")->delimiter(',');
    sub->add_option("--goal", goal, "goal position, comma separated")->delimiter(',')->required();
    sub->add_flag("--project", project, "project onto the goal constraint");
    sub->add_option("--tol", tol, "goal tolerance (m)")->capture_default_str();
    sub->add_option("--max-iters", max_iters)->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--out", out, "output JSON (default stdout)");
  };
  auto* pl = app.add_subcommand("plan", "decode a latent code into a trajectory");
  add_code_flags(pl);

  auto* tv = app.add_subcommand("traverse", "sweep one latent unit, or every class");
  add_code_flags(tv);
  tv->add_option("--axis", axis, "continuous unit index or 'c'")->capture_default_str();
  tv->add_option("--grid", grid, "lo,hi,count")->delimiter(',')->expected(3)->capture_default_str();

  auto* ev = app.add_subcommand("eval", "goal generalization table");
  ev->add_option("--model", model_path)->required();
  ev->add_option("--data", data_path, "dataset whose goal labels are sampled")->required();
  ev->add_option("--demos", demos_dir, "take the latent code from a demo instead of --z/--c");
  ev->add_option("--demo", demo_index, "demo index used with --demos")->capture_default_str();
  ev->add_option("--c", c)->capture_default_str();
  ev->add_option("--z", z)->delimiter(',');
  ev->add_option("--n", n_goals, "number of goals")->capture_default_str()->check(CLI::PositiveNumber);
  ev->add_option("--seed", seed)->capture_default_str();
  ev->add_option("--tol", tol)->capture_default_str();
  ev->add_option("--max-iters", max_iters)->capture_default_str();
  ev->add_option("--out", out, "CSV path")->required();

  auto* sv = app.add_subcommand("serve", "HTTP planning service");
  sv->add_option("--model", model_path)->required();
  sv->add_option("--demos", demos_dir, "demos shown by GET /api/demos");
  sv->add_option("--port", port)->capture_default_str()->check(CLI::Range(0, 65535));
  sv->add_option("--host", host)->capture_default_str();
  sv->add_option("--tol", tol)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  auto projection = [&] {
    atp::ProjectionConfig p;
    p.tol = tol;
    p.max_iters = max_iters;
    return p;
  };
  auto code_request = [&](const atp::AtpModel& model) {
    const auto& d = model.dims();
    atp::VectorXd zz = z.empty() ? atp::VectorXd::Zero(d.k_z) : to_vec(z);
    atp::PlanRequest req;
    req.z = zz;
    req.c = atp::one_hot(c, d.k_c);
    req.goal = to_vec(goal);
    req.project = project;
    req.projection = projection();
    return req;
  };

  try {
    if (*gen) {
      const auto chain = resolve_chain(chain_spec);
      atp::DemoOptions opts;
      opts.steps = steps;
      opts.family_count = families;
      opts.variants_per_family = variants;
      opts.seed = seed;
      if (!goal.empty()) opts.goal = to_vec(goal);
      const auto demos = atp::generate_demos(chain, opts);
      atp::io::save_demos(out, demos);
      spdlog::info("wrote {} demos to {}", demos.size(), out);
    } else if (*aug) {
      const auto chain = resolve_chain(chain_spec);
      const auto demos = atp::io::load_demos(demos_dir);
      const atp::SmoothnessOperator op(demos.front().steps());
      auto cfg = atp::AugmentationConfig::defaults(chain.dof());
      cfg.goal_sigma.setConstant(goal_sigma);
      cfg.a = a;
      cfg.n_samples = n;
      cfg.seed = seed;
      atp::AugmentationStats stats;
      const auto data = atp::build_dataset(chain, op, demos, cfg, &stats);
      atp::io::save_dataset(out, data);
      spdlog::info("wrote {} samples to {} ({} of {} entries clamped)", data.size(), out, stats.clamped_entries,
                   stats.total_entries);
    } else if (*tr) {
      const auto chain = resolve_chain(chain_spec);
      const auto data = atp::io::load_dataset(data_path);
      atp::ModelDims dims;
      dims.dof = data.front().trajectory.dof();
      dims.steps = data.front().trajectory.steps();
      dims.workspace_dim = chain.workspace_dim();
      dims.k_z = k_z;
      dims.k_c = k_c;
      tcfg.seed = seed;
      if (cc_max >= 0.0) tcfg.cc_max = cc_max;
      atp::AtpModel model(chain, dims, seed);
      const auto metrics = atp::train(model, data, tcfg, [&](const atp::EpochMetrics& m) {
        spdlog::info("epoch {:4d} loss {:.5f} recon {:.3e} kl_z {:.3f} kl_c {:.3f}", m.epoch, m.loss, m.recon_mse,
                     m.kl_z, m.kl_c);
      });
      atp::save_model(out, model);
      const fs::path mpath = metrics_path.empty() ? default_metrics_path(out) : fs::path(metrics_path);
      atp::io::write_text(mpath, metrics_csv(metrics, dims.k_z));
      spdlog::info("wrote model {} and metrics {}", out, mpath.string());
    } else if (*pl) {
      const auto model = atp::load_model(model_path);
      try {
        const auto result = atp::plan(model, code_request(model));
        emit(out, atp::service::to_json(result));
      } catch (const atp::PlanNotConvergedError& e) {
        emit(out, atp::service::to_json(e.best()));
        throw;
      }
    } else if (*tv) {
      const auto model = atp::load_model(model_path);
      atp::TraversalAxis ax;
      if (axis == "c") {
        ax.discrete = true;
      } else {
        try {
          ax.index = std::stoi(axis);
        } catch (const std::exception&) {
          std::cerr << "--axis must be an integer or 'c'\n";
          return kExitUsage;
        }
      }
      if (grid[2] < 1.0) {
        std::cerr << "--grid count must be >= 1\n";
        return kExitUsage;
      }
      std::vector<double> values = atp::linspace(grid[0], grid[1], static_cast<int>(grid[2]));
      if (ax.discrete) {
        values.clear();
        for (int k = 0; k < model.dims().k_c; ++k) values.push_back(k);
      }
      json results = json::array();
      for (const auto& r : atp::latent_traversal(model, ax, values, code_request(model))) {
        results.push_back(atp::service::to_json(r));
      }
      emit(out, json{{"axis", axis}, {"values", values}, {"results", results}});
    } else if (*ev) {
      const auto model = atp::load_model(model_path);
      const auto data = atp::io::load_dataset(data_path);
      atp::PlanRequest templ;
      if (!demos_dir.empty()) {
        const auto demos = atp::io::load_demos(demos_dir);
        atp::require(demo_index >= 0 && demo_index < static_cast<int>(demos.size()), "--demo out of range");
        const auto rec = atp::reconstruct(model, demos[demo_index]);
        templ.z = rec.code.z;
        templ.c = rec.code.c;
      } else {
        templ.z = z.empty() ? atp::VectorXd::Zero(model.dims().k_z) : to_vec(z);
        templ.c = atp::one_hot(c, model.dims().k_c);
      }
      templ.projection = projection();
      auto rng = atp::make_stream(seed, 0);
      std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
      std::vector<atp::VectorXd> goals;
      for (int i = 0; i < n_goals; ++i) goals.push_back(data[pick(rng)].goal);
      const auto table = atp::evaluate_generalization(model, goals, templ);
      atp::write_generalization_csv(out, table);
      std::cout << json{{"goals", table.rows.size()},
                        {"median_before_m", table.median_before_m},
                        {"p95_before_m", table.p95_before_m},
                        {"median_after_m", table.median_after_m},
                        {"p95_after_m", table.p95_after_m},
                        {"fraction_converged", table.fraction_below_tol}}
                       .dump(1)
                << '\n';
    } else if (*sv) {
      auto model = atp::load_model(model_path);
      std::vector<atp::Trajectory> demos;
      if (!demos_dir.empty()) demos = atp::io::load_demos(demos_dir);
      atp::ProjectionConfig defaults;
      defaults.tol = tol;
      auto state = std::make_shared<const atp::service::ServiceState>(std::move(model), std::move(demos), defaults);
      atp::service::Server server(state);
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << host << ':' << bound << std::endl;
      server.run();
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << json{{"error", error_kind(e)}, {"message", e.what()}}.dump() << '\n';
    return kExitDomain;
  }
  return 0;
}
