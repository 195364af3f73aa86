/*
 Copyright 2026 The cvxctg Authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

// Command line driver for the surrogate-control experiments.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include "cvxctg/harness.hpp"

namespace fs = std::filesystem;
using namespace cvxctg;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app->add_option("--seed", c.seed, "override the config seed");
  app->add_option("--out", c.out, "output directory");
  app->add_option("--threads", c.threads, "worker threads, 0 for all cores");
}

ExperimentConfig resolve(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.out) cfg.output_dir = *c.out;
  if (c.threads) cfg.threads = *c.threads;
  cfg.validate();
  fs::create_directories(cfg.output_dir);
  return cfg;
}

std::string out_path(const ExperimentConfig& c, const std::string& name) {
  return (fs::path(c.output_dir) / name).string();
}

Vector parse_state(const std::string& text, Eigen::Index nx) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) v.push_back(parse_double(item));
  if (static_cast<Eigen::Index>(v.size()) != nx) {
    throw ParameterError("--state needs " + std::to_string(nx) + " comma-separated values");
  }
  return Eigen::Map<Vector>(v.data(), nx);
}

// Loads <dir>/dataset.{csv,json}, generating and saving it when absent.
Dataset obtain_dataset(const ExperimentConfig& c, const std::string& dir) {
  const std::string csv = (fs::path(dir) / "dataset.csv").string();
  const std::string json = (fs::path(dir) / "dataset.json").string();
  if (fs::exists(csv) && fs::exists(json)) return load_dataset(csv, json);
  std::cerr << "generating dataset (" << grid_states(c.grid).rows() << " states)\n";
  Dataset ds = generate_dataset(c);
  fs::create_directories(dir);
  save_dataset(ds, c, csv, json);
  return ds;
}

Json fit_summary(const FitResult& f) {
  return {{"num_variables", f.num_variables},
          {"num_constraints", f.num_constraints},
          {"residual_sum", f.residual_sum},
          {"status", to_string(f.qp.status)},
          {"primal_residual", f.qp.primal_residual},
          {"dual_residual", f.qp.dual_residual},
          {"iterations", f.qp.iterations},
          {"solve_time_s", f.qp.solve_time}};
}

Json train_summary(const TrainResult& t) {
  Json restarts = Json::array();
  for (const auto& r : t.restarts) {
    restarts.push_back({{"restart", r.restart},
                        {"train_mse", r.train_mse},
                        {"test_mse", r.test_mse},
                        {"iterations", r.iterations},
                        {"grad_norm", r.grad_norm},
                        {"line_search_failed", r.line_search_failed}});
  }
  return {{"selected", t.report.restart}, {"restarts", restarts}};
}

SurrogateModel build_surrogate(const ExperimentConfig& c, const Dataset& ds,
                               const std::string& kind) {
  if (kind == "pwa") {
    PwaBuild b = build_pwa_surrogate(ds);
    save_surrogate(b.model, out_path(c, "pwa.json"));
    write_json({{"value", fit_summary(b.value_fit)},
                {"feasibility", fit_summary(b.feasibility_fit)}},
               out_path(c, "fit_pwa.json"));
    return b.model;
  }
  IcnnBuild b = build_icnn_surrogate(ds, c);
  save_surrogate(b.model, out_path(c, "icnn.json"));
  write_json({{"value", train_summary(b.value_training)},
              {"feasibility", train_summary(b.feasibility_training)}},
             out_path(c, "train_icnn.json"));
  return b.model;
}

// An explicit surrogate file wins; otherwise one is built from the data.
SurrogateModel obtain_surrogate(const ExperimentConfig& c, const std::string& path,
                                const std::string& data_dir, const std::string& kind) {
  if (!path.empty()) return load_surrogate(path);
  return build_surrogate(c, obtain_dataset(c, data_dir), kind);
}

std::vector<char> feasibility_labels(const Dataset& ds, double threshold) {
  std::vector<char> out(static_cast<std::size_t>(ds.size()));
  for (Eigen::Index i = 0; i < ds.size(); ++i) out[static_cast<std::size_t>(i)] = ds.feasible(i, threshold);
  return out;
}

void print(const Json& j) { std::cout << j.dump(2) << "\n"; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Convex cost-to-go surrogates for multistage MPC"};
  app.require_subcommand(1);

  Common common;
  std::string data_dir, surrogate, kind = "icnn", state, controller = "onestep";
  std::optional<int> steps, samples;

  auto* gen = app.add_subcommand("generate-data", "solve the data problem over the grid");
  auto* fit = app.add_subcommand("fit-interp", "fit the convex interpolant surrogate");
  auto* train = app.add_subcommand("train-icnn", "train the ICNN surrogate");
  auto* ric = app.add_subcommand("riccati", "scenario-weighted Riccati terminal weight");
  auto* one = app.add_subcommand("solve-onestep", "one-step controller at a single state");
  auto* cmp = app.add_subcommand("compare", "one-step vs full controller over the grid");
  auto* sim = app.add_subcommand("simulate", "closed-loop simulation");
  auto* bench = app.add_subcommand("bench", "solve-time benchmark");
  for (auto* s : {gen, fit, train, ric, one, cmp, sim, bench}) add_common(s, common);
  for (auto* s : {fit, train, cmp, sim, bench}) {
    s->add_option("--data", data_dir, "dataset directory (default: output directory)");
  }
  for (auto* s : {one, cmp, sim, bench}) {
    s->add_option("--surrogate", surrogate, "surrogate file")->check(CLI::ExistingFile);
  }
  for (auto* s : {cmp, sim, bench}) {
    s->add_option("--kind", kind, "surrogate to build when none is given")
        ->check(CLI::IsMember({"icnn", "pwa"}));
  }
  one->add_option("--state", state, "initial state, e.g. \"0.3,-0.2\"")->required();
  one->get_option("--surrogate")->required();
  sim->add_option("--state", state, "initial state (default from config)");
  sim->add_option("--controller", controller)->check(CLI::IsMember({"onestep", "full"}));
  sim->add_option("--steps", steps, "number of steps");
  bench->add_option("--samples", samples, "timed solves per controller");

  CLI11_PARSE(app, argc, argv);

  try {
    const ExperimentConfig c = resolve(common);
    const std::string data = data_dir.empty() ? c.output_dir : data_dir;
    write_json(config_json(c), out_path(c, "config.json"));

    if (gen->parsed()) {
      const Dataset ds = generate_dataset(c);
      save_dataset(ds, c, out_path(c, "dataset.csv"), out_path(c, "dataset.json"));
      print(dataset_summary(ds, c));
    } else if (fit->parsed()) {
      build_surrogate(c, obtain_dataset(c, data), "pwa");
      print(read_json(out_path(c, "fit_pwa.json")));
    } else if (train->parsed()) {
      build_surrogate(c, obtain_dataset(c, data), "icnn");
      print(read_json(out_path(c, "train_icnn.json")));
    } else if (ric->parsed()) {
      const RiccatiResult r = solve_weighted_riccati(c.uncertainty(), c.Q, c.R);
      const Json j{{"P", detail::matrix_json(r.form.matrix())},
                   {"iterations", r.iterations},
                   {"residual", r.residual}};
      write_json(j, out_path(c, "riccati.json"));
      print(j);
    } else if (one->parsed()) {
      const SurrogateModel s = load_surrogate(surrogate);
      const Vector x = parse_state(state, c.nx());
      const OneStepSolution sol = solve_onestep(onestep_problem(c, s), x);
      const Json j{{"state", detail::vector_json(x)},
                   {"status", to_string(sol.qp.status)},
                   {"u0", detail::vector_json(sol.u0)},
                   {"value", sol.value},
                   {"slack_total", sol.slack_total},
                   {"tightness", sol.tightness},
                   {"iterations", sol.qp.iterations},
                   {"solve_time_s", sol.qp.solve_time}};
      write_json(j, out_path(c, "onestep.json"));
      print(j);
      return sol.solved() ? 0 : 2;
    } else if (cmp->parsed()) {
      const Dataset ds = obtain_dataset(c, data);
      const SurrogateModel s = obtain_surrogate(c, surrogate, data, kind);
      RunReport rep = state_sweep_compare(full_controller(c, s.P_lqr), onestep_controller(c, s),
                                          ds.states, feasibility_labels(ds, c.feasibility_threshold),
                                          c.timing.warmup, c.threads);
      rep.surrogate = s.kind() == SurrogateKind::pwa ? "pwa" : "icnn";
      rep.config_hash = config_hash(c);
      rep.seed = c.seed;
      write_csv(report_table(rep), out_path(c, "report_" + rep.surrogate + ".csv"));
      write_json(report_summary(rep), out_path(c, "report_" + rep.surrogate + ".json"));
      print(report_summary(rep));
    } else if (sim->parsed()) {
      const Vector x0 = state.empty()
                            ? Vector(Eigen::Map<const Vector>(c.simulation.initial_state.data(),
                                                              c.nx()))
                            : parse_state(state, c.nx());
      Controller ctl = controller == "full"
                           ? full_controller(c, lqr_form(c))()
                           : onestep_controller(c, obtain_surrogate(c, surrogate, data, kind))();
      const Trajectory tr = closed_loop_sim(ctl, c.model(), c.Q, c.R, x0,
                                            steps.value_or(c.simulation.steps),
                                            c.disturbance_lower, c.disturbance_upper, c.seed);
      write_csv(trajectory_table(tr), out_path(c, "trajectory_" + controller + ".csv"));
      double cost = 0.0;
      for (const double s : tr.stage_costs) cost += s;
      const Json j{{"controller", controller},
                   {"steps", tr.inputs.size()},
                   {"truncated", tr.truncated},
                   {"final_state", detail::vector_json(tr.states.back())},
                   {"total_stage_cost", cost},
                   {"solve_timing", timing_json(summarize_times(tr.solve_times))}};
      write_json(j, out_path(c, "trajectory_" + controller + ".json"));
      print(j);
    } else if (bench->parsed()) {
      const SurrogateModel s = obtain_surrogate(c, surrogate, data, kind);
      const Matrix grid = grid_states(c.grid);
      const int n = samples.value_or(c.timing.samples);
      const auto rows = sample_rows(grid.rows(), n, c.seed);
      Matrix states(static_cast<Eigen::Index>(rows.size()), grid.cols());
      for (std::size_t k = 0; k < rows.size(); ++k) {
        states.row(static_cast<Eigen::Index>(k)) = grid.row(rows[k]);
      }
      CsvTable t;
      t.header = {"controller", "grid_index"};
      for (Eigen::Index d = 0; d < c.nx(); ++d) t.header.push_back("x" + std::to_string(d + 1));
      t.header.emplace_back("t_solve_s");
      Json summary;
      std::map<std::string, double> medians;
      const std::string name = s.kind() == SurrogateKind::pwa ? "onestep_pwa" : "onestep_icnn";
      for (const auto& [label, factory] :
           {std::pair{std::string("full"), full_controller(c, s.P_lqr)},
            std::pair{name, onestep_controller(c, s)}}) {
        Controller ctl = factory();
        std::vector<double> times;
        for (const BenchSample& b : bench_controller(ctl, states, c.timing.warmup, n)) {
          std::vector<std::string> r{label, std::to_string(rows[static_cast<std::size_t>(b.state)])};
          for (Eigen::Index d = 0; d < c.nx(); ++d) r.push_back(format_double(states(b.state, d)));
          r.push_back(format_double(b.seconds));
          t.rows.push_back(std::move(r));
          times.push_back(b.seconds);
        }
        const TimingSummary ts = summarize_times(times);
        summary[label] = timing_json(ts);
        medians[label] = ts.median;
      }
      summary["speedup_median"] = medians["full"] / medians[name];
      summary["config_hash"] = config_hash(c);
      summary["seed"] = c.seed;
      write_csv(t, out_path(c, "bench.csv"));
      write_json(summary, out_path(c, "bench.json"));
      print(summary);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
