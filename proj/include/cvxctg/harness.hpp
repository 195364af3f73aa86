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

// Experiment orchestration: data generation on a state grid, surrogate
// construction, controller sweeps, timing and closed-loop simulation.

#pragma once

#include "cvxctg/config.hpp"
#include "cvxctg/convex_fit.hpp"
#include "cvxctg/icnn.hpp"
#include "cvxctg/io.hpp"
#include "cvxctg/model.hpp"
#include "cvxctg/mpc.hpp"
#include "cvxctg/onestep.hpp"
#include "cvxctg/riccati.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <mutex>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace cvxctg {

/// Runs fn(index, worker) for every index in [0, count) on a pool of
/// workers. Results must be written by index so assembly order does not
/// depend on scheduling.
template <class Fn>
void parallel_for(std::size_t count, int threads, Fn&& fn) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto run = [&](unsigned worker) {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i, worker);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
        return;
      }
    }
  };
  if (workers <= 1) {
    run(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(run, w);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

/// Tensor grid with the last axis varying fastest; one state per row.
inline Matrix grid_states(const GridSpec& g) {
  const auto dims = g.count.size();
  Eigen::Index total = 1;
  for (const int c : g.count) total *= c;
  Matrix out(total, static_cast<Eigen::Index>(dims));
  std::vector<int> idx(dims, 0);
  for (Eigen::Index r = 0; r < total; ++r) {
    for (std::size_t d = 0; d < dims; ++d) {
      const double t = static_cast<double>(idx[d]) / static_cast<double>(g.count[d] - 1);
      out(r, static_cast<Eigen::Index>(d)) = g.lower[d] + t * (g.upper[d] - g.lower[d]);
    }
    for (std::size_t d = dims; d-- > 0;) {
      if (++idx[d] < g.count[d]) break;
      idx[d] = 0;
    }
  }
  return out;
}

inline QuadraticForm lqr_form(const ExperimentConfig& c) {
  return solve_weighted_riccati(c.uncertainty(), c.Q, c.R).form;
}

inline MpcProblem make_mpc_problem(const ExperimentConfig& c, const QuadraticForm& P,
                                   int robust_horizon, int horizon) {
  const Matrix Qf = c.terminal == "lqr" ? P.matrix() : c.Q;
  return {c.uncertainty(), robust_horizon, horizon, CostSpec(c.Q, c.R, Qf), c.bounds(), true, c.mu};
}

/// The soft-constrained controller the surrogates stand in for.
inline MpcProblem full_problem(const ExperimentConfig& c, const QuadraticForm& P) {
  return make_mpc_problem(c, P, c.robust_horizon, c.horizon);
}

/// The shorter problem whose value is the cost-to-go after one step.
inline MpcProblem data_problem(const ExperimentConfig& c, const QuadraticForm& P) {
  return make_mpc_problem(c, P, c.data_robust_horizon(), c.data_horizon());
}

inline OneStepProblem onestep_problem(const ExperimentConfig& c, SurrogateModel s) {
  return {c.uncertainty(), c.Q, c.R, c.bounds(), std::move(s), true};
}

// ---------------------------------------------------------------- dataset

struct Dataset {
  Matrix states;                        // one row per solved grid state
  std::vector<Eigen::Index> grid_index;  // position of each row in the grid
  Vector value;                          // V + mu F
  Vector cost;                           // V
  Vector infeasibility;                  // F
  Vector residual;                       // V - x'P x
  Vector value_target;                   // normalized residual
  Vector feasibility_target;             // normalized F
  std::vector<char> train;               // 1 for the training split
  Normalization value_norm, feasibility_norm;
  double mu = 0.0;
  Matrix P_lqr;
  std::vector<Eigen::Index> failed;  // grid positions whose solve failed

  [[nodiscard]] Eigen::Index size() const { return states.rows(); }
  [[nodiscard]] Eigen::Index num_train() const {
    return static_cast<Eigen::Index>(std::count(train.begin(), train.end(), 1));
  }
  [[nodiscard]] bool feasible(Eigen::Index i, double threshold) const {
    return infeasibility[i] <= threshold;
  }

  /// Inputs and normalized targets of one split.
  [[nodiscard]] FitDataset split(bool training, bool feasibility) const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < size(); ++i) {
      if (static_cast<bool>(train[static_cast<std::size_t>(i)]) == training) rows.push_back(i);
    }
    Matrix X(static_cast<Eigen::Index>(rows.size()), states.cols());
    Vector y(static_cast<Eigen::Index>(rows.size()));
    const Vector& t = feasibility ? feasibility_target : value_target;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      X.row(static_cast<Eigen::Index>(k)) = states.row(rows[k]);
      y[static_cast<Eigen::Index>(k)] = t[rows[k]];
    }
    return {std::move(X), std::move(y)};
  }
};

/// Seeded 80/20-style split: the first floor(fraction * m) entries of a
/// shuffled index list train.
inline std::vector<char> split_labels(Eigen::Index m, double fraction, std::uint64_t seed) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(m)));
  std::vector<char> labels(static_cast<std::size_t>(m), 0);
  for (std::size_t k = 0; k < n_train; ++k) labels[static_cast<std::size_t>(order[k])] = 1;
  return labels;
}

inline Dataset generate_dataset(const ExperimentConfig& c) {
  c.validate();
  const QuadraticForm P = lqr_form(c);
  const MpcProblem problem = data_problem(c, P);
  const Matrix grid = grid_states(c.grid);
  const auto m = static_cast<std::size_t>(grid.rows());

  std::vector<MpcSolution> sols(m);
  std::vector<std::unique_ptr<MultistageMpc>> workers(
      static_cast<std::size_t>(std::max(1u, c.threads > 0 ? static_cast<unsigned>(c.threads)
                                                          : std::thread::hardware_concurrency())));
  parallel_for(m, static_cast<int>(workers.size()), [&](std::size_t i, unsigned w) {
    if (!workers[w]) workers[w] = std::make_unique<MultistageMpc>(problem, c.solver_settings());
    sols[i] = workers[w]->solve(grid.row(static_cast<Eigen::Index>(i)).transpose());
  });

  Dataset ds;
  ds.mu = c.mu;
  ds.P_lqr = P.matrix();
  std::vector<Eigen::Index> ok;
  for (std::size_t i = 0; i < m; ++i) {
    if (sols[i].solved()) {
      ok.push_back(static_cast<Eigen::Index>(i));
    } else {
      ds.failed.push_back(static_cast<Eigen::Index>(i));
    }
  }
  const auto n = static_cast<Eigen::Index>(ok.size());
  if (n < 2) throw ProblemError("fewer than two grid states could be solved");
  ds.states.resize(n, grid.cols());
  ds.value.resize(n);
  ds.cost.resize(n);
  ds.infeasibility.resize(n);
  ds.residual.resize(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = sols[static_cast<std::size_t>(ok[static_cast<std::size_t>(k)])];
    const Vector x = grid.row(ok[static_cast<std::size_t>(k)]).transpose();
    const ValueDecomposition d = decompose_value(s, c.mu);
    ds.states.row(k) = x.transpose();
    ds.value[k] = s.value;
    ds.cost[k] = d.cost;
    // Slacks are nonnegative in exact arithmetic; round-off is clipped.
    ds.infeasibility[k] = std::max(d.infeasibility, 0.0);
    ds.residual[k] = d.cost - quadratic_value(P, x);
  }
  ds.grid_index = ok;
  ds.train = split_labels(n, c.train_fraction, c.seed);

  std::vector<double> rv, rf;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (ds.train[static_cast<std::size_t>(k)]) {
      rv.push_back(ds.residual[k]);
      rf.push_back(ds.infeasibility[k]);
    }
  }
  ds.value_norm = Normalization::from_range(Eigen::Map<const Vector>(rv.data(), static_cast<Eigen::Index>(rv.size())));
  ds.feasibility_norm = Normalization::from_range(Eigen::Map<const Vector>(rf.data(), static_cast<Eigen::Index>(rf.size())));
  ds.value_target = ds.residual.unaryExpr([&](double v) { return ds.value_norm.normalize(v); });
  ds.feasibility_target =
      ds.infeasibility.unaryExpr([&](double v) { return ds.feasibility_norm.normalize(v); });
  return ds;
}

inline CsvTable dataset_table(const Dataset& ds) {
  CsvTable t;
  t.header.push_back("grid_index");
  for (Eigen::Index d = 0; d < ds.states.cols(); ++d) t.header.push_back("x" + std::to_string(d + 1));
  for (const char* h : {"value", "cost", "infeasibility", "residual", "value_target",
                        "feasibility_target", "split"}) {
    t.header.emplace_back(h);
  }
  for (Eigen::Index i = 0; i < ds.size(); ++i) {
    std::vector<std::string> r{std::to_string(ds.grid_index[static_cast<std::size_t>(i)])};
    for (Eigen::Index d = 0; d < ds.states.cols(); ++d) r.push_back(format_double(ds.states(i, d)));
    for (const Vector* v : {&ds.value, &ds.cost, &ds.infeasibility, &ds.residual,
                            &ds.value_target, &ds.feasibility_target}) {
      r.push_back(format_double((*v)[i]));
    }
    r.emplace_back(ds.train[static_cast<std::size_t>(i)] ? "train" : "test");
    t.rows.push_back(std::move(r));
  }
  return t;
}

inline Json dataset_summary(const Dataset& ds, const ExperimentConfig& c) {
  Json j;
  j["states"] = ds.size();
  j["train"] = ds.num_train();
  j["test"] = ds.size() - ds.num_train();
  j["failures"] = ds.failed.size();
  j["failed_grid_index"] = ds.failed;
  j["mu"] = ds.mu;
  j["P_lqr"] = detail::matrix_json(ds.P_lqr);
  j["value_normalization"] = {{"scale", ds.value_norm.scale}, {"offset", ds.value_norm.offset}};
  j["feasibility_normalization"] = {{"scale", ds.feasibility_norm.scale},
                                    {"offset", ds.feasibility_norm.offset}};
  Eigen::Index feasible = 0;
  for (Eigen::Index i = 0; i < ds.size(); ++i) feasible += ds.feasible(i, c.feasibility_threshold);
  j["feasible_states"] = feasible;
  j["config_hash"] = config_hash(c);
  j["seed"] = c.seed;
  return j;
}

inline void save_dataset(const Dataset& ds, const ExperimentConfig& c, const std::string& csv,
                         const std::string& summary) {
  write_csv(dataset_table(ds), csv);
  write_json(dataset_summary(ds, c), summary);
}

inline Dataset load_dataset(const std::string& csv, const std::string& summary) {
  const CsvTable t = read_csv(csv);
  const Json j = read_json(summary);
  Dataset ds;
  Eigen::Index nx = 0;
  while (std::find(t.header.begin(), t.header.end(), "x" + std::to_string(nx + 1)) != t.header.end()) ++nx;
  if (nx == 0) throw LoadError(csv + ": no state columns");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  ds.states.resize(n, nx);
  for (Vector* v : {&ds.value, &ds.cost, &ds.infeasibility, &ds.residual, &ds.value_target,
                    &ds.feasibility_target}) {
    v->resize(n);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    ds.grid_index.push_back(static_cast<Eigen::Index>(t.number(r, "grid_index")));
    for (Eigen::Index d = 0; d < nx; ++d) ds.states(i, d) = t.number(r, "x" + std::to_string(d + 1));
    ds.value[i] = t.number(r, "value");
    ds.cost[i] = t.number(r, "cost");
    ds.infeasibility[i] = t.number(r, "infeasibility");
    ds.residual[i] = t.number(r, "residual");
    ds.value_target[i] = t.number(r, "value_target");
    ds.feasibility_target[i] = t.number(r, "feasibility_target");
    const std::string& split = t.rows[r][t.column("split")];
    if (split != "train" && split != "test") throw LoadError(csv + ": bad split label " + split);
    ds.train.push_back(split == "train" ? 1 : 0);
  }
  try {
    ds.mu = j.at("mu").get<double>();
    ds.P_lqr = detail::json_matrix(j.at("P_lqr"), "P_lqr");
    ds.value_norm = {j.at("value_normalization").at("scale").get<double>(),
                     j.at("value_normalization").at("offset").get<double>()};
    ds.feasibility_norm = {j.at("feasibility_normalization").at("scale").get<double>(),
                           j.at("feasibility_normalization").at("offset").get<double>()};
    ds.failed = j.at("failed_grid_index").get<std::vector<Eigen::Index>>();
  } catch (const Json::exception& e) {
    throw LoadError(summary + ": " + e.what());
  }
  return ds;
}

// ------------------------------------------------------------- surrogates

struct PwaBuild {
  SurrogateModel model;
  FitResult value_fit, feasibility_fit;
};

/// Convex interpolants fitted to the training split.
inline PwaBuild build_pwa_surrogate(const Dataset& ds,
                                    const QpSettings& settings = default_fit_settings()) {
  FitResult v = fit_interpolant(ds.split(true, false), settings);
  FitResult f = fit_interpolant(ds.split(true, true), settings);
  SurrogateModel m{v.interpolant, f.interpolant, ds.value_norm, ds.feasibility_norm,
                   QuadraticForm(ds.P_lqr), ds.mu};
  return {std::move(m), std::move(v), std::move(f)};
}

struct IcnnBuild {
  SurrogateModel model;
  TrainResult value_training, feasibility_training;
};

/// The value network trains with the configured seed, the feasibility
/// network with seed + 1.
inline IcnnBuild build_icnn_surrogate(const Dataset& ds, const ExperimentConfig& c) {
  const IcnnArch arch = c.icnn_arch();
  IcnnTrainSettings s = c.icnn_settings();
  TrainResult v = train_icnn(ds.split(true, false), ds.split(false, false), arch, s);
  s.seed = c.seed + 1;
  TrainResult f = train_icnn(ds.split(true, true), ds.split(false, true), arch, s);
  SurrogateModel m{IcnnNet{arch, v.params}, IcnnNet{arch, f.params}, ds.value_norm,
                   ds.feasibility_norm, QuadraticForm(ds.P_lqr), ds.mu};
  return {std::move(m), std::move(v), std::move(f)};
}

// ------------------------------------------------------------ controllers

struct ControlResult {
  Vector u0;
  bool solved = false;
  double value = 0.0;
  double slack = 0.0;
};

/// One controller instance; not safe to share between threads.
using Controller = std::function<ControlResult(const Vector& x)>;
using ControllerFactory = std::function<Controller()>;

inline ControllerFactory full_controller(const ExperimentConfig& c, const QuadraticForm& P) {
  return [problem = full_problem(c, P), settings = c.solver_settings()]() -> Controller {
    auto mpc = std::make_shared<MultistageMpc>(problem, settings);
    return [mpc](const Vector& x) {
      const MpcSolution s = mpc->solve(x);
      return ControlResult{s.u0, s.solved(), s.value, s.slack_total};
    };
  };
}

inline ControllerFactory onestep_controller(const ExperimentConfig& c, const SurrogateModel& s) {
  return [problem = onestep_problem(c, s)]() -> Controller {
    auto ctl = std::make_shared<OneStepController>(problem);
    return [ctl](const Vector& x) {
      const OneStepSolution s = ctl->solve(x);
      return ControlResult{s.u0, s.solved(), s.value, s.slack_total};
    };
  };
}

// ----------------------------------------------------------------- timing

struct TimingSummary {
  std::vector<double> samples;  // seconds
  double median = 0.0, p10 = 0.0, p90 = 0.0, mean = 0.0;
};

/// Linear interpolation between order statistics.
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw ParameterError("percentile of an empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

inline TimingSummary summarize_times(std::vector<double> samples) {
  TimingSummary t;
  if (samples.empty()) return t;
  t.median = percentile(samples, 0.5);
  t.p10 = percentile(samples, 0.1);
  t.p90 = percentile(samples, 0.9);
  t.mean = std::accumulate(samples.begin(), samples.end(), 0.0) / static_cast<double>(samples.size());
  t.samples = std::move(samples);
  return t;
}

inline Json timing_json(const TimingSummary& t) {
  return {{"samples", t.samples.size()}, {"median_s", t.median}, {"p10_s", t.p10},
          {"p90_s", t.p90}, {"mean_s", t.mean}};
}

template <class Fn>
double wall_time(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct BenchSample {
  Eigen::Index state;
  double seconds;
};

/// Warmup solves are discarded; timed solves cycle through the states on a
/// single thread.
inline std::vector<BenchSample> bench_controller(Controller& ctl, const Matrix& states, int warmup,
                                                 int samples) {
  if (states.rows() == 0) throw ParameterError("no states to benchmark");
  for (int k = 0; k < warmup; ++k) ctl(states.row(k % states.rows()).transpose());
  std::vector<BenchSample> out;
  for (int k = 0; k < samples; ++k) {
    const Eigen::Index i = k % states.rows();
    const Vector x = states.row(i).transpose();
    out.push_back({i, wall_time([&] { ctl(x); })});
  }
  return out;
}

/// Seeded choice of `count` distinct rows (all rows when count exceeds them).
inline std::vector<Eigen::Index> sample_rows(Eigen::Index rows, int count, std::uint64_t seed) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(rows));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min<std::size_t>(order.size(), static_cast<std::size_t>(count)));
  return order;
}

// ------------------------------------------------------------------ sweep

struct CompareRow {
  Eigen::Index index = 0;
  Vector state;
  bool feasible = false;
  ControlResult full, onestep;
  double error = 0.0;  // mean over inputs of |u0 difference|
  double full_time = 0.0, onestep_time = 0.0;
};

struct RunReport {
  std::string surrogate;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<CompareRow> rows;
  double mae_feasible = 0.0, mae_infeasible = 0.0;
  Eigen::Index num_feasible = 0, num_infeasible = 0;
  Eigen::Index full_failures = 0, onestep_failures = 0;
  TimingSummary full_timing, onestep_timing;
};

/// Both controllers solve every state; errors are split by the supplied
/// feasibility labels. Timings are per solve, after `warmup` discarded
/// solves per worker and controller.
inline RunReport state_sweep_compare(const ControllerFactory& full, const ControllerFactory& onestep,
                                     const Matrix& states, const std::vector<char>& feasible,
                                     int warmup = 5, int threads = 0) {
  detail::require_dims(feasible.size() == static_cast<std::size_t>(states.rows()),
                       "one feasibility label per state");
  const auto m = static_cast<std::size_t>(states.rows());
  RunReport rep;
  rep.rows.resize(m);
  const unsigned nw = threads > 0 ? static_cast<unsigned>(threads)
                                  : std::max(1u, std::thread::hardware_concurrency());
  std::vector<Controller> fulls(nw), ones(nw);
  parallel_for(m, static_cast<int>(nw), [&](std::size_t i, unsigned w) {
    if (!fulls[w]) {
      fulls[w] = full();
      ones[w] = onestep();
      const Vector x0 = states.row(0).transpose();
      for (int k = 0; k < warmup; ++k) {
        fulls[w](x0);
        ones[w](x0);
      }
    }
    CompareRow& r = rep.rows[i];
    r.index = static_cast<Eigen::Index>(i);
    r.state = states.row(r.index).transpose();
    r.feasible = feasible[i] != 0;
    r.full_time = wall_time([&] { r.full = fulls[w](r.state); });
    r.onestep_time = wall_time([&] { r.onestep = ones[w](r.state); });
    r.error = (r.full.u0 - r.onestep.u0).cwiseAbs().mean();
  });

  double sum_f = 0.0, sum_i = 0.0;
  std::vector<double> tf, to;
  for (const auto& r : rep.rows) {
    rep.full_failures += !r.full.solved;
    rep.onestep_failures += !r.onestep.solved;
    tf.push_back(r.full_time);
    to.push_back(r.onestep_time);
    if (!r.full.solved || !r.onestep.solved) continue;
    if (r.feasible) {
      sum_f += r.error;
      ++rep.num_feasible;
    } else {
      sum_i += r.error;
      ++rep.num_infeasible;
    }
  }
  rep.mae_feasible = rep.num_feasible ? sum_f / static_cast<double>(rep.num_feasible) : 0.0;
  rep.mae_infeasible = rep.num_infeasible ? sum_i / static_cast<double>(rep.num_infeasible) : 0.0;
  rep.full_timing = summarize_times(std::move(tf));
  rep.onestep_timing = summarize_times(std::move(to));
  return rep;
}

/// Timing columns are prefixed "t_" so reproducibility checks can drop them.
inline CsvTable report_table(const RunReport& rep) {
  CsvTable t;
  const Eigen::Index nx = rep.rows.empty() ? 0 : rep.rows.front().state.size();
  const Eigen::Index nu = rep.rows.empty() ? 0 : rep.rows.front().full.u0.size();
  t.header.emplace_back("index");
  for (Eigen::Index d = 0; d < nx; ++d) t.header.push_back("x" + std::to_string(d + 1));
  t.header.emplace_back("feasible");
  for (const char* c : {"u_full_", "u_onestep_"}) {
    for (Eigen::Index d = 0; d < nu; ++d) t.header.push_back(c + std::to_string(d + 1));
  }
  for (const char* h : {"abs_error", "full_solved", "onestep_solved", "full_value",
                        "onestep_value", "t_full_s", "t_onestep_s"}) {
    t.header.emplace_back(h);
  }
  for (const auto& r : rep.rows) {
    std::vector<std::string> row{std::to_string(r.index)};
    for (Eigen::Index d = 0; d < nx; ++d) row.push_back(format_double(r.state[d]));
    row.emplace_back(r.feasible ? "1" : "0");
    for (const ControlResult* c : {&r.full, &r.onestep}) {
      for (Eigen::Index d = 0; d < nu; ++d) row.push_back(format_double(c->u0[d]));
    }
    row.push_back(format_double(r.error));
    row.emplace_back(r.full.solved ? "1" : "0");
    row.emplace_back(r.onestep.solved ? "1" : "0");
    row.push_back(format_double(r.full.value));
    row.push_back(format_double(r.onestep.value));
    row.push_back(format_double(r.full_time));
    row.push_back(format_double(r.onestep_time));
    t.rows.push_back(std::move(row));
  }
  return t;
}

inline Json report_summary(const RunReport& rep) {
  Json j;
  j["surrogate"] = rep.surrogate;
  j["config_hash"] = rep.config_hash;
  j["seed"] = rep.seed;
  j["states"] = rep.rows.size();
  j["feasible_states"] = rep.num_feasible;
  j["infeasible_states"] = rep.num_infeasible;
  j["mae_feasible"] = rep.mae_feasible;
  j["mae_infeasible"] = rep.mae_infeasible;
  j["full_failures"] = rep.full_failures;
  j["onestep_failures"] = rep.onestep_failures;
  j["full_timing"] = timing_json(rep.full_timing);
  j["onestep_timing"] = timing_json(rep.onestep_timing);
  return j;
}

// ------------------------------------------------------------ closed loop

struct Trajectory {
  std::vector<Vector> states;  // steps + 1 when complete
  std::vector<Vector> inputs;
  std::vector<Vector> disturbances;
  std::vector<double> stage_costs;
  std::vector<double> solve_times;
  bool truncated = false;  // the controller failed before the last step
};

/// Applies u0 of the controller, then steps the nominal model with a
/// disturbance drawn uniformly from [d_lower, d_upper].
inline Trajectory closed_loop_sim(Controller& ctl, const LtiModel& model, const Matrix& Q,
                                  const Matrix& R, const Vector& x0, int steps,
                                  const Vector& d_lower, const Vector& d_upper,
                                  std::uint64_t seed) {
  detail::require_dims(x0.size() == model.nx() && d_lower.size() == model.nx() &&
                           d_upper.size() == model.nx(),
                       "simulation vectors");
  if (steps < 0) throw ParameterError("steps must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Trajectory tr;
  tr.states.push_back(x0);
  for (int k = 0; k < steps; ++k) {
    const Vector& x = tr.states.back();
    ControlResult res;
    tr.solve_times.push_back(wall_time([&] { res = ctl(x); }));
    if (!res.solved) {
      tr.truncated = true;
      break;
    }
    Vector d(model.nx());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      d[i] = d_lower[i] + unit(rng) * (d_upper[i] - d_lower[i]);
    }
    tr.inputs.push_back(res.u0);
    tr.disturbances.push_back(d);
    tr.stage_costs.push_back(x.dot(Q * x) + res.u0.dot(R * res.u0));
    tr.states.push_back(step(model, x, res.u0, d));
  }
  return tr;
}

inline CsvTable trajectory_table(const Trajectory& tr) {
  CsvTable t;
  const Eigen::Index nx = tr.states.front().size();
  const Eigen::Index nu = tr.inputs.empty() ? 0 : tr.inputs.front().size();
  t.header.emplace_back("step");
  for (Eigen::Index d = 0; d < nx; ++d) t.header.push_back("x" + std::to_string(d + 1));
  for (Eigen::Index d = 0; d < nu; ++d) t.header.push_back("u" + std::to_string(d + 1));
  for (Eigen::Index d = 0; d < nx; ++d) t.header.push_back("d" + std::to_string(d + 1));
  t.header.emplace_back("stage_cost");
  t.header.emplace_back("t_solve_s");
  for (std::size_t k = 0; k < tr.inputs.size(); ++k) {
    std::vector<std::string> r{std::to_string(k)};
    for (Eigen::Index d = 0; d < nx; ++d) r.push_back(format_double(tr.states[k][d]));
    for (Eigen::Index d = 0; d < nu; ++d) r.push_back(format_double(tr.inputs[k][d]));
    for (Eigen::Index d = 0; d < nx; ++d) r.push_back(format_double(tr.disturbances[k][d]));
    r.push_back(format_double(tr.stage_costs[k]));
    r.push_back(format_double(tr.solve_times[k]));
    t.rows.push_back(std::move(r));
  }
  return t;
}

}  // namespace cvxctg
