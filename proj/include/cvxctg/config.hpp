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

// Experiment configuration: a strict JSON document. Every key is optional
// and defaults to the two-state benchmark; unknown keys are rejected.

#pragma once

#include "cvxctg/common.hpp"
#include "cvxctg/icnn.hpp"
#include "cvxctg/model.hpp"
#include "cvxctg/mpc.hpp"
#include "cvxctg/qp_types.hpp"

#include <cstdint>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

namespace cvxctg {

using Json = nlohmann::json;

struct GridSpec {
  std::vector<double> lower{-1.2, -1.2};
  std::vector<double> upper{1.2, 1.2};
  std::vector<int> count{21, 21};
};

struct IcnnConfig {
  std::vector<Eigen::Index> hidden{20};
  double slope = 0.01;
  int restarts = 5;
  int max_iterations = 5000;
  double grad_tol = 1e-6;
  int memory = 10;
};

struct TimingConfig {
  int warmup = 5;
  int samples = 50;
};

struct SimulationConfig {
  int steps = 30;
  std::vector<double> initial_state{0.5, 0.5};
};

struct ExperimentConfig {
  Matrix A = (Matrix(2, 2) << 2, 1, -1, 2).finished();
  Matrix B = Matrix::Identity(2, 2);
  Vector disturbance_lower = Vector::Constant(2, -0.05);
  Vector disturbance_upper = Vector::Constant(2, 0.05);
  int horizon = 5;
  int robust_horizon = 5;
  Matrix Q = Matrix::Identity(2, 2);
  Matrix R = 2.0 * Matrix::Identity(2, 2);
  std::string terminal = "lqr";  // "lqr" (weighted Riccati solution) or "stage" (Q)
  Vector u_max = Vector::Ones(2);
  Vector x_max = Vector::Ones(2);
  GridSpec grid;
  double mu = 1e5;
  double eps_abs = 1e-8;
  double eps_rel = 1e-10;
  double train_fraction = 0.8;
  double feasibility_threshold = 1e-6;
  IcnnConfig icnn;
  TimingConfig timing;
  SimulationConfig simulation;
  std::uint64_t seed = 1;
  int threads = 0;  // 0: hardware concurrency
  std::string output_dir = "out";

  [[nodiscard]] Eigen::Index nx() const { return A.rows(); }
  [[nodiscard]] Eigen::Index nu() const { return B.cols(); }
  // The data problem is one stage shorter than the controller.
  [[nodiscard]] int data_horizon() const { return horizon - 1; }
  [[nodiscard]] int data_robust_horizon() const { return std::min(robust_horizon, horizon - 1); }

  void validate() const {
    if (A.rows() != A.cols() || B.rows() != A.rows()) throw ParameterError("model shapes");
    for (const Vector* v : {&disturbance_lower, &disturbance_upper, &x_max}) {
      if (v->size() != nx()) throw ParameterError("state-sized vector has the wrong length");
    }
    if (u_max.size() != nu()) throw ParameterError("u_max has the wrong length");
    if ((disturbance_lower.array() > disturbance_upper.array()).any()) {
      throw ParameterError("disturbance lower bound exceeds upper bound");
    }
    if ((u_max.array() <= 0.0).any() || (x_max.array() <= 0.0).any()) {
      throw ParameterError("bounds must be positive");
    }
    if (horizon < 2) throw ParameterError("horizon must be at least 2");
    if (robust_horizon < 1 || robust_horizon > horizon) {
      throw ParameterError("robust horizon must lie in [1, horizon]");
    }
    if (Q.rows() != nx() || Q.cols() != nx() || R.rows() != nu() || R.cols() != nu()) {
      throw ParameterError("cost matrix shapes");
    }
    if (terminal != "lqr" && terminal != "stage") {
      throw ParameterError("terminal must be \"lqr\" or \"stage\"");
    }
    const auto n = static_cast<std::size_t>(nx());
    if (grid.lower.size() != n || grid.upper.size() != n || grid.count.size() != n) {
      throw ParameterError("grid spec needs one entry per state");
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (grid.count[i] < 2) throw ParameterError("grid count must be at least 2 per axis");
      if (!(grid.lower[i] < grid.upper[i])) throw ParameterError("grid lower must be below upper");
    }
    if (!(mu > 0.0)) throw ParameterError("mu must be positive");
    if (!(eps_abs > 0.0) || eps_rel < 0.0) throw ParameterError("solver tolerances");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw ParameterError("train_fraction must lie in (0, 1)");
    }
    if (icnn.hidden.empty() || icnn.restarts < 1 || icnn.max_iterations < 1) {
      throw ParameterError("icnn settings");
    }
    if (timing.warmup < 0 || timing.samples < 1) throw ParameterError("timing settings");
    if (simulation.steps < 1 || simulation.initial_state.size() != n) {
      throw ParameterError("simulation settings");
    }
    if (threads < 0) throw ParameterError("threads must be non-negative");
  }

  [[nodiscard]] QpSettings solver_settings() const {
    QpSettings s;
    s.method = QpMethod::interior_point;
    s.eps_abs = eps_abs;
    s.eps_rel = eps_rel;
    return s;
  }

  [[nodiscard]] IcnnArch icnn_arch() const {
    IcnnArch a;
    a.input_dim = nx();
    a.hidden = icnn.hidden;
    a.hidden_activation = Activation::leaky(icnn.slope);
    return a;
  }

  [[nodiscard]] IcnnTrainSettings icnn_settings() const {
    IcnnTrainSettings s;
    s.restarts = icnn.restarts;
    s.seed = seed;
    s.lbfgs.max_iterations = icnn.max_iterations;
    s.lbfgs.grad_tol = icnn.grad_tol;
    s.lbfgs.memory = icnn.memory;
    return s;
  }

  [[nodiscard]] LtiModel model() const { return {A, B}; }
  [[nodiscard]] UncertaintySet uncertainty() const {
    return UncertaintySet::box_vertices(model(), disturbance_lower, disturbance_upper);
  }
  [[nodiscard]] BoundSpec bounds() const {
    return {-u_max, u_max, -x_max, x_max};
  }
};

namespace detail {

inline void reject_unknown(const Json& j, const std::string& where,
                           std::initializer_list<const char*> known) {
  if (!j.is_object()) throw ParameterError(where + " must be an object");
  const std::set<std::string> allowed(known.begin(), known.end());
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ParameterError("unknown config key: " + where + "." + key);
  }
}

inline Matrix json_matrix(const Json& j, const std::string& what) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) {
    throw ParameterError(what + " must be a non-empty array of rows");
  }
  const auto rows = static_cast<Eigen::Index>(j.size());
  const auto cols = static_cast<Eigen::Index>(j[0].size());
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Json& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols) {
      throw ParameterError(what + " rows must have equal length");
    }
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = r[static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

inline Vector json_vector(const Json& j, const std::string& what) {
  if (!j.is_array()) throw ParameterError(what + " must be an array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

inline Json matrix_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json r = Json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) r.push_back(m(i, k));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Json vector_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

template <class T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail

inline ExperimentConfig parse_config(const Json& j) {
  using detail::read_if;
  ExperimentConfig c;
  try {
    detail::reject_unknown(j, "config",
                           {"model", "disturbance", "horizon", "robust_horizon", "cost", "bounds",
                            "grid", "mu", "solver", "train_fraction", "feasibility_threshold",
                            "icnn", "timing", "simulation", "seed", "threads", "output_dir"});
    if (j.contains("model")) {
      const Json& m = j["model"];
      detail::reject_unknown(m, "model", {"A", "B"});
      if (m.contains("A")) c.A = detail::json_matrix(m["A"], "model.A");
      if (m.contains("B")) c.B = detail::json_matrix(m["B"], "model.B");
    }
    if (j.contains("disturbance")) {
      const Json& d = j["disturbance"];
      detail::reject_unknown(d, "disturbance", {"lower", "upper"});
      if (d.contains("lower")) c.disturbance_lower = detail::json_vector(d["lower"], "lower");
      if (d.contains("upper")) c.disturbance_upper = detail::json_vector(d["upper"], "upper");
    }
    read_if(j, "horizon", c.horizon);
    read_if(j, "robust_horizon", c.robust_horizon);
    if (j.contains("cost")) {
      const Json& k = j["cost"];
      detail::reject_unknown(k, "cost", {"Q", "R", "terminal"});
      if (k.contains("Q")) c.Q = detail::json_matrix(k["Q"], "cost.Q");
      if (k.contains("R")) c.R = detail::json_matrix(k["R"], "cost.R");
      read_if(k, "terminal", c.terminal);
    }
    if (j.contains("bounds")) {
      const Json& b = j["bounds"];
      detail::reject_unknown(b, "bounds", {"u_max", "x_max"});
      if (b.contains("u_max")) c.u_max = detail::json_vector(b["u_max"], "u_max");
      if (b.contains("x_max")) c.x_max = detail::json_vector(b["x_max"], "x_max");
    }
    if (j.contains("grid")) {
      const Json& g = j["grid"];
      detail::reject_unknown(g, "grid", {"lower", "upper", "count"});
      read_if(g, "lower", c.grid.lower);
      read_if(g, "upper", c.grid.upper);
      read_if(g, "count", c.grid.count);
    }
    read_if(j, "mu", c.mu);
    if (j.contains("solver")) {
      const Json& s = j["solver"];
      detail::reject_unknown(s, "solver", {"eps_abs", "eps_rel"});
      read_if(s, "eps_abs", c.eps_abs);
      read_if(s, "eps_rel", c.eps_rel);
    }
    read_if(j, "train_fraction", c.train_fraction);
    read_if(j, "feasibility_threshold", c.feasibility_threshold);
    if (j.contains("icnn")) {
      const Json& n = j["icnn"];
      detail::reject_unknown(n, "icnn",
                             {"hidden", "slope", "restarts", "max_iterations", "grad_tol", "memory"});
      read_if(n, "hidden", c.icnn.hidden);
      read_if(n, "slope", c.icnn.slope);
      read_if(n, "restarts", c.icnn.restarts);
      read_if(n, "max_iterations", c.icnn.max_iterations);
      read_if(n, "grad_tol", c.icnn.grad_tol);
      read_if(n, "memory", c.icnn.memory);
    }
    if (j.contains("timing")) {
      const Json& t = j["timing"];
      detail::reject_unknown(t, "timing", {"warmup", "samples"});
      read_if(t, "warmup", c.timing.warmup);
      read_if(t, "samples", c.timing.samples);
    }
    if (j.contains("simulation")) {
      const Json& s = j["simulation"];
      detail::reject_unknown(s, "simulation", {"steps", "initial_state"});
      read_if(s, "steps", c.simulation.steps);
      read_if(s, "initial_state", c.simulation.initial_state);
    }
    read_if(j, "seed", c.seed);
    read_if(j, "threads", c.threads);
    read_if(j, "output_dir", c.output_dir);
  } catch (const Json::exception& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline Json config_json(const ExperimentConfig& c) {
  Json j;
  j["model"] = {{"A", detail::matrix_json(c.A)}, {"B", detail::matrix_json(c.B)}};
  j["disturbance"] = {{"lower", detail::vector_json(c.disturbance_lower)},
                      {"upper", detail::vector_json(c.disturbance_upper)}};
  j["horizon"] = c.horizon;
  j["robust_horizon"] = c.robust_horizon;
  j["cost"] = {{"Q", detail::matrix_json(c.Q)},
               {"R", detail::matrix_json(c.R)},
               {"terminal", c.terminal}};
  j["bounds"] = {{"u_max", detail::vector_json(c.u_max)},
                 {"x_max", detail::vector_json(c.x_max)}};
  j["grid"] = {{"lower", c.grid.lower}, {"upper", c.grid.upper}, {"count", c.grid.count}};
  j["mu"] = c.mu;
  j["solver"] = {{"eps_abs", c.eps_abs}, {"eps_rel", c.eps_rel}};
  j["train_fraction"] = c.train_fraction;
  j["feasibility_threshold"] = c.feasibility_threshold;
  j["icnn"] = {{"hidden", c.icnn.hidden},       {"slope", c.icnn.slope},
               {"restarts", c.icnn.restarts},   {"max_iterations", c.icnn.max_iterations},
               {"grad_tol", c.icnn.grad_tol},   {"memory", c.icnn.memory}};
  j["timing"] = {{"warmup", c.timing.warmup}, {"samples", c.timing.samples}};
  j["simulation"] = {{"steps", c.simulation.steps},
                     {"initial_state", c.simulation.initial_state}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  return j;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ParameterError("cannot open config " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const Json::exception& e) {
    throw ParameterError("config " + path + ": " + e.what());
  }
  return parse_config(j);
}

/// FNV-1a over the canonical JSON dump; identifies a config in reports.
inline std::string config_hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const unsigned char ch : config_json(c).dump()) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

}  // namespace cvxctg
