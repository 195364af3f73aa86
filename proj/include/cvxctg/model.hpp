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

#pragma once

#include "cvxctg/common.hpp"

#include <algorithm>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

namespace cvxctg {

/// Discrete-time linear dynamics x+ = A x + B u.
class LtiModel {
 public:
  LtiModel(Matrix A, Matrix B) : A_(std::move(A)), B_(std::move(B)) {
    detail::require_dims(A_.rows() == A_.cols() && A_.rows() > 0, "A must be square");
    detail::require_dims(B_.rows() == A_.rows() && B_.cols() > 0, "B rows must equal n_x");
    if (!A_.allFinite() || !B_.allFinite()) throw ParameterError("model has non-finite entries");
  }

  [[nodiscard]] const Matrix& A() const { return A_; }
  [[nodiscard]] const Matrix& B() const { return B_; }
  [[nodiscard]] Eigen::Index nx() const { return A_.rows(); }
  [[nodiscard]] Eigen::Index nu() const { return B_.cols(); }

 private:
  Matrix A_;
  Matrix B_;
};

struct Realization {
  Matrix A;
  Matrix B;
  Vector d;
};

/// Finite set of weighted realizations of (A, B, d).
class UncertaintySet {
 public:
  UncertaintySet(std::vector<Realization> realizations, std::vector<double> weights)
      : realizations_(std::move(realizations)), weights_(std::move(weights)) {
    if (realizations_.empty()) throw ParameterError("uncertainty set needs at least one realization");
    if (weights_.size() != realizations_.size()) {
      throw ParameterError("one weight per realization is required");
    }
    double total = 0.0;
    for (double w : weights_) {
      if (!(w > 0.0)) throw ParameterError("realization weights must be positive");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw ParameterError(detail::concat("realization weights sum to ", total, ", not 1"));
    }
    const auto nx = realizations_.front().A.rows();
    const auto nu = realizations_.front().B.cols();
    for (const auto& r : realizations_) {
      detail::require_dims(r.A.rows() == nx && r.A.cols() == nx && r.B.rows() == nx &&
                               r.B.cols() == nu && r.d.size() == nx,
                           "realization shapes");
      if (!r.A.allFinite() || !r.B.allFinite() || !r.d.allFinite()) {
        throw ParameterError("realization has non-finite entries");
      }
    }
  }

  /// Nominal model with an additive disturbance at each listed value.
  static UncertaintySet additive(const LtiModel& model, const std::vector<Vector>& disturbances,
                                 std::vector<double> weights = {}) {
    std::vector<Realization> rs;
    rs.reserve(disturbances.size());
    for (const auto& d : disturbances) rs.push_back({model.A(), model.B(), d});
    if (weights.empty()) {
      weights.assign(disturbances.size(), 1.0 / static_cast<double>(disturbances.size()));
    }
    return {std::move(rs), std::move(weights)};
  }

  /// Vertices of the box [lower, upper] with uniform weights (2^n_x realizations).
  static UncertaintySet box_vertices(const LtiModel& model, const Vector& lower,
                                     const Vector& upper) {
    detail::require_dims(lower.size() == model.nx() && upper.size() == model.nx(),
                         "disturbance box");
    const auto nx = static_cast<int>(model.nx());
    std::vector<Vector> ds;
    for (int mask = 0; mask < (1 << nx); ++mask) {
      Vector d(nx);
      for (int i = 0; i < nx; ++i) d[i] = (mask >> i) & 1 ? upper[i] : lower[i];
      ds.push_back(d);
    }
    return additive(model, ds);
  }

  static UncertaintySet nominal(const LtiModel& model) {
    return additive(model, {Vector::Zero(model.nx())}, {1.0});
  }

  [[nodiscard]] std::size_t size() const { return realizations_.size(); }
  [[nodiscard]] const Realization& operator[](std::size_t s) const { return realizations_[s]; }
  [[nodiscard]] const std::vector<Realization>& realizations() const { return realizations_; }
  [[nodiscard]] const std::vector<double>& weights() const { return weights_; }
  [[nodiscard]] Eigen::Index nx() const { return realizations_.front().A.rows(); }
  [[nodiscard]] Eigen::Index nu() const { return realizations_.front().B.cols(); }

  [[nodiscard]] Vector mean_disturbance() const {
    Vector m = Vector::Zero(nx());
    for (std::size_t s = 0; s < size(); ++s) m += weights_[s] * realizations_[s].d;
    return m;
  }

  [[nodiscard]] bool has_zero_mean_disturbance(double tol = 1e-12) const {
    return detail::inf_norm(mean_disturbance()) <= tol;
  }

 private:
  std::vector<Realization> realizations_;
  std::vector<double> weights_;
};

/// Scenario tree with branching up to the robust horizon and single-child
/// continuation afterwards. Nodes are stored breadth first; one input per
/// non-leaf node makes the non-anticipativity constraint hold structurally.
class ScenarioTree {
 public:
  struct Node {
    std::optional<std::size_t> parent;
    int depth = 0;
    std::optional<std::size_t> realization;
    double probability = 1.0;  // product of branch weights along the path
  };

  [[nodiscard]] int horizon() const { return horizon_; }
  [[nodiscard]] int robust_horizon() const { return robust_horizon_; }
  [[nodiscard]] std::size_t num_branches() const { return branches_; }
  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const Node& node(std::size_t i) const { return nodes_[i]; }
  [[nodiscard]] const std::vector<Node>& nodes() const { return nodes_; }
  [[nodiscard]] const std::vector<std::vector<std::size_t>>& leaf_paths() const {
    return leaf_paths_;
  }
  [[nodiscard]] std::size_t num_leaves() const { return leaf_paths_.size(); }
  [[nodiscard]] bool is_leaf(std::size_t i) const { return nodes_[i].depth == horizon_; }
  [[nodiscard]] std::size_t num_non_leaf() const { return nodes_.size() - leaf_paths_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& children(std::size_t i) const {
    return children_[i];
  }

  friend ScenarioTree build_tree(const UncertaintySet&, int, int);

 private:
  int horizon_ = 0;
  int robust_horizon_ = 0;
  std::size_t branches_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> leaf_paths_;
};

inline ScenarioTree build_tree(const UncertaintySet& uncertainty, int robust_horizon,
                               int horizon) {
  if (robust_horizon < 1 || robust_horizon > horizon) {
    throw ParameterError(detail::concat("need 1 <= robust horizon (", robust_horizon,
                                        ") <= horizon (", horizon, ")"));
  }
  const std::size_t branches = uncertainty.size();
  ScenarioTree tree;
  tree.horizon_ = horizon;
  tree.robust_horizon_ = robust_horizon;
  tree.branches_ = branches;
  tree.nodes_.push_back({std::nullopt, 0, std::nullopt, 1.0});

  std::size_t level_begin = 0;
  for (int depth = 0; depth < horizon; ++depth) {
    const std::size_t level_end = tree.nodes_.size();
    for (std::size_t i = level_begin; i < level_end; ++i) {
      const ScenarioTree::Node parent = tree.nodes_[i];
      if (depth < robust_horizon) {
        for (std::size_t s = 0; s < branches; ++s) {
          tree.nodes_.push_back(
              {i, depth + 1, s, parent.probability * uncertainty.weights()[s]});
        }
      } else {
        tree.nodes_.push_back({i, depth + 1, parent.realization, parent.probability});
      }
    }
    level_begin = level_end;
  }

  tree.children_.assign(tree.nodes_.size(), {});
  for (std::size_t i = 1; i < tree.nodes_.size(); ++i) {
    tree.children_[*tree.nodes_[i].parent].push_back(i);
  }
  for (std::size_t i = level_begin; i < tree.nodes_.size(); ++i) {
    std::vector<std::size_t> path;
    for (std::optional<std::size_t> k = i; k; k = tree.nodes_[*k].parent) path.push_back(*k);
    std::reverse(path.begin(), path.end());
    tree.leaf_paths_.push_back(std::move(path));
  }
  return tree;
}

/// Node count of a tree with the given branching factor and horizons.
inline std::size_t tree_node_count(std::size_t branches, int robust_horizon, int horizon) {
  std::size_t total = 0;
  std::size_t level = 1;
  for (int k = 0; k <= robust_horizon; ++k) {
    total += level;
    if (k < robust_horizon) level *= branches;
  }
  return total + level * static_cast<std::size_t>(horizon - robust_horizon);
}

inline Vector step(const LtiModel& model, const Vector& x, const Vector& u, const Vector& d) {
  detail::require_dims(x.size() == model.nx(), "state");
  detail::require_dims(u.size() == model.nu(), "input");
  detail::require_dims(d.size() == model.nx(), "disturbance");
  return model.A() * x + model.B() * u + d;
}

}  // namespace cvxctg
