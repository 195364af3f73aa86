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

// Nominal, multistage and soft-constrained linear MPC over a scenario tree.
//
// Decision vector layout (root state is pinned to x_hat and eliminated):
//   [ x_n for every non-root node | u_n for every non-leaf node |
//     eta_upper_n, eta_lower_n for every non-root node (soft mode only) ]
// Costs are weighted by the node's path probability, so expanding the sum
// per leaf reproduces sum_s w_s V_{N,s}.

#pragma once

#include "cvxctg/common.hpp"
#include "cvxctg/model.hpp"
#include "cvxctg/qp.hpp"

#include <memory>
#include <optional>
#include <utility>
#include <vector>

namespace cvxctg {

struct CostSpec {
  Matrix Q;
  Matrix R;
  Matrix Qf;

  CostSpec(Matrix q, Matrix r, Matrix qf) : Q(std::move(q)), R(std::move(r)), Qf(std::move(qf)) {
    for (const Matrix* m : {&Q, &R, &Qf}) {
      if (!detail::is_symmetric(*m, 1e-12)) throw ParameterError("cost matrix is not symmetric");
      if (detail::min_eigenvalue(*m) <= 0.0) {
        throw ParameterError("cost matrix is not positive definite");
      }
    }
    detail::require_dims(Qf.rows() == Q.rows(), "Qf must match Q");
  }
};

struct BoundSpec {
  Vector u_lower, u_upper;
  Vector x_lower, x_upper;

  BoundSpec(Vector ul, Vector uu, Vector xl, Vector xu)
      : u_lower(std::move(ul)), u_upper(std::move(uu)), x_lower(std::move(xl)),
        x_upper(std::move(xu)) {
    detail::require_dims(u_lower.size() == u_upper.size(), "input bounds");
    detail::require_dims(x_lower.size() == x_upper.size(), "state bounds");
    if ((u_lower.array() > u_upper.array()).any() || (x_lower.array() > x_upper.array()).any()) {
      throw ParameterError("lower bound exceeds upper bound");
    }
  }

  static BoundSpec symmetric_box(Eigen::Index nu, double u_max, Eigen::Index nx, double x_max) {
    return {Vector::Constant(nu, -u_max), Vector::Constant(nu, u_max),
            Vector::Constant(nx, -x_max), Vector::Constant(nx, x_max)};
  }
};

struct MpcProblem {
  UncertaintySet uncertainty;
  ScenarioTree tree;
  CostSpec cost;
  BoundSpec bounds;
  bool soft_states = false;
  double mu = 1e5;

  MpcProblem(UncertaintySet u, int robust_horizon, int horizon, CostSpec c, BoundSpec b,
             bool soft = false, double penalty = 1e5)
      : uncertainty(std::move(u)), tree(build_tree(uncertainty, robust_horizon, horizon)),
        cost(std::move(c)), bounds(std::move(b)), soft_states(soft), mu(penalty) {
    validate();
  }

  [[nodiscard]] Eigen::Index nx() const { return uncertainty.nx(); }
  [[nodiscard]] Eigen::Index nu() const { return uncertainty.nu(); }

  void validate() const {
    detail::require_dims(cost.Q.rows() == nx() && cost.R.rows() == nu(), "cost vs model");
    detail::require_dims(bounds.x_lower.size() == nx() && bounds.u_lower.size() == nu(),
                         "bounds vs model");
    if (soft_states && !(mu > 0.0)) throw ParameterError("soft constraints need mu > 0");
  }
};

struct MpcSolution {
  Vector u0;
  double value = 0.0;
  std::vector<Vector> node_states;   // indexed by tree node, root = x_hat
  std::vector<Vector> node_inputs;   // indexed by tree node, empty for leaves
  double slack_total = 0.0;          // probability-weighted sum of state slacks
  bool soft = false;
  QpSolution qp;

  [[nodiscard]] QpStatus status() const { return qp.status; }
  [[nodiscard]] bool solved() const { return qp.solved(); }
};

/// Index bookkeeping for the decision vector of an MPC problem.
class MpcLayout {
 public:
  explicit MpcLayout(const MpcProblem& p) {
    const auto& tree = p.tree;
    const auto nx = p.nx();
    const auto nu = p.nu();
    state_.assign(tree.size(), -1);
    input_.assign(tree.size(), -1);
    slack_.assign(tree.size(), -1);
    Eigen::Index next = 0;
    for (std::size_t i = 1; i < tree.size(); ++i) {
      state_[i] = next;
      next += nx;
    }
    num_states_ = next;
    for (std::size_t i = 0; i < tree.size(); ++i) {
      if (!tree.is_leaf(i)) {
        input_[i] = next;
        next += nu;
      }
    }
    num_inputs_ = next - num_states_;
    if (p.soft_states) {
      for (std::size_t i = 1; i < tree.size(); ++i) {
        slack_[i] = next;
        next += 2 * nx;
      }
    }
    num_slacks_ = next - num_states_ - num_inputs_;
    num_variables_ = next;
  }

  [[nodiscard]] Eigen::Index state(std::size_t node) const { return state_[node]; }
  [[nodiscard]] Eigen::Index input(std::size_t node) const { return input_[node]; }
  // eta_upper starts here, eta_lower follows after n_x entries
  [[nodiscard]] Eigen::Index slack(std::size_t node) const { return slack_[node]; }
  [[nodiscard]] Eigen::Index num_variables() const { return num_variables_; }
  [[nodiscard]] Eigen::Index num_state_variables() const { return num_states_; }
  [[nodiscard]] Eigen::Index num_input_variables() const { return num_inputs_; }
  [[nodiscard]] Eigen::Index num_slack_variables() const { return num_slacks_; }

 private:
  std::vector<Eigen::Index> state_, input_, slack_;
  Eigen::Index num_states_ = 0, num_inputs_ = 0, num_slacks_ = 0, num_variables_ = 0;
};

namespace detail {

inline void add_block(std::vector<Triplet>& t, Eigen::Index row, Eigen::Index col,
                      const Matrix& m, double scale = 1.0) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (m(i, j) != 0.0) {
        t.emplace_back(static_cast<int>(row + i), static_cast<int>(col + j), scale * m(i, j));
      }
    }
  }
}

inline void add_identity(std::vector<Triplet>& t, Eigen::Index row, Eigen::Index col,
                         Eigen::Index n, double value = 1.0) {
  for (Eigen::Index i = 0; i < n; ++i) {
    t.emplace_back(static_cast<int>(row + i), static_cast<int>(col + i), value);
  }
}

}  // namespace detail

/// Assembles and solves one MPC problem for varying initial states. The
/// QP structure does not depend on x_hat, so the solver (and its
/// factorization) is built once and only the bounds change per call.
class MultistageMpc {
 public:
  explicit MultistageMpc(MpcProblem problem, QpSettings settings = {})
      : problem_(std::move(problem)), layout_(problem_), settings_(settings) {
    build_structure();
  }

  [[nodiscard]] const MpcProblem& problem() const { return problem_; }
  [[nodiscard]] const MpcLayout& layout() const { return layout_; }

  [[nodiscard]] SparseQp assemble(const Vector& x_hat) const {
    check_state(x_hat);
    SparseQp qp = base_;
    fill_bounds(x_hat, qp.l, qp.u);
    return qp;
  }

  MpcSolution solve(const Vector& x_hat) {
    check_state(x_hat);
    if (!solver_) solver_ = std::make_unique<QpSolver>(base_, settings_);
    Vector l = base_.l, u = base_.u;
    fill_bounds(x_hat, l, u);
    solver_->update_bounds(l, u);
    return extract(x_hat, solver_->solve());
  }

 private:
  void check_state(const Vector& x_hat) const {
    detail::require_dims(x_hat.size() == problem_.nx(), "initial state");
    if (!x_hat.allFinite()) throw ParameterError("initial state is not finite");
  }

  void build_structure() {
    const auto& p = problem_;
    const auto& tree = p.tree;
    const auto nx = p.nx();
    const auto nu = p.nu();
    const auto n = layout_.num_variables();

    std::vector<Triplet> hess;
    Vector q = Vector::Zero(n);
    for (std::size_t i = 0; i < tree.size(); ++i) {
      const double prob = tree.node(i).probability;
      if (i != 0) {
        const Matrix& W = tree.is_leaf(i) ? p.cost.Qf : p.cost.Q;
        detail::add_block(hess, layout_.state(i), layout_.state(i), W, 2.0 * prob);
      }
      if (!tree.is_leaf(i)) {
        detail::add_block(hess, layout_.input(i), layout_.input(i), p.cost.R, 2.0 * prob);
      }
      if (p.soft_states && i != 0) {
        q.segment(layout_.slack(i), 2 * nx).setConstant(p.mu * prob);
      }
    }

    std::vector<Triplet> cons;
    Eigen::Index row = 0;
    dynamics_row_.assign(tree.size(), -1);
    for (std::size_t i = 1; i < tree.size(); ++i) {
      const auto& node = tree.node(i);
      const auto& r = p.uncertainty[*node.realization];
      const std::size_t parent = *node.parent;
      dynamics_row_[i] = row;
      detail::add_identity(cons, row, layout_.state(i), nx);
      if (parent != 0) detail::add_block(cons, row, layout_.state(parent), r.A, -1.0);
      detail::add_block(cons, row, layout_.input(parent), r.B, -1.0);
      row += nx;
    }
    const Eigen::Index input_rows = row;
    for (std::size_t i = 0; i < tree.size(); ++i) {
      if (tree.is_leaf(i)) continue;
      detail::add_identity(cons, row, layout_.input(i), nu);
      row += nu;
    }
    const Eigen::Index state_rows = row;
    for (std::size_t i = 1; i < tree.size(); ++i) {
      if (p.soft_states) {
        // x - eta_u <= x_upper ; x + eta_l >= x_lower ; eta >= 0
        detail::add_identity(cons, row, layout_.state(i), nx);
        detail::add_identity(cons, row, layout_.slack(i), nx, -1.0);
        row += nx;
        detail::add_identity(cons, row, layout_.state(i), nx);
        detail::add_identity(cons, row, layout_.slack(i) + nx, nx, 1.0);
        row += nx;
        detail::add_identity(cons, row, layout_.slack(i), 2 * nx);
        row += 2 * nx;
      } else {
        detail::add_identity(cons, row, layout_.state(i), nx);
        row += nx;
      }
    }

    base_.P = SparseMatrix(n, n);
    base_.P.setFromTriplets(hess.begin(), hess.end());
    base_.q = q;
    base_.A = SparseMatrix(row, n);
    base_.A.setFromTriplets(cons.begin(), cons.end());
    base_.P.makeCompressed();
    base_.A.makeCompressed();
    base_.l = Vector::Zero(row);
    base_.u = Vector::Zero(row);

    row = input_rows;
    for (std::size_t i = 0; i < tree.size(); ++i) {
      if (tree.is_leaf(i)) continue;
      base_.l.segment(row, nu) = p.bounds.u_lower;
      base_.u.segment(row, nu) = p.bounds.u_upper;
      row += nu;
    }
    row = state_rows;
    for (std::size_t i = 1; i < tree.size(); ++i) {
      if (p.soft_states) {
        base_.l.segment(row, nx).setConstant(-kInfinity);
        base_.u.segment(row, nx) = p.bounds.x_upper;
        row += nx;
        base_.l.segment(row, nx) = p.bounds.x_lower;
        base_.u.segment(row, nx).setConstant(kInfinity);
        row += nx;
        base_.l.segment(row, 2 * nx).setZero();
        base_.u.segment(row, 2 * nx).setConstant(kInfinity);
        row += 2 * nx;
      } else {
        base_.l.segment(row, nx) = p.bounds.x_lower;
        base_.u.segment(row, nx) = p.bounds.x_upper;
        row += nx;
      }
    }
    fill_bounds(Vector::Zero(nx), base_.l, base_.u);
  }

  // Dynamics right-hand sides: d_s, plus A_s x_hat on children of the root.
  void fill_bounds(const Vector& x_hat, Vector& l, Vector& u) const {
    const auto& tree = problem_.tree;
    const auto nx = problem_.nx();
    for (std::size_t i = 1; i < tree.size(); ++i) {
      const auto& node = tree.node(i);
      const auto& r = problem_.uncertainty[*node.realization];
      Vector rhs = r.d;
      if (*node.parent == 0) rhs.noalias() += r.A * x_hat;
      l.segment(dynamics_row_[i], nx) = rhs;
      u.segment(dynamics_row_[i], nx) = rhs;
    }
  }

  MpcSolution extract(const Vector& x_hat, QpSolution qp) const {
    const auto& tree = problem_.tree;
    const auto nx = problem_.nx();
    const auto nu = problem_.nu();
    MpcSolution s;
    s.soft = problem_.soft_states;
    s.node_states.resize(tree.size());
    s.node_inputs.resize(tree.size());
    s.node_states[0] = x_hat;
    for (std::size_t i = 0; i < tree.size(); ++i) {
      if (i != 0) s.node_states[i] = qp.x.segment(layout_.state(i), nx);
      if (!tree.is_leaf(i)) s.node_inputs[i] = qp.x.segment(layout_.input(i), nu);
      if (problem_.soft_states && i != 0) {
        s.slack_total += tree.node(i).probability * qp.x.segment(layout_.slack(i), 2 * nx).sum();
      }
    }
    s.u0 = s.node_inputs[0];
    s.value = qp.objective + x_hat.dot(problem_.cost.Q * x_hat);
    s.qp = std::move(qp);
    return s;
  }

  MpcProblem problem_;
  MpcLayout layout_;
  QpSettings settings_;
  SparseQp base_;
  std::vector<Eigen::Index> dynamics_row_;
  std::unique_ptr<QpSolver> solver_;
};

inline SparseQp assemble_qp(const MpcProblem& problem, const Vector& x_hat) {
  return MultistageMpc(problem).assemble(x_hat);
}

inline MpcSolution solve_mpc(const MpcProblem& problem, const Vector& x_hat,
                             const QpSettings& settings = {}) {
  MultistageMpc mpc(problem, settings);
  return mpc.solve(x_hat);
}

struct ValueDecomposition {
  double cost;         // V: value without the penalty contribution
  double infeasibility;  // F: slack contribution, value = V + mu F
};

inline ValueDecomposition decompose_value(const MpcSolution& solution, double mu) {
  if (!solution.soft) throw ContractError("value decomposition needs a soft-constrained solution");
  return {solution.value - mu * solution.slack_total, solution.slack_total};
}

}  // namespace cvxctg
