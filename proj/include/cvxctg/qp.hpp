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

#include "cvxctg/qp_admm.hpp"
#include "cvxctg/qp_ipm.hpp"
#include "cvxctg/qp_types.hpp"

#include <fstream>
#include <iomanip>
#include <memory>
#include <string>
#include <variant>

namespace cvxctg {

/// Solver for one SparseQp whose bounds may be updated between solves.
/// Dispatches to the backend named in the settings.
class QpSolver {
 public:
  explicit QpSolver(SparseQp qp, QpSettings settings = {})
      : backend_(make_backend(std::move(qp), settings)) {}

  void update_bounds(const Vector& l, const Vector& u) {
    std::visit([&](auto& b) { b.update_bounds(l, u); }, backend_);
  }
  void update_linear_cost(const Vector& q) {
    std::visit([&](auto& b) { b.update_linear_cost(q); }, backend_);
  }
  QpSolution solve() {
    return std::visit([](auto& b) { return b.solve(); }, backend_);
  }
  /// Active-set polish of the last solve. Only the interior-point backend
  /// supports it; other backends leave `sol` untouched and return false.
  bool polish(QpSolution& sol, const std::vector<RowHint>& hints) const {
    if (const auto* ipm = std::get_if<InteriorPointSolver>(&backend_)) return ipm->polish(sol, hints);
    return false;
  }
  /// Interior-point only: enables polishing with caller-supplied hints.
  void set_polish_hints(InteriorPointSolver::HintFunction f) {
    if (auto* ipm = std::get_if<InteriorPointSolver>(&backend_)) ipm->set_polish_hints(std::move(f));
  }
  [[nodiscard]] const SparseQp& problem() const {
    return std::visit([](const auto& b) -> const SparseQp& { return b.problem(); }, backend_);
  }

 private:
  using Backend = std::variant<AdmmSolver, InteriorPointSolver>;

  static Backend make_backend(SparseQp qp, const QpSettings& settings) {
    if (settings.method == QpMethod::admm) {
      return Backend(std::in_place_type<AdmmSolver>, std::move(qp), settings);
    }
    return Backend(std::in_place_type<InteriorPointSolver>, std::move(qp), settings);
  }

  Backend backend_;
};

inline QpSolution solve_qp(const SparseQp& qp, const QpSettings& settings = {}) {
  QpSolver solver(qp, settings);
  return solver.solve();
}

// Matrix-market style dump of an assembled problem for external cross-checks.
inline void dump_qp(const SparseQp& qp, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw ParameterError("cannot open " + path + " for writing");
  os << std::setprecision(17);
  auto write_matrix = [&os](const char* name, const SparseMatrix& m) {
    os << "%%MatrixMarket matrix coordinate real general\n% " << name << "\n"
       << m.rows() << ' ' << m.cols() << ' ' << m.nonZeros() << '\n';
    for (int k = 0; k < m.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(m, k); it; ++it) {
        os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
      }
    }
  };
  auto write_vector = [&os](const char* name, const Vector& v) {
    os << "% " << name << ' ' << v.size() << '\n';
    for (Eigen::Index i = 0; i < v.size(); ++i) os << v[i] << '\n';
  };
  write_matrix("P", qp.P);
  write_vector("q", qp.q);
  write_matrix("A", qp.A);
  write_vector("l", qp.l);
  write_vector("u", qp.u);
}

}  // namespace cvxctg
