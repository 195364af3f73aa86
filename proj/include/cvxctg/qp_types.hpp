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

// Canonical convex QP
//
//   minimize    1/2 x'Px + q'x
//   subject to  l <= Ax <= u
//
// and the solver settings/result types shared by the solver backends.

#pragma once

#include "cvxctg/common.hpp"

#include <algorithm>
#include <string>

namespace cvxctg {


struct SparseQp {
  SparseMatrix P;  // full symmetric storage
  Vector q;
  SparseMatrix A;
  Vector l;
  Vector u;

  [[nodiscard]] Eigen::Index num_variables() const { return q.size(); }
  [[nodiscard]] Eigen::Index num_constraints() const { return A.rows(); }

  void validate() const {
    const auto n = q.size();
    detail::require_dims(P.rows() == n && P.cols() == n, "P must be n x n");
    detail::require_dims(A.cols() == n, "A must have n columns");
    detail::require_dims(l.size() == A.rows() && u.size() == A.rows(),
                         "bounds must have one entry per row of A");
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      if (std::isnan(l[i]) || std::isnan(u[i]) || l[i] > u[i]) {
        throw ParameterError(detail::concat("invalid bounds at row ", i, ": [",
                                            l[i], ", ", u[i], "]"));
      }
    }
    if (!q.allFinite()) throw ParameterError("q has non-finite entries");
    const SparseMatrix asym = SparseMatrix(P.transpose()) - P;
    for (int k = 0; k < asym.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(asym, k); it; ++it) {
        if (std::abs(it.value()) > 1e-12) throw ParameterError("P is not symmetric");
      }
    }
  }

  [[nodiscard]] double objective(const Vector& x) const {
    return 0.5 * x.dot(P * x) + q.dot(x);
  }
};

enum class QpStatus { solved, max_iterations, primal_infeasible };

inline const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::solved: return "solved";
    case QpStatus::max_iterations: return "max_iterations";
    case QpStatus::primal_infeasible: return "primal_infeasible";
  }
  return "unknown";
}

enum class QpMethod { admm, interior_point };

inline const char* to_string(QpMethod m) {
  return m == QpMethod::admm ? "admm" : "interior_point";
}

struct QpSettings {
  double eps_abs = 1e-8;
  // Relative term of the stopping rule, scaled by the magnitude of the
  // residual's constituent terms. Zero gives a purely absolute test.
  double eps_rel = 0.0;
  double eps_prim_inf = 1e-9;
  QpMethod method = QpMethod::admm;
  int max_iterations = 200000;
  int ipm_max_iterations = 200;
  double rho = 0.1;
  double sigma = 1e-6;
  double alpha = 1.6;
  bool adaptive_rho = true;
  int adaptive_rho_interval = 100;
  double adaptive_rho_tolerance = 5.0;
  int scaling_iterations = 10;
  int check_interval = 5;
  // Start each solve from the previous iterate instead of zero.
  bool warm_start = false;
  // Interior-point only: re-solve on the guessed active set after
  // convergence and keep the result when it verifies.
  bool polish = false;
};

/// Active-set hint for one constraint row when polishing.
enum class RowHint : signed char { automatic, inactive, lower, upper };

struct QpSolution {
  Vector x;
  Vector y;
  double objective = 0.0;
  QpStatus status = QpStatus::max_iterations;
  double primal_residual = kInfinity;
  double dual_residual = kInfinity;
  int iterations = 0;
  double solve_time = 0.0;  // seconds
  bool polished = false;

  [[nodiscard]] bool solved() const { return status == QpStatus::solved; }
};


namespace detail {

// Max-norm distance of Ax from the box [l, u].
inline double bound_violation(const Vector& ax, const Vector& l, const Vector& u) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < ax.size(); ++i) {
    worst = std::max({worst, l[i] - ax[i], ax[i] - u[i]});
  }
  return worst;
}

}  // namespace detail
}  // namespace cvxctg
