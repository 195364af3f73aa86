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
#include "cvxctg/model.hpp"

#include <vector>

namespace cvxctg {

/// Quadratic cost-to-go x'Px with P symmetric positive definite.
class QuadraticForm {
 public:
  explicit QuadraticForm(Matrix P) : P_(std::move(P)) {
    if (!detail::is_symmetric(P_, 1e-12)) throw ParameterError("quadratic form is not symmetric");
    if (detail::min_eigenvalue(P_) <= 0.0) {
      throw ParameterError("quadratic form is not positive definite");
    }
  }

  [[nodiscard]] const Matrix& matrix() const { return P_; }
  [[nodiscard]] Eigen::Index dim() const { return P_.rows(); }

 private:
  Matrix P_;
};

inline double quadratic_value(const QuadraticForm& form, const Vector& x) {
  detail::require_dims(x.size() == form.dim(), "quadratic form argument");
  return x.dot(form.matrix() * x);
}

struct RiccatiSettings {
  double tolerance = 1e-12;
  int max_iterations = 100000;
};

struct RiccatiResult {
  QuadraticForm form;
  int iterations;
  double residual;  // max-norm distance to the fixed-point map at the result
};

namespace detail {

// One application of the scenario-weighted Riccati map.
inline Matrix weighted_riccati_map(const std::vector<Realization>& rs,
                                   const std::vector<double>& w, const Matrix& Q,
                                   const Matrix& R, const Matrix& P) {
  Matrix Huu = R;
  Matrix Hux = Matrix::Zero(R.rows(), Q.cols());
  Matrix Hxx = Q;
  for (std::size_t s = 0; s < rs.size(); ++s) {
    const Matrix PB = P * rs[s].B;
    Huu.noalias() += w[s] * rs[s].B.transpose() * PB;
    Hux.noalias() += w[s] * PB.transpose() * rs[s].A;
    Hxx.noalias() += w[s] * rs[s].A.transpose() * P * rs[s].A;
  }
  Matrix next = Hxx - Hux.transpose() * Huu.ldlt().solve(Hux);
  return 0.5 * (next + next.transpose());
}

}  // namespace detail

/// Stationary solution of the scenario-weighted Riccati recursion
///
///   P <- Q + sum_s w_s A_s' P A_s - H_ux' H_uu^{-1} H_ux,
///   H_uu = R + sum_s w_s B_s' P B_s,  H_ux = sum_s w_s B_s' P A_s,
///
/// iterated from P = Q. With a single realization this is the standard
/// discrete algebraic Riccati equation. Throws DivergenceError if the
/// iteration does not settle within the cap.
inline RiccatiResult solve_weighted_riccati(const std::vector<Realization>& realizations,
                                            const std::vector<double>& weights,
                                            const Matrix& Q, const Matrix& R,
                                            const RiccatiSettings& settings = {}) {
  if (realizations.empty() || realizations.size() != weights.size()) {
    throw ParameterError("need one weight per realization");
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-12) throw ParameterError("weights must sum to 1");
  const auto nx = Q.rows();
  const auto nu = R.rows();
  for (const auto& r : realizations) {
    detail::require_dims(r.A.rows() == nx && r.A.cols() == nx && r.B.rows() == nx && r.B.cols() == nu,
                 "realization shapes vs Q, R");
  }
  if (detail::min_eigenvalue(Q) <= 0.0 || detail::min_eigenvalue(R) <= 0.0) {
    throw ParameterError("Q and R must be positive definite");
  }

  Matrix P = 0.5 * (Q + Q.transpose());
  for (int it = 1; it <= settings.max_iterations; ++it) {
    Matrix next = detail::weighted_riccati_map(realizations, weights, Q, R, P);
    if (!next.allFinite()) break;
    const double change = (next - P).cwiseAbs().maxCoeff();
    P = std::move(next);
    if (change <= settings.tolerance) {
      const double residual =
          (detail::weighted_riccati_map(realizations, weights, Q, R, P) - P).cwiseAbs().maxCoeff();
      return {QuadraticForm(P), it, residual};
    }
  }
  throw DivergenceError("weighted Riccati iteration did not converge");
}

inline RiccatiResult solve_weighted_riccati(const UncertaintySet& uncertainty, const Matrix& Q,
                                            const Matrix& R, const RiccatiSettings& settings = {}) {
  return solve_weighted_riccati(uncertainty.realizations(), uncertainty.weights(), Q, R, settings);
}

}  // namespace cvxctg
