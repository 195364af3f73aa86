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
#include "cvxctg/qp.hpp"

#include <utility>

namespace cvxctg {

/// Points (one per row) and scalar targets for a convex fit.
class FitDataset {
 public:
  FitDataset(Matrix points, Vector targets)
      : points_(std::move(points)), targets_(std::move(targets)) {
    detail::require_dims(points_.rows() == targets_.size(), "one target per point");
    if (!points_.allFinite() || !targets_.allFinite()) {
      throw ParameterError("fit data must be finite");
    }
    for (Eigen::Index i = 0; i < size(); ++i) {
      for (Eigen::Index j = i + 1; j < size(); ++j) {
        if ((points_.row(i) - points_.row(j)).lpNorm<Eigen::Infinity>() <= 1e-10) {
          throw ParameterError(detail::concat("duplicate fit points ", i, " and ", j));
        }
      }
    }
  }

  [[nodiscard]] Eigen::Index size() const { return points_.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return points_.cols(); }
  [[nodiscard]] const Matrix& points() const { return points_; }
  [[nodiscard]] const Vector& targets() const { return targets_; }

 private:
  Matrix points_;
  Vector targets_;
};

/// Max-of-affine function through fitted values with one subgradient per point.
struct InterpolantSet {
  Matrix points;     // m x n_x
  Vector values;     // fitted y_hat
  Matrix gradients;  // m x n_x

  [[nodiscard]] Eigen::Index size() const { return points.rows(); }
  [[nodiscard]] Eigen::Index dim() const { return points.cols(); }

  void validate() const {
    detail::require_dims(values.size() == size() && gradients.rows() == size() &&
                             gradients.cols() == dim(),
                         "interpolant arrays");
    if (size() == 0) throw ParameterError("interpolant has no planes");
  }

  // Offsets c_i such that plane i is g_i'x + c_i.
  [[nodiscard]] Vector intercepts() const {
    return values - (gradients.cwiseProduct(points)).rowwise().sum();
  }

  /// Largest violation of y_j >= y_i + g_i'(x_j - x_i) over all pairs.
  [[nodiscard]] double max_violation() const {
    const Vector c = intercepts();
    double worst = 0.0;
    for (Eigen::Index j = 0; j < size(); ++j) {
      const Vector planes = gradients * points.row(j).transpose() + c;
      worst = std::max(worst, planes.maxCoeff() - values[j]);
    }
    return worst;
  }
};

inline double eval_pwa(const InterpolantSet& set, const Vector& x) {
  detail::require_dims(x.size() == set.dim(), "interpolant query");
  double best = -kInfinity;
  for (Eigen::Index i = 0; i < set.size(); ++i) {
    const double v = set.values[i] + set.gradients.row(i).dot(x - set.points.row(i).transpose());
    best = std::max(best, v);
  }
  return best;
}

/// Variables are ordered [y_hat (m); g_1; ...; g_m]. Row i*m + j encodes
/// y_j - y_i - g_i'(x_j - x_i) >= 0, so the m rows with i == j are empty.
inline SparseQp assemble_fit_qp(const FitDataset& data) {
  const Eigen::Index m = data.size();
  const Eigen::Index nx = data.dim();
  const Eigen::Index n = m * (nx + 1);
  SparseQp qp;
  qp.P = SparseMatrix(n, n);
  std::vector<Triplet> t;
  for (Eigen::Index i = 0; i < m; ++i) t.emplace_back(i, i, 2.0);
  qp.P.setFromTriplets(t.begin(), t.end());
  qp.q = Vector::Zero(n);
  qp.q.head(m) = -2.0 * data.targets();

  t.clear();
  t.reserve(static_cast<std::size_t>(m * (m - 1) * (nx + 2)));
  const Matrix& x = data.points();
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      if (i == j) continue;
      const auto row = static_cast<int>(i * m + j);
      t.emplace_back(row, static_cast<int>(j), 1.0);
      t.emplace_back(row, static_cast<int>(i), -1.0);
      for (Eigen::Index d = 0; d < nx; ++d) {
        const double diff = x(j, d) - x(i, d);
        if (diff != 0.0) t.emplace_back(row, static_cast<int>(m + i * nx + d), -diff);
      }
    }
  }
  qp.A = SparseMatrix(m * m, n);
  qp.A.setFromTriplets(t.begin(), t.end());
  qp.A.makeCompressed();
  qp.l = Vector::Zero(m * m);
  qp.u = Vector::Constant(m * m, kInfinity);
  return qp;
}

struct FitResult {
  InterpolantSet interpolant;
  double residual_sum = 0.0;  // sum of squared target residuals
  Eigen::Index num_variables = 0;
  Eigen::Index num_constraints = 0;
  QpSolution qp;
};

inline QpSettings default_fit_settings() {
  QpSettings s;
  s.method = QpMethod::interior_point;
  return s;
}

inline FitResult fit_interpolant(const FitDataset& data,
                                 const QpSettings& settings = default_fit_settings()) {
  if (data.size() < 2) throw ParameterError("a convex fit needs at least two points");
  const Eigen::Index m = data.size();
  const Eigen::Index nx = data.dim();
  const SparseQp qp = assemble_fit_qp(data);
  FitResult r;
  r.num_variables = qp.q.size();
  r.num_constraints = qp.A.rows();
  r.qp = solve_qp(qp, settings);
  if (!r.qp.solved()) {
    throw ProblemError(detail::concat("convex fit QP ended with status ", to_string(r.qp.status)));
  }
  r.interpolant.points = data.points();
  r.interpolant.values = r.qp.x.head(m);
  r.interpolant.gradients = r.qp.x.tail(m * nx).reshaped<Eigen::RowMajor>(m, nx);
  r.residual_sum = (data.targets() - r.interpolant.values).squaredNorm();
  return r;
}

}  // namespace cvxctg
