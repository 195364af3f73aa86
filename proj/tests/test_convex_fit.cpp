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

#include <gtest/gtest.h>

#include <random>

#include "cvxctg/convex_fit.hpp"

using namespace cvxctg;

namespace {

FitDataset grid_data(int per_axis, const std::function<double(double, double)>& f) {
  const int m = per_axis * per_axis;
  Matrix X(m, 2);
  Vector y(m);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      const int k = i * per_axis + j;
      X(k, 0) = -1.0 + 2.0 * i / (per_axis - 1);
      X(k, 1) = -1.0 + 2.0 * j / (per_axis - 1);
      y[k] = f(X(k, 0), X(k, 1));
    }
  }
  return {X, y};
}

// Non-convex noisy targets so that the fit cannot interpolate.
FitDataset noisy_data(int m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.2, 1.2);
  Matrix X(m, 2);
  Vector y(m);
  for (int i = 0; i < m; ++i) {
    X(i, 0) = u(rng);
    X(i, 1) = u(rng);
    y[i] = X.row(i).squaredNorm() + 0.2 * std::sin(6.0 * X(i, 0)) + 0.05 * u(rng);
  }
  return {X, y};
}

}  // namespace

TEST(FitDataset, RejectsDuplicates) {
  Matrix X(3, 1);
  X << 0.0, 1.0, 1.0 + 1e-12;
  EXPECT_THROW(FitDataset(X, Vector::Zero(3)), ParameterError);
}

TEST(FitDataset, RejectsNonFinite) {
  Matrix X(2, 1);
  X << 0.0, 1.0;
  Vector y(2);
  y << 0.0, NAN;
  EXPECT_THROW(FitDataset(X, y), ParameterError);
}

TEST(ConvexFit, InterpolatesParabolaSamples) {
  Matrix X(3, 1);
  X << -1.0, 0.0, 1.0;
  Vector y(3);
  y << 1.0, 0.0, 1.0;
  const FitResult r = fit_interpolant(FitDataset(X, y));
  EXPECT_LE(r.residual_sum, 1e-12);
  EXPECT_LE((r.interpolant.values - y).lpNorm<Eigen::Infinity>(), 1e-7);
  EXPECT_LE(r.interpolant.max_violation(), 1e-6);
}

TEST(ConvexFit, AffineDataLiesOnPlane) {
  const FitDataset d = grid_data(5, [](double a, double b) { return 0.7 * a - 1.3 * b + 0.4; });
  const FitResult r = fit_interpolant(d);
  EXPECT_LE(r.residual_sum, 1e-8 * static_cast<double>(d.size()));
  // Every pairwise row is active with a zero multiplier here, so the values
  // converge only like the square root of the residual bound.
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double plane = 0.7 * d.points()(i, 0) - 1.3 * d.points()(i, 1) + 0.4;
    EXPECT_NEAR(r.interpolant.values[i], plane, 1e-4);
  }
}

TEST(ConvexFit, ProblemSizes) {
  const FitDataset d = noisy_data(30, 4);
  const SparseQp qp = assemble_fit_qp(d);
  EXPECT_EQ(qp.q.size(), 30 * 3);
  EXPECT_EQ(qp.A.rows(), 30 * 30);
}

TEST(ConvexFit, ConvexDataIsInterpolatedExactly) {
  const FitDataset d =
      grid_data(8, [](double a, double b) { return a * a + 0.5 * b * b + std::abs(a - b); });
  const FitResult r = fit_interpolant(d);
  ASSERT_TRUE(r.qp.solved());
  EXPECT_LE(r.residual_sum, 1e-8 * static_cast<double>(d.size()));
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(eval_pwa(r.interpolant, d.points().row(i).transpose()),
                r.interpolant.values[i], 1e-9);
  }
}

TEST(ConvexFit, NoisyFitSatisfiesPairwiseConstraints) {
  const FitDataset d = noisy_data(60, 9);
  const FitResult r = fit_interpolant(d);
  ASSERT_TRUE(r.qp.solved());
  EXPECT_GT(r.residual_sum, 1e-4);
  EXPECT_LE(r.interpolant.max_violation(), 1e-6);
  EXPECT_LE(r.qp.primal_residual, 1e-8);
  EXPECT_LE(r.qp.dual_residual, 1e-8);
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    EXPECT_NEAR(eval_pwa(r.interpolant, d.points().row(i).transpose()),
                r.interpolant.values[i], 1e-9);
  }
}

TEST(ConvexFit, RejectsSinglePoint) {
  EXPECT_THROW(fit_interpolant(FitDataset(Matrix::Zero(1, 2), Vector::Zero(1))),
               ParameterError);
}

TEST(Pwa, HandEvaluation) {
  InterpolantSet s;
  s.points = Matrix(2, 1);
  s.points << 0.0, 2.0;
  s.values = Vector(2);
  s.values << 0.0, 1.0;
  s.gradients = Matrix(2, 1);
  s.gradients << 1.0, -1.0;
  EXPECT_DOUBLE_EQ(eval_pwa(s, Vector::Constant(1, 1.0)), 2.0);
}

TEST(Pwa, GrowsWithDominantSlope) {
  InterpolantSet s;
  s.points = Matrix(2, 1);
  s.points << -1.0, 1.0;
  s.values = Vector::Ones(2);
  s.gradients = Matrix(2, 1);
  s.gradients << -2.0, 3.0;
  const double a = eval_pwa(s, Vector::Constant(1, 100.0));
  const double b = eval_pwa(s, Vector::Constant(1, 101.0));
  EXPECT_NEAR(b - a, 3.0, 1e-12);
}

TEST(Pwa, MidpointConvexity) {
  const FitResult r = fit_interpolant(noisy_data(40, 21));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-2.0, 2.0), l(0.0, 1.0);
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    Vector a(2), b(2);
    a << u(rng), u(rng);
    b << u(rng), u(rng);
    const double t = l(rng);
    const double lhs = eval_pwa(r.interpolant, t * a + (1 - t) * b);
    const double rhs = t * eval_pwa(r.interpolant, a) + (1 - t) * eval_pwa(r.interpolant, b);
    worst = std::max(worst, lhs - rhs);
  }
  EXPECT_LE(worst, 1e-9);
}
