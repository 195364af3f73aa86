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

#include "cvxctg/icnn.hpp"
#include "oracles.hpp"

using namespace cvxctg;

namespace {

IcnnArch one_unit() {
  IcnnArch a;
  a.input_dim = 1;
  a.hidden = {1};
  return a;
}

IcnnParams one_unit_params() {
  IcnnParams p = IcnnParams::zeros(one_unit());
  p.layers[0].Wx(0, 0) = 1.0;
  p.layers[1].raw_z(0, 0) = 1.0;
  return p;
}

IcnnArch deep_arch() {
  IcnnArch a;
  a.input_dim = 2;
  a.hidden = {6, 5};
  return a;
}

Matrix random_inputs(int rows, int cols, std::mt19937_64& rng, double scale = 1.5) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix X(rows, cols);
  for (Eigen::Index i = 0; i < X.size(); ++i) X.data()[i] = u(rng);
  return X;
}

// Parameters with a positive output bias so the output rectifier is active
// and the finite-difference comparison exercises every layer.
IcnnParams active_params(const IcnnArch& arch, std::mt19937_64& rng) {
  IcnnParams p = IcnnParams::random(arch, rng);
  p.layers.back().b[0] += 1.0;
  return p;
}

FitDataset abs_data(int m, double shift) {
  Matrix X(m, 1);
  Vector y(m);
  for (int i = 0; i < m; ++i) {
    X(i, 0) = -1.0 + 2.0 * (i + shift) / (m - 1 + 2.0 * shift);
    y[i] = std::abs(X(i, 0));
  }
  return {X, y};
}

}  // namespace

TEST(Icnn, ZeroParamsGiveZero) {
  const IcnnArch arch;
  const IcnnParams p = IcnnParams::zeros(arch);
  EXPECT_EQ(icnn_forward(p, arch, Vector::Constant(2, 0.3)), 0.0);
}

TEST(Icnn, SingleUnitHandEvaluation) {
  const IcnnParams p = one_unit_params();
  const IcnnTrace t = icnn_trace(p, one_unit(), Vector::Constant(1, -2.0));
  EXPECT_DOUBLE_EQ(t.post[0][0], -0.02);
  EXPECT_DOUBLE_EQ(t.post[1][0], 0.0);
  EXPECT_DOUBLE_EQ(icnn_forward(p, one_unit(), Vector::Constant(1, 3.0)), 3.0);
}

TEST(Icnn, ParameterCountAndFlattenRoundTrip) {
  const IcnnArch arch;
  std::mt19937_64 rng(1);
  const IcnnParams p = IcnnParams::random(arch, rng);
  EXPECT_EQ(p.num_parameters(), 20 * 2 + 20 + 2 + 1 + 20);
  IcnnParams q = IcnnParams::zeros(arch);
  q.unflatten(p.flatten());
  EXPECT_EQ(q.flatten(), p.flatten());
}

TEST(Icnn, RejectsBadArchitecture) {
  IcnnArch a;
  a.hidden = {0};
  EXPECT_THROW(a.validate(), ParameterError);
  a.hidden = {3};
  a.hidden_activation = Activation::leaky(-0.5);
  EXPECT_THROW(a.validate(), ParameterError);
}

TEST(Icnn, ConvexForArbitraryParameters) {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> l(0.0, 1.0);
  const IcnnArch arch = deep_arch();
  double worst = 0.0;
  for (int draw = 0; draw < 10; ++draw) {
    IcnnParams p = IcnnParams::random(arch, rng);
    // Large, sign-mixed raw weights: squaring keeps W^z nonnegative anyway.
    for (auto& layer : p.layers) layer.raw_z *= -3.0;
    p.layers.back().b[0] = 2.0;
    for (int k = 0; k < 1000; ++k) {
      const Matrix X = random_inputs(2, 2, rng, 3.0);
      const double t = l(rng);
      const Vector a = X.row(0).transpose(), b = X.row(1).transpose();
      const double lhs = icnn_forward(p, arch, t * a + (1 - t) * b);
      const double rhs = t * icnn_forward(p, arch, a) + (1 - t) * icnn_forward(p, arch, b);
      worst = std::max(worst, lhs - rhs);
    }
  }
  EXPECT_LE(worst, 1e-8);
}

TEST(Icnn, OutputIsNonnegative) {
  std::mt19937_64 rng(3);
  const IcnnArch arch = deep_arch();
  const IcnnParams p = IcnnParams::random(arch, rng);
  const Matrix X = random_inputs(500, 2, rng, 5.0);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    EXPECT_GE(icnn_forward(p, arch, X.row(i).transpose()), 0.0);
  }
}

TEST(Icnn, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  int checked = 0;
  double worst = 0.0;
  for (const IcnnArch& arch : {IcnnArch{}, deep_arch()}) {
    for (int draw = 0; draw < 10; ++draw) {
      const IcnnParams p = active_params(arch, rng);
      const Matrix X = random_inputs(7, 2, rng);
      const Vector y = random_inputs(7, 1, rng).col(0);
      Vector grad;
      icnn_loss(p, arch, X, y, &grad);
      IcnnParams work = p;
      const Vector fd = oracle::finite_difference(
          [&](const Vector& theta) {
            work.unflatten(theta);
            return icnn_loss(work, arch, X, y);
          },
          p.flatten(), 1e-6);
      for (Eigen::Index i = 0; i < fd.size(); ++i) {
        worst = std::max(worst, std::abs(grad[i] - fd[i]) / std::max(std::abs(fd[i]), 1e-3));
      }
      ++checked;
    }
  }
  EXPECT_EQ(checked, 20);
  EXPECT_LE(worst, 1e-5);
}

TEST(Icnn, ZeroResidualGivesZeroGradient) {
  const IcnnArch arch = one_unit();
  const IcnnParams p = one_unit_params();
  Matrix X(2, 1);
  X << 0.5, 2.0;
  Vector y(2);
  y << 0.5, 2.0;
  Vector grad;
  EXPECT_EQ(icnn_loss(p, arch, X, y, &grad), 0.0);
  EXPECT_EQ(grad.lpNorm<Eigen::Infinity>(), 0.0);
}

TEST(Icnn, OutputBiasGradientByHand) {
  const IcnnArch arch = one_unit();
  const IcnnParams p = one_unit_params();
  Matrix X(1, 1);
  X << 1.5;
  Vector y(1);
  y << 0.25;
  Vector grad;
  icnn_loss(p, arch, X, y, &grad);
  // Flattened order per layer is W^x, raw_z, b; the output bias comes last.
  EXPECT_DOUBLE_EQ(grad[grad.size() - 1], 2.0 * (1.5 - 0.25));
}

TEST(IcnnTraining, ZeroTargets) {
  Matrix X(30, 2);
  std::mt19937_64 rng(9);
  X = random_inputs(30, 2, rng);
  const FitDataset train(X.topRows(24), Vector::Zero(24));
  const FitDataset test(X.bottomRows(6), Vector::Zero(6));
  IcnnTrainSettings s;
  s.restarts = 2;
  const TrainResult r = train_icnn(train, test, IcnnArch{}, s);
  EXPECT_LE(r.report.train_mse, 1e-8);
  EXPECT_LE(r.report.test_mse, 1e-8);
}

TEST(IcnnTraining, AbsoluteValue) {
  IcnnArch arch;
  arch.input_dim = 1;
  IcnnTrainSettings s;
  s.seed = 5;
  const TrainResult r = train_icnn(abs_data(41, 0.0), abs_data(10, 0.37), arch, s);
  EXPECT_LE(r.report.test_mse, 1e-4);
  EXPECT_EQ(r.restarts.size(), 5U);
}

TEST(IcnnTraining, DeterministicPerSeed) {
  IcnnArch arch;
  arch.input_dim = 1;
  IcnnTrainSettings s;
  s.seed = 42;
  s.restarts = 2;
  s.lbfgs.max_iterations = 200;
  const TrainResult a = train_icnn(abs_data(21, 0.0), abs_data(6, 0.3), arch, s);
  const TrainResult b = train_icnn(abs_data(21, 0.0), abs_data(6, 0.3), arch, s);
  EXPECT_EQ(a.params.flatten(), b.params.flatten());
  EXPECT_EQ(a.report.restart, b.report.restart);
  s.seed = 43;
  const TrainResult c = train_icnn(abs_data(21, 0.0), abs_data(6, 0.3), arch, s);
  EXPECT_NE(a.params.flatten(), c.params.flatten());
}

TEST(IcnnTraining, LossNeverIncreases) {
  IcnnArch arch;
  arch.input_dim = 1;
  const FitDataset d = abs_data(21, 0.0);
  std::mt19937_64 rng(8);
  const IcnnParams p0 = IcnnParams::random(arch, rng);
  IcnnParams work = p0;
  const Objective fg = [&](const Vector& theta, Vector& g) {
    work.unflatten(theta);
    return icnn_loss(work, arch, d.points(), d.targets(), &g);
  };
  LbfgsSettings s;
  double last = kInfinity;
  for (int k = 1; k <= 40; k += 3) {
    s.max_iterations = k;
    const LbfgsResult r = lbfgs_minimize(fg, p0.flatten(), s);
    EXPECT_LE(r.f, last);
    last = r.f;
  }
}
