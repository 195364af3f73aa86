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

#include "case_study.hpp"
#include "cvxctg/onestep.hpp"
#include "oracles.hpp"

using namespace cvxctg;
namespace cs = case_study;

namespace {

QuadraticForm lqr_form() { return QuadraticForm(cs::lqr_scalar() * Matrix::Identity(2, 2)); }

// Planes of x'Hx at a grid, an even convex function.
InterpolantSet bowl(int per_axis, double curvature) {
  const int m = per_axis * per_axis;
  InterpolantSet s;
  s.points.resize(m, 2);
  s.values.resize(m);
  s.gradients.resize(m, 2);
  for (int i = 0; i < per_axis; ++i) {
    for (int j = 0; j < per_axis; ++j) {
      const int k = i * per_axis + j;
      const Vector x = cs::state(-1.2 + 2.4 * i / (per_axis - 1), -1.2 + 2.4 * j / (per_axis - 1));
      s.points.row(k) = x.transpose();
      s.values[k] = curvature * x.squaredNorm();
      s.gradients.row(k) = 2.0 * curvature * x.transpose();
    }
  }
  return s;
}

// Distance outside the unit box, as planes |x_d| - 1 and 0.
InterpolantSet box_excess() {
  InterpolantSet s;
  s.points = Matrix::Zero(5, 2);
  s.values = Vector::Zero(5);
  s.gradients = Matrix::Zero(5, 2);
  s.gradients << 0, 0, 1, 0, -1, 0, 0, 1, 0, -1;
  for (int k = 1; k < 5; ++k) {
    s.points.row(k) = s.gradients.row(k);  // plane through (g, 0)
  }
  return s;
}

InterpolantSet zero_plane() {
  InterpolantSet s;
  s.points = Matrix::Zero(1, 2);
  s.values = Vector::Zero(1);
  s.gradients = Matrix::Zero(1, 2);
  return s;
}

SurrogateModel pwa_model(InterpolantSet v, InterpolantSet f) {
  return {std::move(v), std::move(f), {2.0, 0.5}, {1.0, 0.0}, lqr_form(), 1e5};
}

IcnnNet random_net(std::mt19937_64& rng, double output_bias) {
  IcnnNet net;
  net.params = IcnnParams::random(net.arch, rng);
  net.params.layers.back().b[0] = output_bias;
  return net;
}

SurrogateModel icnn_model(std::mt19937_64& rng) {
  return {random_net(rng, 0.3), random_net(rng, -0.2), {3.0, 0.1}, {0.5, 0.0}, lqr_form(), 1e3};
}

OneStepProblem problem(SurrogateModel s, bool soft = true) {
  return {cs::vertices(), Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2), cs::bounds(),
          std::move(s), soft};
}

}  // namespace

TEST(Normalization, RoundTrip) {
  Vector y(4);
  y << 3.0, -1.0, 7.5, 2.0;
  const Normalization n = Normalization::from_range(y);
  EXPECT_DOUBLE_EQ(n.normalize(-1.0), 0.0);
  EXPECT_DOUBLE_EQ(n.normalize(7.5), 1.0);
  for (const double v : y) EXPECT_NEAR(n.denormalize(n.normalize(v)), v, 1e-12);
}

TEST(Surrogate, RejectsBadNormalization) {
  SurrogateModel s = pwa_model(bowl(3, 1.0), box_excess());
  s.value_norm.scale = 0.0;
  EXPECT_THROW(problem(s), ParameterError);
  s.value_norm.scale = 1.0;
  s.feasibility_norm.scale = -1.0;
  EXPECT_THROW(problem(s), ParameterError);
}

TEST(Surrogate, RejectsMixedKinds) {
  std::mt19937_64 rng(1);
  SurrogateModel s = pwa_model(bowl(3, 1.0), box_excess());
  s.feasibility = random_net(rng, 0.0);
  EXPECT_THROW(s.validate(), ParameterError);
}

TEST(Surrogate, EvaluationCombinesParts) {
  const SurrogateModel s = pwa_model(zero_plane(), box_excess());
  const Vector inside = cs::state(0.3, -0.5);
  const SurrogateValue a = eval_surrogate(s, inside);
  EXPECT_NEAR(a.value, 0.5 + cs::lqr_scalar() * inside.squaredNorm(), 1e-12);
  EXPECT_EQ(a.feasibility, 0.0);
  const SurrogateValue b = eval_surrogate(s, cs::state(1.5, 0.0));
  EXPECT_NEAR(b.feasibility, 0.5, 1e-12);
  EXPECT_NEAR(b.total, b.value + 1e5 * 0.5, 1e-6);
}

TEST(OneStep, PwaScalarCount) {
  const OneStepLayout layout(problem(pwa_model(bowl(19, 1.0), bowl(19, 0.5))));
  // 19^2 = 361 planes; the count does not depend on the plane count.
  EXPECT_EQ(layout.num_surrogate_scalars(), 2 * 4 + 1);
  const OneStepLayout small(problem(pwa_model(bowl(3, 1.0), box_excess())));
  EXPECT_EQ(small.num_surrogate_scalars(), 9);
}

TEST(OneStep, PwaCutCount) {
  const SurrogateModel s = pwa_model(bowl(4, 1.0), box_excess());
  const SparseQp qp = assemble_onestep(problem(s, false), Vector::Zero(2));
  // dynamics 8, inputs 2, states 8, aggregate 1, cuts 4 * (16 + 1 + 5 + 1)
  EXPECT_EQ(qp.A.rows(), 8 + 2 + 8 + 1 + 4 * (16 + 1 + 5 + 1));
}

TEST(OneStep, IcnnEpigraphCount) {
  std::mt19937_64 rng(2);
  const OneStepLayout layout(problem(icnn_model(rng)));
  EXPECT_EQ(layout.num_epigraph_scalars(), 4 * (20 + 1) * 2);
}

TEST(OneStep, VariablesGrowLinearlyWithScenarios) {
  std::vector<Eigen::Index> counts;
  for (const int S : {1, 2, 3, 4}) {
    std::vector<Vector> ds;
    for (int s = 0; s < S; ++s) ds.push_back(cs::state(0.01 * s, -0.01 * s));
    const OneStepProblem p(UncertaintySet::additive(cs::model(), ds), Matrix::Identity(2, 2),
                           2.0 * Matrix::Identity(2, 2), cs::bounds(),
                           pwa_model(bowl(3, 1.0), box_excess()));
    counts.push_back(OneStepLayout(p).num_variables());
  }
  for (std::size_t k = 2; k < counts.size(); ++k) {
    EXPECT_EQ(counts[k] - counts[k - 1], counts[1] - counts[0]);
  }
}

TEST(OneStep, ZeroSurrogateIsOneStepLqr) {
  const auto m = cs::model();
  const double p = cs::lqr_scalar();
  SurrogateModel s = pwa_model(zero_plane(), zero_plane());
  s.value_norm = {1.0, 0.0};
  const OneStepProblem prob(UncertaintySet::nominal(m), Matrix::Identity(2, 2),
                            2.0 * Matrix::Identity(2, 2), BoundSpec::symmetric_box(2, 1.0, 2, 10.0),
                            s, false);
  for (const Vector& x : {cs::state(0.3, -0.2), cs::state(0.9, 0.9)}) {
    // min u'Ru + (Ax + u)'P(Ax + u), |u| <= 1
    const Matrix H = 2.0 * (2.0 + p) * Matrix::Identity(2, 2);
    const Vector g = 2.0 * p * m.A() * x;
    const Vector u = oracle::box_qp(H, g, -Vector::Ones(2), Vector::Ones(2));
    const OneStepSolution sol = solve_onestep(prob, x);
    ASSERT_TRUE(sol.solved());
    EXPECT_LE((sol.u0 - u).lpNorm<Eigen::Infinity>(), 1e-6);
    const Vector x1 = m.A() * x + u;
    EXPECT_NEAR(sol.value, x.squaredNorm() + 2.0 * u.squaredNorm() + p * x1.squaredNorm(), 1e-6);
  }
}

TEST(OneStep, OriginGivesZeroInput) {
  const OneStepSolution sol =
      solve_onestep(problem(pwa_model(bowl(7, 1.0), box_excess())), Vector::Zero(2));
  ASSERT_TRUE(sol.solved());
  EXPECT_LE(sol.u0.lpNorm<Eigen::Infinity>(), 1e-4);
}

TEST(OneStep, InputStaysInBoxFromFarStates) {
  OneStepController c(problem(pwa_model(bowl(7, 1.0), box_excess())));
  for (const Vector& x : {cs::state(1.2, 1.2), cs::state(-1.2, 0.4), cs::state(5.0, -3.0)}) {
    const OneStepSolution sol = c.solve(x);
    ASSERT_TRUE(sol.solved());
    EXPECT_LE(sol.u0.lpNorm<Eigen::Infinity>(), 1.0 + 1e-6);
    EXPECT_GT(sol.slack_total, 0.0);
  }
}

TEST(OneStep, HardFirstStateReportsInfeasibility) {
  const OneStepSolution sol =
      solve_onestep(problem(pwa_model(bowl(3, 1.0), box_excess()), false), cs::state(1.2, 1.2));
  EXPECT_EQ(sol.qp.status, QpStatus::primal_infeasible);
}

TEST(OneStep, PwaEpigraphsAreTight) {
  OneStepController c(problem(pwa_model(bowl(9, 1.0), box_excess())));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> box(-1.2, 1.2);
  for (int k = 0; k < 30; ++k) {
    const OneStepSolution sol = c.solve(cs::state(box(rng), box(rng)));
    ASSERT_TRUE(sol.solved());
    EXPECT_LE(sol.tightness, 1e-6);
  }
}

TEST(OneStep, IcnnEpigraphsAreTight) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> box(-1.2, 1.2);
  for (int draw = 0; draw < 3; ++draw) {
    OneStepController c(problem(icnn_model(rng)));
    for (int k = 0; k < 10; ++k) {
      const OneStepSolution sol = c.solve(cs::state(box(rng), box(rng)));
      ASSERT_TRUE(sol.solved());
      EXPECT_LE(sol.tightness, 1e-6);
      for (std::size_t s = 0; s < sol.x1.size(); ++s) {
        const auto& sur = c.problem().surrogate;
        EXPECT_NEAR(sur.value_norm.denormalize(sol.value_epigraph[static_cast<Eigen::Index>(s)]) +
                        quadratic_value(sur.P_lqr, sol.x1[s]),
                    sol.surrogate[s].value, 1e-5);
      }
    }
  }
}

TEST(OneStep, TightenedPointStaysFeasible) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> box(-1.2, 1.2);
  OneStepController c(problem(icnn_model(rng)));
  for (int k = 0; k < 10; ++k) {
    const Vector x = cs::state(box(rng), box(rng));
    const OneStepSolution sol = c.solve(x);
    ASSERT_TRUE(sol.solved());
    const SparseQp qp = c.assemble(x);
    const Vector ax = qp.A * sol.qp.x;
    for (Eigen::Index i = 0; i < ax.size(); ++i) {
      const double tol = 1e-7 * (1.0 + std::abs(ax[i]));
      EXPECT_GE(ax[i], qp.l[i] - tol) << "row " << i;
      EXPECT_LE(ax[i], qp.u[i] + tol) << "row " << i;
    }
    EXPECT_NEAR(sol.qp.objective,
                0.5 * sol.qp.x.dot(qp.P * sol.qp.x) + qp.q.dot(sol.qp.x), 1e-9);
  }
}

TEST(OneStep, HintedPolishAgreesWithInteriorPoint) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> box(-0.9, 0.9);
  QpSettings polished = default_onestep_settings();
  polished.polish = true;
  for (const bool icnn : {false, true}) {
    SurrogateModel m = icnn ? icnn_model(rng) : pwa_model(bowl(9, 1.0), box_excess());
    OneStepController plain(problem(m));
    OneStepController hinted(problem(m), polished);
    int count = 0;
    for (int k = 0; k < 10; ++k) {
      const Vector x = cs::state(box(rng), box(rng));
      const OneStepSolution a = plain.solve(x);
      const OneStepSolution b = hinted.solve(x);
      ASSERT_TRUE(a.solved() && b.solved());
      // A large penalized objective leaves u0 accurate to about sqrt(gap / R).
      EXPECT_LE((a.u0 - b.u0).cwiseAbs().maxCoeff(), 1e-4);
      EXPECT_LE(b.qp.objective, a.qp.objective + 1e-8 * (1.0 + std::abs(a.qp.objective)));
      count += b.qp.polished;
    }
    EXPECT_GT(count, 0) << (icnn ? "icnn" : "pwa");
  }
}

TEST(OneStep, ValueIsConvexInState) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> box(-1.2, 1.2), unit(0.1, 0.9);
  OneStepController c(problem(icnn_model(rng)));
  double worst = -kInfinity;
  for (int k = 0; k < 15; ++k) {
    const Vector a = cs::state(box(rng), box(rng));
    const Vector b = cs::state(box(rng), box(rng));
    const double t = unit(rng);
    const double chord = t * c.solve(a).value + (1 - t) * c.solve(b).value;
    const double mid = c.solve(t * a + (1 - t) * b).value;
    worst = std::max(worst, (mid - chord) / (1.0 + std::abs(chord)));
  }
  EXPECT_LE(worst, 1e-6);
}

TEST(OneStep, CoreHessianIsPositiveDefinite) {
  std::mt19937_64 rng(6);
  const OneStepController c(problem(icnn_model(rng)));
  EXPECT_GT(c.core_min_eigenvalue(), 0.0);
}

TEST(OneStep, ReportedValueMatchesDirectEvaluation) {
  std::mt19937_64 rng(7);
  OneStepController c(problem(icnn_model(rng)));
  const Vector x = cs::state(0.4, -0.6);
  const OneStepSolution sol = c.solve(x);
  ASSERT_TRUE(sol.solved());
  double direct = x.squaredNorm() + 2.0 * sol.u0.squaredNorm() +
                  c.problem().surrogate.mu * sol.slack_total;
  for (std::size_t s = 0; s < sol.x1.size(); ++s) direct += 0.25 * sol.surrogate[s].total;
  EXPECT_NEAR(sol.value, direct, 1e-6 * (1.0 + std::abs(direct)));
}
