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

#include <cstdio>
#include <fstream>
#include <random>

#include "cvxctg/qp.hpp"
#include "oracles.hpp"

using namespace cvxctg;

namespace {

SparseMatrix to_sparse(const Matrix& m) {
  SparseMatrix s = m.sparseView();
  s.makeCompressed();
  return s;
}

SparseQp box_qp(const Matrix& H, const Vector& q, const Vector& lo, const Vector& hi) {
  SparseQp qp;
  qp.P = to_sparse(H);
  qp.q = q;
  qp.A = to_sparse(Matrix::Identity(q.size(), q.size()));
  qp.l = lo;
  qp.u = hi;
  return qp;
}

struct RandomBoxQp {
  Matrix H;
  Vector q, lo, hi;
};

RandomBoxQp random_box_qp(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  RandomBoxQp r;
  r.H = oracle::random_spd(n, rng, 0.5);
  r.H = 0.5 * (r.H + r.H.transpose());
  r.q = Vector(n);
  r.lo = Vector(n);
  r.hi = Vector(n);
  for (int i = 0; i < n; ++i) {
    r.q[i] = 3.0 * ud(rng);
    r.lo[i] = -0.5 + 0.4 * ud(rng);
    r.hi[i] = 0.5 + 0.4 * ud(rng);
  }
  return r;
}

}  // namespace

TEST(QpSolver, UnconstrainedScalar) {
  SparseQp qp;
  qp.P = to_sparse(Matrix::Identity(1, 1));
  qp.q = Vector::Ones(1);
  qp.A = SparseMatrix(0, 1);
  qp.l = Vector(0);
  qp.u = Vector(0);
  const QpSolution sol = solve_qp(qp);
  ASSERT_TRUE(sol.solved());
  EXPECT_NEAR(sol.x[0], -1.0, 1e-8);
  EXPECT_NEAR(sol.objective, -0.5, 1e-8);
}

TEST(QpSolver, ProjectionOntoHalfLine) {
  SparseQp qp;
  qp.P = to_sparse(Matrix::Identity(1, 1));
  qp.q = Vector::Zero(1);
  qp.A = to_sparse(Matrix::Identity(1, 1));
  qp.l = Vector::Constant(1, 1.0);
  qp.u = Vector::Constant(1, kInfinity);
  const QpSolution sol = solve_qp(qp);
  ASSERT_TRUE(sol.solved());
  EXPECT_NEAR(sol.x[0], 1.0, 1e-8);
  EXPECT_LE(sol.primal_residual, 1e-8);
  EXPECT_LE(sol.dual_residual, 1e-8);
}

TEST(QpSolver, TenVariableBoxQpMatchesEnumeration) {
  std::mt19937_64 rng(20260);
  const RandomBoxQp r = random_box_qp(10, rng);
  const Vector expected = oracle::box_qp(r.H, r.q, r.lo, r.hi);
  ASSERT_EQ(expected.size(), 10);
  const QpSolution sol = solve_qp(box_qp(r.H, r.q, r.lo, r.hi));
  ASSERT_TRUE(sol.solved());
  EXPECT_LE((sol.x - expected).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(QpSolver, RandomBoxQpsMatchEnumeration) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 24; ++trial) {
    const int n = 2 + trial % 7;
    const RandomBoxQp r = random_box_qp(n, rng);
    const Vector expected = oracle::box_qp(r.H, r.q, r.lo, r.hi);
    const QpSolution sol = solve_qp(box_qp(r.H, r.q, r.lo, r.hi));
    ASSERT_TRUE(sol.solved()) << "trial " << trial;
    EXPECT_LE((sol.x - expected).lpNorm<Eigen::Infinity>(), 1e-5) << "trial " << trial;
  }
}

TEST(QpSolver, ResidualsShrinkWithIterations) {
  std::mt19937_64 rng(99);
  int improved = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const RandomBoxQp r = random_box_qp(8, rng);
    const SparseQp qp = box_qp(r.H, r.q, r.lo, r.hi);
    QpSettings s;
    s.eps_abs = 1e-14;
    s.check_interval = 1;
    s.max_iterations = 10;
    const QpSolution early = solve_qp(qp, s);
    s.max_iterations = 100;
    const QpSolution late = solve_qp(qp, s);
    const double r_early = std::max(early.primal_residual, early.dual_residual);
    const double r_late = std::max(late.primal_residual, late.dual_residual);
    if (r_late <= r_early) ++improved;
  }
  EXPECT_GE(improved, 9);
}

TEST(QpSolver, MinimizerInvariantToObjectiveScaling) {
  std::mt19937_64 rng(3);
  const RandomBoxQp r = random_box_qp(6, rng);
  const QpSolution base = solve_qp(box_qp(r.H, r.q, r.lo, r.hi));
  const QpSolution scaled = solve_qp(box_qp(37.5 * r.H, 37.5 * r.q, r.lo, r.hi));
  ASSERT_TRUE(base.solved());
  ASSERT_TRUE(scaled.solved());
  EXPECT_LE((base.x - scaled.x).lpNorm<Eigen::Infinity>(), 1e-6);
}

TEST(QpSolver, DetectsPrimalInfeasibility) {
  SparseQp qp;
  qp.P = to_sparse(Matrix::Identity(1, 1));
  qp.q = Vector::Zero(1);
  Matrix a(2, 1);
  a << 1.0, 1.0;
  qp.A = to_sparse(a);
  qp.l = Vector(2);
  qp.u = Vector(2);
  qp.l << 2.0, -kInfinity;
  qp.u << kInfinity, 1.0;
  const QpSolution sol = solve_qp(qp);
  EXPECT_EQ(sol.status, QpStatus::primal_infeasible);
}

TEST(QpSolver, RejectsIndefiniteHessian) {
  SparseQp qp;
  qp.P = to_sparse(-Matrix::Identity(2, 2));
  qp.q = Vector::Zero(2);
  qp.A = SparseMatrix(0, 2);
  qp.l = Vector(0);
  qp.u = Vector(0);
  EXPECT_THROW(QpSolver solver(qp), ProblemError);
}

TEST(QpSolver, RejectsCrossedBounds) {
  SparseQp qp = box_qp(Matrix::Identity(2, 2), Vector::Zero(2), Vector::Ones(2),
                       Vector::Zero(2));
  EXPECT_THROW(QpSolver solver(qp), ParameterError);
}

TEST(QpSolver, IterationCapReportsBestIterate) {
  std::mt19937_64 rng(5);
  const RandomBoxQp r = random_box_qp(6, rng);
  QpSettings s;
  s.max_iterations = 3;
  const QpSolution sol = solve_qp(box_qp(r.H, r.q, r.lo, r.hi), s);
  EXPECT_EQ(sol.status, QpStatus::max_iterations);
  EXPECT_EQ(sol.x.size(), 6);
  EXPECT_TRUE(std::isfinite(sol.primal_residual));
}

TEST(QpSolver, BoundUpdatesReuseFactorization) {
  std::mt19937_64 rng(11);
  const RandomBoxQp r = random_box_qp(5, rng);
  QpSolver solver(box_qp(r.H, r.q, r.lo, r.hi));
  const Vector lo2 = r.lo.array() - 0.3;
  const Vector hi2 = r.hi.array() - 0.2;
  solver.update_bounds(lo2, hi2);
  const QpSolution sol = solver.solve();
  ASSERT_TRUE(sol.solved());
  EXPECT_LE((sol.x - oracle::box_qp(r.H, r.q, lo2, hi2)).lpNorm<Eigen::Infinity>(), 1e-6);
  // Repeating the solve gives the same bits.
  const QpSolution again = solver.solve();
  EXPECT_EQ(sol.x, again.x);
}

TEST(QpSolver, DumpWritesMatrixMarket) {
  const SparseQp qp = box_qp(Matrix::Identity(2, 2), Vector::Ones(2), -Vector::Ones(2),
                             Vector::Ones(2));
  const std::string path = ::testing::TempDir() + "qp_dump.mtx";
  dump_qp(qp, path);
  std::ifstream is(path);
  std::string first;
  std::getline(is, first);
  EXPECT_EQ(first, "%%MatrixMarket matrix coordinate real general");
  std::remove(path.c_str());
}

class IpmBackend : public ::testing::Test {
 protected:
  static QpSettings settings() {
    QpSettings s;
    s.method = QpMethod::interior_point;
    return s;
  }
};

TEST_F(IpmBackend, RandomBoxQpsMatchEnumeration) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 24; ++trial) {
    const int n = 2 + trial % 9;
    const RandomBoxQp r = random_box_qp(n, rng);
    const Vector expected = oracle::box_qp(r.H, r.q, r.lo, r.hi);
    const QpSolution sol = solve_qp(box_qp(r.H, r.q, r.lo, r.hi), settings());
    ASSERT_TRUE(sol.solved()) << "trial " << trial;
    EXPECT_LE((sol.x - expected).lpNorm<Eigen::Infinity>(), 1e-6) << "trial " << trial;
    EXPECT_LE(sol.primal_residual, 1e-8);
    EXPECT_LE(sol.dual_residual, 1e-8);
  }
}

TEST_F(IpmBackend, GeneralConstraintsMatchEnumeration) {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3;
    const int m = 4;
    Matrix H = oracle::random_spd(n, rng, 0.5);
    H = 0.5 * (H + H.transpose());
    Vector q(n), lo(m), hi(m);
    Matrix A(m, n);
    for (int i = 0; i < n; ++i) q[i] = 2.0 * ud(rng);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < n; ++j) A(i, j) = ud(rng);
      lo[i] = -0.5 + 0.3 * ud(rng);
      hi[i] = 0.5 + 0.3 * ud(rng);
    }
    lo[0] = hi[0] = 0.1;  // one equality row
    const Vector expected = oracle::constrained_qp(H, q, A.topRows(1), lo.head(1),
                                                   A.bottomRows(m - 1), lo.tail(m - 1),
                                                   hi.tail(m - 1));
    ASSERT_EQ(expected.size(), n);
    SparseQp qp;
    qp.P = to_sparse(H);
    qp.q = q;
    qp.A = to_sparse(A);
    qp.l = lo;
    qp.u = hi;
    const QpSolution sol = solve_qp(qp, settings());
    ASSERT_TRUE(sol.solved()) << "trial " << trial;
    EXPECT_LE((sol.x - expected).lpNorm<Eigen::Infinity>(), 1e-6) << "trial " << trial;
  }
}

TEST_F(IpmBackend, DetectsPrimalInfeasibility) {
  SparseQp qp;
  qp.P = to_sparse(Matrix::Identity(1, 1));
  qp.q = Vector::Zero(1);
  Matrix a(2, 1);
  a << 1.0, 1.0;
  qp.A = to_sparse(a);
  qp.l = Vector(2);
  qp.u = Vector(2);
  qp.l << 2.0, -kInfinity;
  qp.u << kInfinity, 1.0;
  EXPECT_EQ(solve_qp(qp, settings()).status, QpStatus::primal_infeasible);
}

TEST_F(IpmBackend, RejectsIndefiniteHessian) {
  SparseQp qp;
  qp.P = to_sparse(-Matrix::Identity(2, 2));
  qp.q = Vector::Zero(2);
  qp.A = SparseMatrix(0, 2);
  qp.l = Vector(0);
  qp.u = Vector(0);
  EXPECT_THROW(QpSolver solver(qp, settings()), ProblemError);
}

TEST_F(IpmBackend, BoundUpdatesAreDeterministic) {
  std::mt19937_64 rng(11);
  const RandomBoxQp r = random_box_qp(5, rng);
  QpSolver solver(box_qp(r.H, r.q, r.lo, r.hi), settings());
  const Vector lo2 = r.lo.array() - 0.3;
  const Vector hi2 = r.hi.array() - 0.2;
  solver.update_bounds(lo2, hi2);
  const QpSolution sol = solver.solve();
  ASSERT_TRUE(sol.solved());
  EXPECT_LE((sol.x - oracle::box_qp(r.H, r.q, lo2, hi2)).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_EQ(sol.x, solver.solve().x);
}

TEST_F(IpmBackend, AgreesWithAdmm) {
  std::mt19937_64 rng(123);
  const RandomBoxQp r = random_box_qp(8, rng);
  const SparseQp qp = box_qp(r.H, r.q, r.lo, r.hi);
  const QpSolution a = solve_qp(qp);
  const QpSolution b = solve_qp(qp, settings());
  ASSERT_TRUE(a.solved() && b.solved());
  EXPECT_LE((a.x - b.x).lpNorm<Eigen::Infinity>(), 1e-6);
  EXPECT_NEAR(a.objective, b.objective, 1e-7);
}
