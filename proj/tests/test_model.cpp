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

#include <set>

#include "cvxctg/model.hpp"

using namespace cvxctg;

namespace {

LtiModel case_study_model() {
  Matrix A(2, 2);
  A << 2, 1, -1, 2;
  return LtiModel(A, Matrix::Identity(2, 2));
}

UncertaintySet case_study_uncertainty() {
  return UncertaintySet::box_vertices(case_study_model(), Vector::Constant(2, -0.05),
                                      Vector::Constant(2, 0.05));
}

void check_invariants(const ScenarioTree& tree) {
  ASSERT_FALSE(tree.node(0).parent.has_value());
  EXPECT_EQ(tree.node(0).depth, 0);
  for (std::size_t i = 1; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    ASSERT_TRUE(n.parent.has_value());
    EXPECT_EQ(n.depth, tree.node(*n.parent).depth + 1);
  }
  for (std::size_t i = 0; i < tree.size(); ++i) {
    const int depth = tree.node(i).depth;
    const std::size_t expected = depth < tree.robust_horizon() ? tree.num_branches()
                                 : depth < tree.horizon()       ? 1
                                                                : 0;
    EXPECT_EQ(tree.children(i).size(), expected);
  }
}

}  // namespace

TEST(ScenarioTree, CaseStudyHas1024Scenarios) {
  const ScenarioTree tree = build_tree(case_study_uncertainty(), 5, 5);
  EXPECT_EQ(tree.num_leaves(), 1024u);
  EXPECT_EQ(tree.size(), 1365u);
  EXPECT_EQ(tree.num_non_leaf(), 341u);
  check_invariants(tree);
}

TEST(ScenarioTree, SingleRealizationIsAChain) {
  const ScenarioTree tree = build_tree(UncertaintySet::nominal(case_study_model()), 3, 5);
  EXPECT_EQ(tree.size(), 6u);
  EXPECT_EQ(tree.num_leaves(), 1u);
  check_invariants(tree);
}

TEST(ScenarioTree, BranchingStopsAtRobustHorizon) {
  const ScenarioTree tree = build_tree(case_study_uncertainty(), 1, 5);
  EXPECT_EQ(tree.num_leaves(), 4u);
  EXPECT_EQ(tree.size(), 21u);
  EXPECT_EQ(tree.size(), tree_node_count(4, 1, 5));
  check_invariants(tree);
  // Continuation nodes keep the realization of their branch.
  for (std::size_t i = 1; i < tree.size(); ++i) {
    const auto& n = tree.node(i);
    if (n.depth > 1) EXPECT_EQ(n.realization, tree.node(*n.parent).realization);
  }
}

TEST(ScenarioTree, NodeCountFormula) {
  for (std::size_t s = 1; s <= 4; ++s) {
    for (int n = 1; n <= 5; ++n) {
      for (int r = 1; r <= n; ++r) {
        UncertaintySet u = UncertaintySet::additive(
            case_study_model(), std::vector<Vector>(s, Vector::Zero(2)));
        const ScenarioTree tree = build_tree(u, r, n);
        EXPECT_EQ(tree.size(), tree_node_count(s, r, n));
        std::size_t leaves = 1;
        for (int k = 0; k < r; ++k) leaves *= s;
        EXPECT_EQ(tree.num_leaves(), leaves);
      }
    }
  }
}

TEST(ScenarioTree, LeafProbabilitiesSumToOne) {
  const ScenarioTree tree = build_tree(case_study_uncertainty(), 3, 4);
  double total = 0.0;
  for (const auto& path : tree.leaf_paths()) total += tree.node(path.back()).probability;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

// Two scenarios share inputs exactly up to their deepest common ancestor:
// the shared prefix of two leaf paths is the same node sequence, and after
// divergence no node is shared.
TEST(ScenarioTree, NonAnticipativityByConstruction) {
  const ScenarioTree tree = build_tree(case_study_uncertainty(), 3, 4);
  const auto& paths = tree.leaf_paths();
  for (std::size_t a = 0; a < paths.size(); ++a) {
    for (std::size_t b = a + 1; b < paths.size(); ++b) {
      std::size_t k = 0;
      while (k < paths[a].size() && paths[a][k] == paths[b][k]) ++k;
      ASSERT_GE(k, 1u);
      for (std::size_t j = k; j < paths[a].size(); ++j) EXPECT_NE(paths[a][j], paths[b][j]);
    }
  }
}

TEST(ScenarioTree, Deterministic) {
  const ScenarioTree a = build_tree(case_study_uncertainty(), 2, 4);
  const ScenarioTree b = build_tree(case_study_uncertainty(), 2, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a.node(i).parent, b.node(i).parent);
    EXPECT_EQ(a.node(i).realization, b.node(i).realization);
  }
}

TEST(ScenarioTree, RejectsBadHorizons) {
  EXPECT_THROW(build_tree(case_study_uncertainty(), 0, 5), ParameterError);
  EXPECT_THROW(build_tree(case_study_uncertainty(), 6, 5), ParameterError);
}

TEST(UncertaintySet, VerticesHaveZeroMean) {
  const UncertaintySet u = case_study_uncertainty();
  EXPECT_EQ(u.size(), 4u);
  EXPECT_TRUE(u.has_zero_mean_disturbance());
  std::set<std::pair<double, double>> corners;
  for (const auto& r : u.realizations()) corners.insert({r.d[0], r.d[1]});
  EXPECT_EQ(corners.size(), 4u);
}

TEST(UncertaintySet, RejectsBadWeights) {
  const LtiModel m = case_study_model();
  EXPECT_THROW(UncertaintySet::additive(m, {Vector::Zero(2), Vector::Zero(2)}, {0.5, 0.4}),
               ParameterError);
  EXPECT_THROW(UncertaintySet::additive(m, {Vector::Zero(2), Vector::Zero(2)}, {1.0, 0.0}),
               ParameterError);
}

TEST(Step, ZeroStaysZero) {
  const Vector x = step(case_study_model(), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2));
  EXPECT_EQ(x, Vector::Zero(2));
}

TEST(Step, CaseStudyDynamics) {
  Vector x(2), u(2), d(2);
  x << 1, 0;
  const Vector next = step(case_study_model(), x, Vector::Zero(2), Vector::Zero(2));
  EXPECT_DOUBLE_EQ(next[0], 2.0);
  EXPECT_DOUBLE_EQ(next[1], -1.0);
  u << 1, 0;
  d << 0.05, -0.05;
  const Vector pushed = step(case_study_model(), Vector::Zero(2), u, d);
  EXPECT_DOUBLE_EQ(pushed[0], 1.05);
  EXPECT_DOUBLE_EQ(pushed[1], -0.05);
}

TEST(Step, DimensionMismatch) {
  EXPECT_THROW(step(case_study_model(), Vector::Zero(3), Vector::Zero(2), Vector::Zero(2)),
               ParameterError);
}
