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

// Shared fixtures for the two-state benchmark system used across the tests.

#pragma once

#include <cmath>

#include "cvxctg/model.hpp"
#include "cvxctg/mpc.hpp"
#include "cvxctg/qp_types.hpp"

namespace case_study {

using namespace cvxctg;

inline LtiModel model() {
  Matrix A(2, 2);
  A << 2, 1, -1, 2;
  return LtiModel(A, Matrix::Identity(2, 2));
}

inline UncertaintySet vertices() {
  return UncertaintySet::box_vertices(model(), Vector::Constant(2, -0.05),
                                      Vector::Constant(2, 0.05));
}

// Closed form of the scalar DARE p^2 - 9p - 2 = 0.
inline double lqr_scalar() { return (9.0 + std::sqrt(89.0)) / 2.0; }

inline CostSpec cost() {
  return {Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2),
          lqr_scalar() * Matrix::Identity(2, 2)};
}

inline BoundSpec bounds() { return BoundSpec::symmetric_box(2, 1.0, 2, 1.0); }

inline QpSettings ipm() {
  QpSettings s;
  s.method = QpMethod::interior_point;
  s.eps_rel = 1e-10;
  return s;
}

inline Vector state(double a, double b) {
  Vector x(2);
  x << a, b;
  return x;
}

}  // namespace case_study
