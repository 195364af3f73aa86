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

#include <deque>
#include <functional>

namespace cvxctg {

struct LbfgsSettings {
  int memory = 10;
  double c1 = 1e-4;
  double c2 = 0.9;
  double grad_tol = 1e-6;  // on the Euclidean gradient norm
  int max_iterations = 5000;
  int max_line_search = 40;
};

struct LbfgsResult {
  Vector x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  bool line_search_failed = false;
};

/// Returns f(x) and writes the gradient into g.
using Objective = std::function<double(const Vector& x, Vector& g)>;

namespace detail {

// Minimizer of the cubic interpolating (a, fa, da) and (b, fb, db), kept
// inside the bracket away from its ends.
inline double cubic_step(double a, double fa, double da, double b, double fb, double db) {
  const double lo = std::min(a, b), hi = std::max(a, b);
  const double d1 = da + db - 3.0 * (fa - fb) / (a - b);
  const double disc = d1 * d1 - da * db;
  double t = 0.5 * (a + b);
  if (disc >= 0.0) {
    const double d2 = (b > a ? 1.0 : -1.0) * std::sqrt(disc);
    const double denom = db - da + 2.0 * d2;
    if (denom != 0.0) t = b - (b - a) * (db + d2 - d1) / denom;
  }
  const double margin = 0.1 * (hi - lo);
  if (!std::isfinite(t) || t < lo + margin || t > hi - margin) t = 0.5 * (a + b);
  return t;
}

struct LinePoint {
  double alpha, f, slope;
  Vector x, g;
};

// Strong Wolfe line search (bracketing followed by zoom).
inline bool strong_wolfe(const Objective& fg, const Vector& x0, double f0, double slope0,
                         const Vector& dir, double alpha_init, const LbfgsSettings& s,
                         LinePoint& out, int& evaluations) {
  auto eval = [&](double alpha) {
    LinePoint p;
    p.alpha = alpha;
    p.x = x0 + alpha * dir;
    p.g.resize(x0.size());
    p.f = fg(p.x, p.g);
    p.slope = p.g.dot(dir);
    ++evaluations;
    return p;
  };
  LinePoint prev{0.0, f0, slope0, x0, Vector()};
  double alpha = alpha_init;
  auto zoom = [&](LinePoint lo, LinePoint hi, int budget) {
    for (int k = 0; k < budget; ++k) {
      const double a = cubic_step(lo.alpha, lo.f, lo.slope, hi.alpha, hi.f, hi.slope);
      LinePoint p = eval(a);
      if (!std::isfinite(p.f) || p.f > f0 + s.c1 * a * slope0 || p.f >= lo.f) {
        hi = std::move(p);
      } else {
        if (std::abs(p.slope) <= -s.c2 * slope0) {
          out = std::move(p);
          return true;
        }
        if (p.slope * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(p);
      }
      if (std::abs(hi.alpha - lo.alpha) < 1e-16 * std::max(1.0, lo.alpha)) break;
    }
    // Fall back to the best sufficient-decrease point found.
    if (lo.alpha > 0.0) {
      out = std::move(lo);
      return true;
    }
    return false;
  };
  for (int k = 0; k < s.max_line_search; ++k) {
    LinePoint p = eval(alpha);
    if (!std::isfinite(p.f) || p.f > f0 + s.c1 * alpha * slope0 || (k > 0 && p.f >= prev.f)) {
      return zoom(std::move(prev), std::move(p), s.max_line_search - k);
    }
    if (std::abs(p.slope) <= -s.c2 * slope0) {
      out = std::move(p);
      return true;
    }
    if (p.slope >= 0.0) return zoom(std::move(p), std::move(prev), s.max_line_search - k);
    prev = std::move(p);
    alpha *= 2.0;
  }
  return false;
}

}  // namespace detail

inline LbfgsResult lbfgs_minimize(const Objective& fg, Vector x0,
                                  const LbfgsSettings& settings = {}) {
  if (settings.memory < 1 || !(settings.c1 > 0.0 && settings.c1 < settings.c2 &&
                               settings.c2 < 1.0)) {
    throw ParameterError("invalid L-BFGS settings");
  }
  LbfgsResult r;
  r.x = std::move(x0);
  Vector g(r.x.size());
  r.f = fg(r.x, g);
  r.evaluations = 1;
  if (!std::isfinite(r.f) || !g.allFinite()) {
    throw ParameterError("objective is not finite at the starting point");
  }
  std::deque<Vector> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vector dir, alpha_k;
  for (r.iterations = 0; r.iterations < settings.max_iterations; ++r.iterations) {
    r.grad_norm = g.norm();
    if (r.grad_norm <= settings.grad_tol) {
      r.converged = true;
      break;
    }
    // Two-loop recursion.
    dir = -g;
    const auto h = static_cast<Eigen::Index>(s_hist.size());
    alpha_k.resize(h);
    for (Eigen::Index i = h - 1; i >= 0; --i) {
      alpha_k[i] = rho_hist[i] * s_hist[i].dot(dir);
      dir -= alpha_k[i] * y_hist[i];
    }
    if (h > 0) dir *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (Eigen::Index i = 0; i < h; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(dir);
      dir += (alpha_k[i] - beta) * s_hist[i];
    }
    double slope = g.dot(dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      dir = -g;
      slope = -g.squaredNorm();
    }
    const double alpha0 = h == 0 ? std::min(1.0, 1.0 / r.grad_norm) : 1.0;
    detail::LinePoint p;
    if (!detail::strong_wolfe(fg, r.x, r.f, slope, dir, alpha0, settings, p, r.evaluations)) {
      r.line_search_failed = true;
      break;
    }
    Vector sk = p.x - r.x;
    Vector yk = p.g - g;
    const double sy = sk.dot(yk);
    r.x = std::move(p.x);
    r.f = p.f;
    g = std::move(p.g);
    if (sy > 1e-12 * sk.norm() * yk.norm()) {
      if (static_cast<int>(s_hist.size()) == settings.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(sk));
      y_hist.push_back(std::move(yk));
      rho_hist.push_back(1.0 / sy);
    }
  }
  r.grad_norm = g.norm();
  if (r.grad_norm <= settings.grad_tol) r.converged = true;
  return r;
}

}  // namespace cvxctg
