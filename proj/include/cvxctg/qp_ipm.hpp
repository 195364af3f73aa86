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

// Primal-dual interior-point backend (Mehrotra predictor-corrector).
//
// Rows with l == u become equalities A_E x = b; every finite side of the
// remaining rows becomes an inequality G x + s = h with s >= 0. Each
// iteration factorizes the quasi-definite system
//
//   [ P + G' W G + dx I    A_E'  ]
//   [ A_E                 -de I  ],   W = diag(z / s),
//
// and cleans up the regularization with a few steps of iterative refinement.
// This backend is preferred for exact-penalty and epigraph problems, where
// large multipliers slow the first-order iteration down.

#pragma once

#include "cvxctg/qp_types.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <vector>

namespace cvxctg {

class InteriorPointSolver {
 public:
  InteriorPointSolver(SparseQp qp, QpSettings settings = {})
      : qp_(std::move(qp)), settings_(settings) {
    qp_.validate();
    qp_.P.makeCompressed();
    qp_.A.makeCompressed();
    abs_A_ = qp_.A.cwiseAbs();
    abs_At_ = abs_A_.transpose();
    check_hessian();
    classify_rows();
    build_matrices();
    fill_rhs();
  }

  [[nodiscard]] const SparseQp& problem() const { return qp_; }

  void update_bounds(const Vector& l, const Vector& u) {
    detail::require_dims(l.size() == qp_.l.size() && u.size() == qp_.u.size(),
                         "bound update size");
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      if (std::isnan(l[i]) || std::isnan(u[i]) || l[i] > u[i]) {
        throw ParameterError(detail::concat("invalid bounds at row ", i));
      }
      if (kind_of(l[i], u[i]) != row_kind_[i]) {
        throw ParameterError(detail::concat("bound update changes the type of row ", i));
      }
    }
    for (const Eigen::Index i : trivial_rows_) {
      if (l[i] > 0.0 || u[i] < 0.0) {
        throw ParameterError(detail::concat("empty row ", i, " no longer admits zero"));
      }
    }
    qp_.l = l;
    qp_.u = u;
    fill_rhs();
  }

  void update_linear_cost(const Vector& q) {
    detail::require_dims(q.size() == qp_.q.size(), "linear cost update size");
    qp_.q = q;
  }

  QpSolution solve() {
    const auto start = std::chrono::steady_clock::now();
    const auto n = qp_.q.size();
    const auto me = Ae_.rows();
    const auto mi = G_.rows();

    Vector x = Vector::Zero(n), y = Vector::Zero(me);
    Vector s = Vector::Ones(mi), z = Vector::Ones(mi);
    initial_point(x, y, s, z);

    QpSolution out;
    out.status = QpStatus::max_iterations;
    double best_merit = kInfinity;
    double last_attempt = kInfinity;
    QpSolution best;

    Vector rd(n), re(me), ri(mi);
    Vector dx(n), dy(me), ds(mi), dz(mi);
    Vector dx_aff(n), dy_aff(me), ds_aff(mi), dz_aff(mi), rc(mi);
    int iter = 0;
    for (iter = 0; iter <= settings_.ipm_max_iterations; ++iter) {
      rd = qp_.P * x + qp_.q;
      if (me > 0) rd.noalias() += Aet_ * y;
      if (mi > 0) rd.noalias() += Gt_ * z;
      re = (me > 0) ? Vector(Ae_ * x - b_) : Vector(0);
      ri = (mi > 0) ? Vector(G_ * x + s - h_) : Vector(0);
      const double gap = mi > 0 ? s.dot(z) / static_cast<double>(mi) : 0.0;

      const Report rep = report(x, y, z);
      // The mean complementarity bounds how far weakly active rows can sit
      // from their bounds, so it is held well below the residual tolerances.
      const double comp_tol =
          kGapFactor * (settings_.eps_abs + settings_.eps_rel * std::abs(rep.objective));
      const double merit = std::max({rep.primal / rep.eps_primal, rep.dual / rep.eps_dual,
                                     gap / comp_tol});
      if (merit < best_merit) {
        best_merit = merit;
        fill_solution(best, x, y, z, rep);
      }
      if (rep.primal <= rep.eps_primal && rep.dual <= rep.eps_dual && gap <= comp_tol) {
        fill_solution(out, x, y, z, rep);
        out.status = QpStatus::solved;
        last_s_ = s;
        last_z_ = z;
        if (polishing()) polish(out, hints_ ? hints_(x) : std::vector<RowHint>{});
        break;
      }
      // Once the active set has likely settled, a verified polish ends the
      // solve early; a rejected attempt just continues the iteration.
      if (polishing() && merit <= kEarlyPolishMerit && merit <= 0.1 * last_attempt) {
        last_attempt = merit;
        last_s_ = s;
        last_z_ = z;
        QpSolution trial;
        fill_solution(trial, x, y, z, rep);
        trial.status = QpStatus::solved;
        if (polish(trial, hints_ ? hints_(x) : std::vector<RowHint>{})) {
          out = std::move(trial);
          break;
        }
      }
      if (is_primal_infeasible(y, z)) {
        fill_solution(out, x, y, z, rep);
        out.status = QpStatus::primal_infeasible;
        break;
      }
      if (iter == settings_.ipm_max_iterations) break;

      const Vector w = z.cwiseQuotient(s);
      if (!factorize(w)) break;

      // Predictor.
      rc = s.cwiseProduct(z);
      newton_direction(w, s, rd, re, ri, rc, dx_aff, dy_aff, ds_aff, dz_aff);
      const double alpha_aff =
          std::min(max_step(s, ds_aff), max_step(z, dz_aff));
      double sigma = 0.0;
      if (mi > 0) {
        const double gap_aff =
            (s + alpha_aff * ds_aff).dot(z + alpha_aff * dz_aff) / static_cast<double>(mi);
        sigma = std::pow(std::max(gap_aff, 0.0) / gap, 3.0);
      }

      // Corrector.
      rc = s.cwiseProduct(z) + ds_aff.cwiseProduct(dz_aff);
      rc.array() -= sigma * gap;
      newton_direction(w, s, rd, re, ri, rc, dx, dy, ds, dz);
      const double alpha =
          std::min(1.0, 0.99 * std::min(max_step(s, ds), max_step(z, dz)));
      x += alpha * dx;
      y += alpha * dy;
      s += alpha * ds;
      z += alpha * dz;
    }

    if (out.status == QpStatus::max_iterations) {
      out = best;
      out.status = QpStatus::max_iterations;
    }
    out.iterations = iter;
    out.solve_time = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start).count();
    return out;
  }

  using HintFunction = std::function<std::vector<RowHint>(const Vector& x)>;

  /// Supplies active-set hints for polishing from the current iterate;
  /// setting one enables polishing.
  void set_polish_hints(HintFunction f) { hints_ = std::move(f); }

  [[nodiscard]] bool polishing() const { return settings_.polish || static_cast<bool>(hints_); }

  /// Re-solves the last converged problem on an active set. Rows hinted
  /// `automatic` are active when their multiplier exceeds their slack.
  /// Returns true (and overwrites `sol`) when the polished point verifies.
  bool polish(QpSolution& sol, const std::vector<RowHint>& hints) const {
    if (!sol.solved() || last_s_.size() != G_.rows()) return false;
    detail::require_dims(hints.empty() || hints.size() == static_cast<std::size_t>(qp_.l.size()),
                         "one hint per constraint row");
    std::vector<Eigen::Index> active;
    const auto nup = static_cast<Eigen::Index>(upper_rows_.size());
    for (Eigen::Index k = 0; k < G_.rows(); ++k) {
      const bool upper = k < nup;
      const Eigen::Index row = upper ? upper_rows_[k] : lower_rows_[k - nup];
      const RowHint h = hints.empty() ? RowHint::automatic : hints[row];
      bool on = false;
      switch (h) {
        case RowHint::automatic: on = last_z_[k] > last_s_[k]; break;
        case RowHint::inactive: on = false; break;
        case RowHint::lower: on = !upper; break;
        case RowHint::upper: on = upper; break;
      }
      if (on) active.push_back(k);
    }
    return polish_on(active, sol);
  }

 private:
  enum class RowKind { free_row, equality, inequality };

  struct Report {
    double primal, dual, eps_primal, eps_dual, objective;
  };

  static RowKind kind_of(double lo, double hi) {
    if (lo <= -1e20 && hi >= 1e20) return RowKind::free_row;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) return RowKind::equality;
    return RowKind::inequality;
  }

  // The quasi-definite factorization would accept an indefinite P, so
  // convexity is checked separately.
  void check_hessian() const {
    const auto n = qp_.q.size();
    if (n == 0) return;
    SparseMatrix shifted = qp_.P;
    double scale = 1.0;
    for (Eigen::Index k = 0; k < qp_.P.nonZeros(); ++k) {
      scale = std::max(scale, std::abs(qp_.P.valuePtr()[k]));
    }
    const double shift = 1e-10 * scale;
    for (Eigen::Index i = 0; i < n; ++i) shifted.coeffRef(i, i) += shift;
    Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> ldlt(shifted);
    if (ldlt.info() != Eigen::Success || ldlt.vectorD().minCoeff() <= 0.0) {
      throw ProblemError("P is not positive semidefinite");
    }
  }

  void classify_rows() {
    const auto m = qp_.l.size();
    row_kind_.resize(m);
    std::vector<int> row_nnz(static_cast<std::size_t>(m), 0);
    for (Eigen::Index k = 0; k < qp_.A.nonZeros(); ++k) ++row_nnz[qp_.A.innerIndexPtr()[k]];
    for (Eigen::Index i = 0; i < m; ++i) {
      row_kind_[i] = kind_of(qp_.l[i], qp_.u[i]);
      // Empty rows that admit zero carry no information and would pin a
      // slack to zero; they keep a zero multiplier.
      const bool trivial = row_nnz[i] == 0 && qp_.l[i] <= 0.0 && qp_.u[i] >= 0.0;
      if (trivial) {
        trivial_rows_.push_back(i);
        continue;
      }
      if (row_kind_[i] == RowKind::equality) {
        eq_rows_.push_back(i);
      } else if (row_kind_[i] == RowKind::inequality) {
        if (qp_.u[i] < 1e20) upper_rows_.push_back(i);
        if (qp_.l[i] > -1e20) lower_rows_.push_back(i);
      }
    }
  }

  void build_matrices() {
    const auto n = qp_.q.size();
    const SparseMatrix At = qp_.A.transpose();  // columns are rows of A
    auto gather = [&](const std::vector<Eigen::Index>& rows, double sign,
                      std::vector<Triplet>& t, Eigen::Index offset) {
      for (std::size_t k = 0; k < rows.size(); ++k) {
        for (SparseMatrix::InnerIterator it(At, static_cast<int>(rows[k])); it; ++it) {
          t.emplace_back(static_cast<int>(offset + k), static_cast<int>(it.row()),
                         sign * it.value());
        }
      }
    };
    std::vector<Triplet> te, tg;
    gather(eq_rows_, 1.0, te, 0);
    gather(upper_rows_, 1.0, tg, 0);
    gather(lower_rows_, -1.0, tg, static_cast<Eigen::Index>(upper_rows_.size()));
    Ae_ = SparseMatrix(static_cast<Eigen::Index>(eq_rows_.size()), n);
    Ae_.setFromTriplets(te.begin(), te.end());
    G_ = SparseMatrix(static_cast<Eigen::Index>(upper_rows_.size() + lower_rows_.size()), n);
    G_.setFromTriplets(tg.begin(), tg.end());
    Ae_.makeCompressed();
    G_.makeCompressed();
    Aet_ = Ae_.transpose();
    Gt_ = G_.transpose();

    // Without equality rows and with a dense normal matrix, a dense Cholesky
    // is far faster than the simplicial sparse factorization.
    if (Ae_.rows() == 0 && n > 0) {
      const SparseMatrix gtg = SparseMatrix(Gt_ * G_) + qp_.P;
      use_dense_ = static_cast<double>(gtg.nonZeros()) > 0.2 * static_cast<double>(n * n) &&
                   n > 50;
    }
  }

  void fill_rhs() {
    b_.resize(static_cast<Eigen::Index>(eq_rows_.size()));
    for (std::size_t k = 0; k < eq_rows_.size(); ++k) b_[k] = qp_.l[eq_rows_[k]];
    h_.resize(static_cast<Eigen::Index>(upper_rows_.size() + lower_rows_.size()));
    for (std::size_t k = 0; k < upper_rows_.size(); ++k) h_[k] = qp_.u[upper_rows_[k]];
    for (std::size_t k = 0; k < lower_rows_.size(); ++k) {
      h_[upper_rows_.size() + k] = -qp_.l[lower_rows_[k]];
    }
  }

  // The lower triangle of the quasi-definite matrix has a fixed pattern;
  // every weighted term G' W G lands at precomputed value slots.
  void build_kkt_pattern() {
    const auto n = qp_.q.size();
    const auto me = Ae_.rows();
    std::vector<Triplet> t;
    for (int k = 0; k < qp_.P.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(qp_.P, k); it; ++it) {
        if (it.row() >= k) t.emplace_back(static_cast<int>(it.row()), k, 0.0);
      }
    }
    for (Eigen::Index i = 0; i < n + me; ++i) t.emplace_back(i, i, 0.0);
    for (int r = 0; r < Gt_.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator a(Gt_, r); a; ++a) {
        for (SparseMatrix::InnerIterator b(Gt_, r); b; ++b) {
          if (b.row() >= a.row()) t.emplace_back(static_cast<int>(b.row()), static_cast<int>(a.row()), 0.0);
        }
      }
    }
    for (int k = 0; k < Ae_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(Ae_, k); it; ++it) {
        t.emplace_back(static_cast<int>(n + it.row()), k, 0.0);
      }
    }
    // The fill-reducing ordering is applied once to the pattern, so the
    // per-iteration factorization works on the stored matrix in place.
    SparseMatrix lower(n + me, n + me);
    lower.setFromTriplets(t.begin(), t.end());
    const SparseMatrix sym = lower.selfadjointView<Eigen::Lower>();
    Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int> amd;
    Eigen::AMDOrdering<int>()(sym, amd);
    perm_ = Eigen::PermutationMatrix<Eigen::Dynamic, Eigen::Dynamic, int>(amd.inverse()).indices();
    for (auto& e : t) {
      const int a = perm_[e.row()], b = perm_[e.col()];
      e = Triplet(std::min(a, b), std::max(a, b), 0.0);
    }
    kkt_ = SparseMatrix(n + me, n + me);
    kkt_.setFromTriplets(t.begin(), t.end());
    kkt_.makeCompressed();

    auto slot = [this](Eigen::Index r, Eigen::Index c) {
      const int a = perm_[r], b = perm_[c];
      const int row = std::min(a, b), col = std::max(a, b);
      const int* inner = kkt_.innerIndexPtr();
      const int begin = kkt_.outerIndexPtr()[col];
      const int end = kkt_.outerIndexPtr()[col + 1];
      const int* pos = std::lower_bound(inner + begin, inner + end, row);
      return static_cast<Eigen::Index>(pos - inner);
    };

    base_values_ = Vector::Zero(kkt_.nonZeros());
    for (int k = 0; k < qp_.P.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(qp_.P, k); it; ++it) {
        if (it.row() >= k) base_values_[slot(it.row(), k)] += it.value();
      }
    }
    diagonal_slots_.clear();
    for (Eigen::Index i = 0; i < n + me; ++i) diagonal_slots_.push_back(slot(i, i));
    for (Eigen::Index i = 0; i < n; ++i) base_values_[slot(i, i)] += kPrimalReg;
    for (Eigen::Index i = 0; i < me; ++i) base_values_[slot(n + i, n + i)] -= kDualReg;
    for (int k = 0; k < Ae_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(Ae_, k); it; ++it) {
        base_values_[slot(n + it.row(), k)] += it.value();
      }
    }
    weighted_.clear();
    for (int r = 0; r < Gt_.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator a(Gt_, r); a; ++a) {
        for (SparseMatrix::InnerIterator b(Gt_, r); b; ++b) {
          if (b.row() >= a.row()) {
            weighted_.push_back({slot(b.row(), a.row()), r, a.value() * b.value()});
          }
        }
      }
    }
  }

  bool factorize(const Vector& w) {
    w_ = w;
    // Near the boundary W spans many decades; a failed factorization is
    // retried with heavier regularization, which refinement then removes.
    double extra = 0.0;
    for (int attempt = 0; attempt < 6; ++attempt) {
      if (use_dense_ ? factorize_dense(w, extra) : factorize_sparse(w, extra)) return true;
      extra = extra == 0.0 ? 1e-8 : 100.0 * extra;
    }
    return false;
  }

  bool factorize_dense(const Vector& w, double extra) {
    Matrix K = Matrix(qp_.P);
    K.diagonal().array() += kPrimalReg + extra;
    for (int r = 0; r < Gt_.outerSize(); ++r) {
      for (SparseMatrix::InnerIterator a(Gt_, r); a; ++a) {
        for (SparseMatrix::InnerIterator b(Gt_, r); b; ++b) {
          if (b.row() >= a.row()) K(b.row(), a.row()) += w[r] * a.value() * b.value();
        }
      }
    }
    dense_.compute(K);  // reads the lower triangle
    return dense_.info() == Eigen::Success;
  }

  bool factorize_sparse(const Vector& w, double extra) {
    if (kkt_.nonZeros() == 0 && qp_.q.size() + Ae_.rows() > 0) build_kkt_pattern();
    Eigen::Map<Vector> values(kkt_.valuePtr(), kkt_.nonZeros());
    values = base_values_;
    for (const auto& c : weighted_) values[c.slot] += w[c.row] * c.coefficient;
    if (extra > 0.0) {
      const auto n = qp_.q.size();
      for (std::size_t i = 0; i < diagonal_slots_.size(); ++i) {
        values[diagonal_slots_[i]] += static_cast<Eigen::Index>(i) < n ? extra : -extra;
      }
    }
    if (!sparse_) {
      sparse_ = std::make_unique<KktFactor>();
      sparse_->analyzePattern(kkt_);
    }
    sparse_->factorize(kkt_);
    return sparse_->info() == Eigen::Success;
  }

  void kkt_solve(const Vector& rx, const Vector& ry, Vector& vx, Vector& vy) const {
    const auto n = rx.size();
    Vector work(n + ry.size());
    for (Eigen::Index i = 0; i < n; ++i) work[perm_[i]] = rx[i];
    for (Eigen::Index i = 0; i < ry.size(); ++i) work[perm_[n + i]] = ry[i];
    work = sparse_->solve(work).eval();
    vx.resize(n);
    vy.resize(ry.size());
    for (Eigen::Index i = 0; i < n; ++i) vx[i] = work[perm_[i]];
    for (Eigen::Index i = 0; i < ry.size(); ++i) vy[i] = work[perm_[n + i]];
  }

  // Exact (unregularized) reduced operator applied to (vx, vy).
  void apply_reduced(const Vector& vx, const Vector& vy, Vector& ox, Vector& oy) const {
    ox = qp_.P * vx;
    if (G_.rows() > 0) ox.noalias() += Gt_ * w_.cwiseProduct(G_ * vx);
    if (Ae_.rows() > 0) {
      ox.noalias() += Aet_ * vy;
      oy = Ae_ * vx;
    } else {
      oy.resize(0);
    }
  }

  void solve_reduced(const Vector& rx, const Vector& ry, Vector& vx, Vector& vy) const {
    const auto n = rx.size();
    if (use_dense_) {
      vx = dense_.solve(rx);
      vy.resize(0);
    } else {
      kkt_solve(rx, ry, vx, vy);
    }
    // Iterative refinement against the unregularized operator.
    Vector ox, oy;
    for (int k = 0; k < 3; ++k) {
      apply_reduced(vx, vy, ox, oy);
      const Vector ex = rx - ox;
      const Vector ey = ry - oy;
      if (std::max(detail::inf_norm(ex), detail::inf_norm(ey)) <=
          kRefineTolerance * std::max({1.0, detail::inf_norm(rx), detail::inf_norm(ry)})) {
        break;
      }
      if (use_dense_) {
        vx += dense_.solve(ex);
      } else {
        Vector cx, cy;
        kkt_solve(ex, ey, cx, cy);
        vx += cx;
        vy += cy;
      }
    }
  }

  // Solves the linearized KKT conditions with complementarity residual rc.
  void newton_direction(const Vector& w, const Vector& s, const Vector& rd,
                        const Vector& re, const Vector& ri, const Vector& rc, Vector& dx,
                        Vector& dy, Vector& ds, Vector& dz) const {
    // dz = W G dx + S^{-1}(Z ri - rc);  ds = -ri - G dx
    Vector rx = -rd;
    Vector t;
    if (G_.rows() > 0) {
      t = (w.cwiseProduct(ri) - rc.cwiseQuotient(s));
      rx.noalias() -= Gt_ * t;
    }
    const Vector ry = -re;
    solve_reduced(rx, ry, dx, dy);
    if (G_.rows() > 0) {
      const Vector gdx = G_ * dx;
      dz = w.cwiseProduct(gdx) + t;
      ds = -ri - gdx;
    } else {
      dz.resize(0);
      ds.resize(0);
    }
  }

  static double max_step(const Vector& v, const Vector& dv) {
    double alpha = kInfinity;
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (dv[i] < 0.0) alpha = std::min(alpha, -v[i] / dv[i]);
    }
    return std::min(alpha, 1e10);
  }

  void initial_point(Vector& x, Vector& y, Vector& s, Vector& z) {
    const auto mi = G_.rows();
    // Least-squares start: minimize 1/2 x'Px + q'x + 1/2 |Gx - h|^2 s.t. A_E x = b.
    if (!factorize(Vector::Ones(mi))) {
      throw ProblemError("KKT factorization failed; P is not positive semidefinite");
    }
    Vector rx = -qp_.q;
    if (mi > 0) rx.noalias() += Gt_ * h_;
    solve_reduced(rx, b_, x, y);
    if (mi == 0) return;
    s = h_ - G_ * x;
    z = -s;
    const double shift_s = -s.minCoeff();
    const double shift_z = -z.minCoeff();
    s.array() += std::max(shift_s, 0.0) + 1.0;
    z.array() += std::max(shift_z, 0.0) + 1.0;
  }

  Report report(const Vector& x, const Vector& y, const Vector& z) const {
    Report r{};
    const Vector ax = qp_.A * x;
    const Vector yfull = full_dual(y, z);
    const Vector px = qp_.P * x;
    const Vector aty = qp_.A.transpose() * yfull;
    r.primal = detail::bound_violation(ax, qp_.l, qp_.u);
    r.dual = detail::inf_norm(px + qp_.q + aty);
    r.objective = 0.5 * x.dot(px) + qp_.q.dot(x);
    // Relative terms use the magnitudes of the summands, so rows whose
    // large terms cancel (Ax ~ 0) still get a round-off sized tolerance.
    if (settings_.eps_rel > 0.0) {
      const Vector terms_primal = abs_A_ * x.cwiseAbs();
      const Vector terms_dual = abs_At_ * yfull.cwiseAbs();
      r.eps_primal = settings_.eps_abs + settings_.eps_rel * detail::inf_norm(terms_primal);
      r.eps_dual = settings_.eps_abs +
                   settings_.eps_rel * std::max({detail::inf_norm(px), detail::inf_norm(terms_dual),
                                                 detail::inf_norm(qp_.q)});
    } else {
      r.eps_primal = r.eps_dual = settings_.eps_abs;
    }
    return r;
  }

  // Solves the equality-constrained problem on the given active inequality
  // rows (indices into G) and keeps it when it is primal feasible with
  // correctly signed multipliers.
  bool polish_on(const std::vector<Eigen::Index>& active, QpSolution& out) const {
    const auto n = qp_.q.size();
    const auto me = Ae_.rows();
    const auto ma = static_cast<Eigen::Index>(active.size());
    std::vector<Triplet> t;
    for (int k = 0; k < qp_.P.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(qp_.P, k); it; ++it) {
        if (it.row() >= k) t.emplace_back(static_cast<int>(it.row()), k, it.value());
      }
    }
    for (Eigen::Index i = 0; i < n; ++i) t.emplace_back(i, i, kPolishReg);
    for (int k = 0; k < Ae_.outerSize(); ++k) {
      for (SparseMatrix::InnerIterator it(Ae_, k); it; ++it) {
        t.emplace_back(static_cast<int>(n + it.row()), k, it.value());
      }
    }
    Vector rhs(n + me + ma);
    rhs.head(n) = -qp_.q;
    rhs.segment(n, me) = b_;
    for (Eigen::Index a = 0; a < ma; ++a) {
      for (SparseMatrix::InnerIterator it(Gt_, static_cast<int>(active[a])); it; ++it) {
        t.emplace_back(static_cast<int>(n + me + a), static_cast<int>(it.row()), it.value());
      }
      rhs[n + me + a] = h_[active[a]];
    }
    for (Eigen::Index i = 0; i < me + ma; ++i) t.emplace_back(n + i, n + i, -kPolishReg);
    SparseMatrix K(n + me + ma, n + me + ma);
    K.setFromTriplets(t.begin(), t.end());
    SparseFactor f(K);
    if (f.info() != Eigen::Success) return false;
    // Refine against the unregularized system.
    const SparseMatrix full = K.selfadjointView<Eigen::Lower>();
    Vector sol = f.solve(rhs);
    for (int k = 0; k < 5; ++k) {
      Vector res = rhs - full * sol;
      res.head(n) += kPolishReg * sol.head(n);
      res.tail(me + ma) -= kPolishReg * sol.tail(me + ma);
      sol += f.solve(res);
    }
    const Vector x = sol.head(n);
    const Vector y = sol.segment(n, me);
    Vector zp = Vector::Zero(G_.rows());
    for (Eigen::Index a = 0; a < ma; ++a) zp[active[a]] = sol[n + me + a];
    if (zp.size() > 0 && zp.minCoeff() < -settings_.eps_abs) return false;
    const Report rep = report(x, y, zp);
    if (!(rep.primal <= rep.eps_primal && rep.dual <= rep.eps_dual)) return false;
    fill_solution(out, x, y, zp, rep);
    out.polished = true;
    return true;
  }

  // Multipliers in the l <= Ax <= u convention: positive at active upper bounds.
  Vector full_dual(const Vector& y, const Vector& z) const {
    Vector out = Vector::Zero(qp_.l.size());
    for (std::size_t k = 0; k < eq_rows_.size(); ++k) out[eq_rows_[k]] = y[k];
    for (std::size_t k = 0; k < upper_rows_.size(); ++k) out[upper_rows_[k]] += z[k];
    for (std::size_t k = 0; k < lower_rows_.size(); ++k) {
      out[lower_rows_[k]] -= z[upper_rows_.size() + k];
    }
    return out;
  }

  void fill_solution(QpSolution& sol, const Vector& x, const Vector& y, const Vector& z,
                     const Report& rep) const {
    sol.x = x;
    sol.y = full_dual(y, z);
    sol.objective = rep.objective;
    sol.primal_residual = rep.primal;
    sol.dual_residual = rep.dual;
  }

  // Farkas certificate: A' lambda ~ 0 with negative support over the bounds.
  bool is_primal_infeasible(const Vector& y, const Vector& z) const {
    const Vector lambda = full_dual(y, z);
    const double norm = detail::inf_norm(lambda);
    if (norm < 1e6) return false;
    const Vector atl = qp_.A.transpose() * lambda;
    if (detail::inf_norm(atl) > settings_.eps_prim_inf * norm) return false;
    double support = 0.0;
    for (Eigen::Index i = 0; i < lambda.size(); ++i) {
      if (lambda[i] > 0.0) support += qp_.u[i] * lambda[i];
      if (lambda[i] < 0.0) support += qp_.l[i] * lambda[i];
    }
    return std::isfinite(support) && support < -settings_.eps_prim_inf * norm;
  }

  static constexpr double kGapFactor = 1e-2;
  static constexpr double kPrimalReg = 1e-9;
  static constexpr double kRefineTolerance = 1e-15;
  static constexpr double kEarlyPolishMerit = 1e4;
  static constexpr double kPolishReg = 1e-9;
  static constexpr double kDualReg = 1e-9;

  using SparseFactor = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;
  using KktFactor = Eigen::SimplicialLDLT<SparseMatrix, Eigen::Upper, Eigen::NaturalOrdering<int>>;

  SparseQp qp_;
  QpSettings settings_;
  std::vector<RowKind> row_kind_;
  std::vector<Eigen::Index> eq_rows_, upper_rows_, lower_rows_, trivial_rows_;
  SparseMatrix Ae_, Aet_, G_, Gt_;
  Vector b_, h_;
  Vector w_;
  bool use_dense_ = false;
  Eigen::LLT<Matrix> dense_;
  std::unique_ptr<KktFactor> sparse_;
  Eigen::VectorXi perm_;  // position of each KKT row in the factored ordering

  struct WeightedEntry {
    Eigen::Index slot;
    int row;
    double coefficient;
  };
  SparseMatrix kkt_;
  Vector base_values_;
  std::vector<WeightedEntry> weighted_;
  std::vector<Eigen::Index> diagonal_slots_;
  Vector last_s_, last_z_;
  SparseMatrix abs_A_, abs_At_;  // entrywise |A|, for tolerance scaling
  HintFunction hints_;
};

}  // namespace cvxctg
