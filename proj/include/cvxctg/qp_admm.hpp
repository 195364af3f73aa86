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

// Operator-splitting (ADMM) backend following the OSQP scheme: Ruiz
// equilibration of the problem data, a cached Cholesky factorization of the
// reduced system P + sigma I + A' diag(rho) A, over-relaxation, and
// residual-balancing updates of rho. Infinite bounds are allowed on either
// side; infeasibility is detected from the dual iterate differences.

#pragma once

#include "cvxctg/qp_types.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <chrono>
#include <memory>

namespace cvxctg {

class AdmmSolver {
 public:
  AdmmSolver(SparseQp qp, QpSettings settings = {})
      : qp_(std::move(qp)), settings_(settings) {
    qp_.validate();
    qp_.P.makeCompressed();
    qp_.A.makeCompressed();
    scale_problem();
    rho_base_ = settings_.rho;
    set_rho_vector(rho_base_);
    base_factor_ = factorize();
    reset_iterates();
  }

  [[nodiscard]] const SparseQp& problem() const { return qp_; }
  [[nodiscard]] const QpSettings& settings() const { return settings_; }
  QpSettings& mutable_settings() { return settings_; }

  void update_bounds(const Vector& l, const Vector& u) {
    detail::require_dims(l.size() == qp_.l.size() && u.size() == qp_.u.size(),
                         "bound update size");
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      if (std::isnan(l[i]) || std::isnan(u[i]) || l[i] > u[i]) {
        throw ParameterError(detail::concat("invalid bounds at row ", i));
      }
    }
    // Row types (equality / inequality / free) determine rho; they must not change.
    for (Eigen::Index i = 0; i < l.size(); ++i) {
      if (row_kind(l[i], u[i]) != row_kind(qp_.l[i], qp_.u[i])) {
        throw ParameterError(detail::concat("bound update changes the type of row ", i));
      }
    }
    qp_.l = l;
    qp_.u = u;
    ls_ = (E_.array() * l.array()).matrix();
    us_ = (E_.array() * u.array()).matrix();
  }

  void update_linear_cost(const Vector& q) {
    detail::require_dims(q.size() == qp_.q.size(), "linear cost update size");
    qp_.q = q;
    qs_ = cost_scale_ * (D_.array() * q.array()).matrix();
  }

  void warm_start(const Vector& x, const Vector& y) {
    detail::require_dims(x.size() == qp_.q.size() && y.size() == qp_.l.size(),
                         "warm start size");
    xs_ = (x.array() / D_.array()).matrix();
    ys_ = cost_scale_ * (y.array() / E_.array()).matrix();
    zs_ = As_ * xs_;
    has_warm_start_ = true;
  }

  QpSolution solve() {
    const auto start = std::chrono::steady_clock::now();
    const auto n = qp_.q.size();
    const auto m = qp_.l.size();

    if (!settings_.warm_start && !has_warm_start_) reset_iterates();
    has_warm_start_ = false;

    // Every solve starts from the base rho so results do not depend on history.
    if (rho_ != rho_base_) {
      set_rho_vector(rho_base_);
      factor_.reset();
    }

    QpSolution best;
    double best_merit = kInfinity;
    Vector x_tilde(n), z_tilde(m), z_hat(m), rhs(n), delta_y(m);
    Vector x_prev(n), y_prev(m);
    QpSolution out;
    out.status = QpStatus::max_iterations;

    int iter = 0;
    for (iter = 1; iter <= settings_.max_iterations; ++iter) {
      x_prev = xs_;
      y_prev = ys_;

      rhs = settings_.sigma * xs_ - qs_;
      rhs.noalias() += Ast_ * (rho_vec_.cwiseProduct(zs_) - ys_);
      x_tilde = solve_linear(rhs);
      z_tilde.noalias() = As_ * x_tilde;

      xs_ = settings_.alpha * x_tilde + (1.0 - settings_.alpha) * x_prev;
      z_hat = settings_.alpha * z_tilde + (1.0 - settings_.alpha) * zs_;
      zs_ = (z_hat + ys_.cwiseQuotient(rho_vec_)).cwiseMax(ls_).cwiseMin(us_);
      ys_ += rho_vec_.cwiseProduct(z_hat - zs_);

      const bool check = iter % settings_.check_interval == 0 ||
                         iter == settings_.max_iterations;
      if (check) {
        const Residuals r = residuals();
        const double merit = std::max(r.primal / r.eps_primal, r.dual / r.eps_dual);
        if (merit < best_merit) {
          best_merit = merit;
          fill_solution(best, r);
        }
        if (r.primal <= r.eps_primal && r.dual <= r.eps_dual) {
          fill_solution(out, r);
          out.status = QpStatus::solved;
          break;
        }
        delta_y = ys_ - y_prev;
        if (is_primal_infeasible(delta_y)) {
          fill_solution(out, r);
          out.status = QpStatus::primal_infeasible;
          break;
        }
        if (settings_.adaptive_rho && iter % settings_.adaptive_rho_interval == 0) {
          maybe_update_rho(r);
        }
      }
    }

    if (out.status == QpStatus::max_iterations) {
      out = best;
      out.status = QpStatus::max_iterations;
    }
    out.iterations = std::min(iter, settings_.max_iterations);
    out.solve_time = std::chrono::duration<double>(
                         std::chrono::steady_clock::now() - start).count();
    return out;
  }

 private:
  enum class RowKind { free_row, equality, inequality };

  struct Residuals {
    double primal, dual, eps_primal, eps_dual;
    // scaled-space norms used by rho adaptation
    double prim_scaled, dual_scaled, prim_norm_scaled, dual_norm_scaled;
  };

  static RowKind row_kind(double lo, double hi) {
    if (lo <= -1e20 && hi >= 1e20) return RowKind::free_row;
    if (hi - lo < 1e-12 * std::max(1.0, std::abs(lo))) return RowKind::equality;
    return RowKind::inequality;
  }

  void scale_problem() {
    const auto n = qp_.q.size();
    const auto m = qp_.l.size();
    D_ = Vector::Ones(n);
    E_ = Vector::Ones(m);
    SparseMatrix Ps = qp_.P;
    SparseMatrix As = qp_.A;
    Vector qs = qp_.q;
    cost_scale_ = 1.0;

    auto clamp_norm = [](double v) {
      if (v < 1e-4) return 1.0;
      return std::min(v, 1e4);
    };

    for (int pass = 0; pass < settings_.scaling_iterations; ++pass) {
      Vector col_norm = Vector::Zero(n);
      Vector row_norm = Vector::Zero(m);
      for (int k = 0; k < Ps.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(Ps, k); it; ++it) {
          col_norm[k] = std::max(col_norm[k], std::abs(it.value()));
        }
      }
      for (int k = 0; k < As.outerSize(); ++k) {
        for (SparseMatrix::InnerIterator it(As, k); it; ++it) {
          const double a = std::abs(it.value());
          col_norm[k] = std::max(col_norm[k], a);
          row_norm[it.row()] = std::max(row_norm[it.row()], a);
        }
      }
      Vector dx(n), de(m);
      for (Eigen::Index j = 0; j < n; ++j) dx[j] = 1.0 / std::sqrt(clamp_norm(col_norm[j]));
      for (Eigen::Index i = 0; i < m; ++i) de[i] = 1.0 / std::sqrt(clamp_norm(row_norm[i]));
      Ps = dx.asDiagonal() * Ps * dx.asDiagonal();
      As = de.asDiagonal() * As * dx.asDiagonal();
      qs = dx.cwiseProduct(qs);
      D_ = D_.cwiseProduct(dx);
      E_ = E_.cwiseProduct(de);

      // cost scaling
      double mean_col = 0.0;
      if (n > 0) {
        Vector pc = Vector::Zero(n);
        for (int k = 0; k < Ps.outerSize(); ++k) {
          for (SparseMatrix::InnerIterator it(Ps, k); it; ++it) {
            pc[k] = std::max(pc[k], std::abs(it.value()));
          }
        }
        mean_col = pc.mean();
      }
      const double gamma =
          1.0 / clamp_norm(std::max(mean_col, detail::inf_norm(qs)));
      Ps *= gamma;
      qs *= gamma;
      cost_scale_ *= gamma;
    }

    Ps_ = Ps;
    As_ = As;
    Ast_ = SparseMatrix(As.transpose());
    qs_ = qs;
    ls_ = (E_.array() * qp_.l.array()).matrix();
    us_ = (E_.array() * qp_.u.array()).matrix();
    Dinv_ = D_.cwiseInverse();
    Einv_ = E_.cwiseInverse();
  }

  void set_rho_vector(double rho) {
    rho_ = std::clamp(rho, 1e-6, 1e6);
    const auto m = qp_.l.size();
    rho_vec_.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      switch (row_kind(qp_.l[i], qp_.u[i])) {
        case RowKind::free_row: rho_vec_[i] = 1e-6; break;
        case RowKind::equality: rho_vec_[i] = 1e3 * rho_; break;
        case RowKind::inequality: rho_vec_[i] = rho_; break;
      }
    }
  }

  using Factor = Eigen::SimplicialLLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>>;

  std::shared_ptr<Factor> factorize() const {
    const auto n = qp_.q.size();
    const SparseMatrix scaled_a = rho_vec_.cwiseSqrt().asDiagonal() * As_;
    SparseMatrix eye(n, n);
    eye.setIdentity();
    SparseMatrix kkt = Ps_ + settings_.sigma * eye;
    kkt += SparseMatrix(scaled_a.transpose() * scaled_a);
    auto f = std::make_shared<Factor>();
    f->compute(kkt);
    if (f->info() != Eigen::Success) {
      throw ProblemError("KKT factorization failed; P is not positive semidefinite");
    }
    return f;
  }

  Vector solve_linear(const Vector& rhs) {
    const Factor& f = factor_ ? *factor_ : *base_factor_;
    return f.solve(rhs);
  }

  void reset_iterates() {
    xs_ = Vector::Zero(qp_.q.size());
    zs_ = Vector::Zero(qp_.l.size());
    ys_ = Vector::Zero(qp_.l.size());
  }

  Residuals residuals() const {
    Residuals r{};
    const Vector ax_s = As_ * xs_;
    const Vector px_s = Ps_ * xs_;
    const Vector aty_s = Ast_ * ys_;

    const Vector ax = Einv_.cwiseProduct(ax_s);
    const Vector z = Einv_.cwiseProduct(zs_);
    r.primal = detail::inf_norm(ax - z);
    const double inv_c = 1.0 / cost_scale_;
    const Vector px = inv_c * Dinv_.cwiseProduct(px_s);
    const Vector aty = inv_c * Dinv_.cwiseProduct(aty_s);
    const Vector q = inv_c * Dinv_.cwiseProduct(qs_);
    r.dual = detail::inf_norm(px + q + aty);

    r.eps_primal = settings_.eps_abs +
                   settings_.eps_rel * std::max(detail::inf_norm(ax), detail::inf_norm(z));
    r.eps_dual = settings_.eps_abs +
                 settings_.eps_rel * std::max({detail::inf_norm(px), detail::inf_norm(aty),
                                               detail::inf_norm(q)});

    r.prim_scaled = detail::inf_norm(ax_s - zs_);
    r.dual_scaled = detail::inf_norm(px_s + qs_ + aty_s);
    r.prim_norm_scaled = std::max(detail::inf_norm(ax_s), detail::inf_norm(zs_));
    r.dual_norm_scaled = std::max({detail::inf_norm(px_s), detail::inf_norm(aty_s),
                                   detail::inf_norm(qs_)});
    return r;
  }

  void fill_solution(QpSolution& s, const Residuals& r) const {
    s.x = D_.cwiseProduct(xs_);
    s.y = (1.0 / cost_scale_) * E_.cwiseProduct(ys_);
    s.objective = qp_.objective(s.x);
    s.primal_residual = r.primal;
    s.dual_residual = r.dual;
  }

  bool is_primal_infeasible(const Vector& delta_y_scaled) const {
    const Vector dy = E_.cwiseProduct(delta_y_scaled);
    const double norm_dy = detail::inf_norm(dy);
    if (norm_dy <= 1e-30) return false;
    const Vector atdy = Dinv_.cwiseProduct(Ast_ * delta_y_scaled);
    if (detail::inf_norm(atdy) > settings_.eps_prim_inf * norm_dy) return false;
    double support = 0.0;
    for (Eigen::Index i = 0; i < dy.size(); ++i) {
      if (dy[i] > 0.0) {
        if (qp_.u[i] >= 1e20) {
          if (dy[i] > settings_.eps_prim_inf * norm_dy) return false;
        } else {
          support += qp_.u[i] * dy[i];
        }
      } else if (dy[i] < 0.0) {
        if (qp_.l[i] <= -1e20) {
          if (-dy[i] > settings_.eps_prim_inf * norm_dy) return false;
        } else {
          support += qp_.l[i] * dy[i];
        }
      }
    }
    return support < -settings_.eps_prim_inf * norm_dy;
  }

  void maybe_update_rho(const Residuals& r) {
    const double prim = r.prim_scaled / std::max(r.prim_norm_scaled, 1e-30);
    const double dual = r.dual_scaled / std::max(r.dual_norm_scaled, 1e-30);
    if (prim <= 0.0 || dual <= 0.0) return;
    const double candidate = std::clamp(rho_ * std::sqrt(prim / dual), 1e-6, 1e6);
    if (candidate > rho_ * settings_.adaptive_rho_tolerance ||
        candidate < rho_ / settings_.adaptive_rho_tolerance) {
      // y/rho enters the z update, so the dual iterate stays valid across rho changes.
      set_rho_vector(candidate);
      factor_ = factorize();
    }
  }

  SparseQp qp_;
  QpSettings settings_;

  SparseMatrix Ps_, As_, Ast_;
  Vector qs_, ls_, us_;
  Vector D_, E_, Dinv_, Einv_;
  double cost_scale_ = 1.0;

  double rho_ = 0.1;
  double rho_base_ = 0.1;
  Vector rho_vec_;
  std::shared_ptr<Factor> base_factor_;
  std::shared_ptr<Factor> factor_;

  Vector xs_, zs_, ys_;
  bool has_warm_start_ = false;
};

}  // namespace cvxctg
