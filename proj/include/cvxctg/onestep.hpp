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
#include "cvxctg/convex_fit.hpp"
#include "cvxctg/icnn.hpp"
#include "cvxctg/model.hpp"
#include "cvxctg/mpc.hpp"
#include "cvxctg/qp.hpp"
#include "cvxctg/riccati.hpp"

#include <memory>
#include <variant>

namespace cvxctg {

/// Affine map between raw targets y and normalized targets (y - offset) / scale.
struct Normalization {
  double scale = 1.0;
  double offset = 0.0;

  [[nodiscard]] double normalize(double y) const { return (y - offset) / scale; }
  [[nodiscard]] double denormalize(double y) const { return scale * y + offset; }

  void validate() const {
    if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(offset)) {
      throw ParameterError("normalization scale must be positive and finite");
    }
  }

  /// Maps [min, max] of the given values onto [0, 1]; a constant sample
  /// keeps unit scale.
  static Normalization from_range(const Vector& y) {
    if (y.size() == 0) throw ParameterError("cannot normalize an empty sample");
    const double lo = y.minCoeff();
    const double hi = y.maxCoeff();
    return {hi > lo ? hi - lo : 1.0, lo};
  }
};

struct IcnnNet {
  IcnnArch arch;
  IcnnParams params;
};

enum class SurrogateKind { pwa, icnn };

inline std::string to_string(SurrogateKind k) { return k == SurrogateKind::pwa ? "pwa" : "icnn"; }

using SurrogateFunction = std::variant<InterpolantSet, IcnnNet>;

inline double eval_function(const SurrogateFunction& f, const Vector& x) {
  if (const auto* pwa = std::get_if<InterpolantSet>(&f)) return eval_pwa(*pwa, x);
  const auto& net = std::get<IcnnNet>(f);
  return icnn_forward(net.params, net.arch, x);
}

/// Packaged cost-to-go: V(x) ~ scale_V max(f_V(x), 0) + offset_V + x'P x and
/// F(x) ~ scale_F max(f_F(x), 0) + offset_F, combined as V + mu F.
struct SurrogateModel {
  SurrogateFunction value;
  SurrogateFunction feasibility;
  Normalization value_norm;
  Normalization feasibility_norm;
  QuadraticForm P_lqr;
  double mu = 1e5;

  [[nodiscard]] SurrogateKind kind() const {
    return std::holds_alternative<InterpolantSet>(value) ? SurrogateKind::pwa
                                                         : SurrogateKind::icnn;
  }

  [[nodiscard]] Eigen::Index dim() const { return P_lqr.dim(); }

  void validate() const {
    if (value.index() != feasibility.index()) {
      throw ParameterError("value and feasibility surrogates must be of the same kind");
    }
    value_norm.validate();
    feasibility_norm.validate();
    if (!(mu > 0.0)) throw ParameterError("surrogate penalty weight must be positive");
    for (const SurrogateFunction* f : {&value, &feasibility}) {
      if (const auto* pwa = std::get_if<InterpolantSet>(f)) {
        pwa->validate();
        detail::require_dims(pwa->dim() == dim(), "interpolant dimension");
      } else {
        const auto& net = std::get<IcnnNet>(*f);
        net.arch.validate();
        net.params.check(net.arch);
        detail::require_dims(net.arch.input_dim == dim(), "ICNN input dimension");
      }
    }
  }
};

struct SurrogateValue {
  double value;        // V-hat, including the quadratic term
  double feasibility;  // F-hat
  double total;        // V-hat + mu F-hat
};

inline SurrogateValue eval_surrogate(const SurrogateModel& s, const Vector& x) {
  detail::require_dims(x.size() == s.dim(), "surrogate query");
  SurrogateValue out{};
  out.value = s.value_norm.denormalize(std::max(eval_function(s.value, x), 0.0)) +
              quadratic_value(s.P_lqr, x);
  out.feasibility = s.feasibility_norm.denormalize(std::max(eval_function(s.feasibility, x), 0.0));
  out.total = out.value + s.mu * out.feasibility;
  return out;
}

struct OneStepProblem {
  UncertaintySet scenarios;  // first-stage realizations and weights
  Matrix Q, R;
  BoundSpec bounds;
  SurrogateModel surrogate;
  bool soft_first_state = true;  // x_1 box penalized with mu, like the full soft problem

  OneStepProblem(UncertaintySet s, Matrix q, Matrix r, BoundSpec b, SurrogateModel sur,
                 bool soft = true)
      : scenarios(std::move(s)), Q(std::move(q)), R(std::move(r)), bounds(std::move(b)),
        surrogate(std::move(sur)), soft_first_state(soft) {
    CostSpec check(Q, R, Q);
    surrogate.validate();
    detail::require_dims(surrogate.dim() == scenarios.nx() && Q.rows() == scenarios.nx() &&
                             R.rows() == scenarios.nu() &&
                             bounds.x_lower.size() == scenarios.nx() &&
                             bounds.u_lower.size() == scenarios.nu(),
                         "one-step problem dimensions");
  }

  [[nodiscard]] Eigen::Index nx() const { return scenarios.nx(); }
  [[nodiscard]] Eigen::Index nu() const { return scenarios.nu(); }
  [[nodiscard]] std::size_t num_scenarios() const { return scenarios.size(); }
};

/// Decision vector: u_0 | x_{1,s} | slacks | aggregate | per scenario the
/// value block then the feasibility block. A PWA block is one epigraph
/// scalar; an ICNN block has one scalar per hidden neuron plus the output.
class OneStepLayout {
 public:
  explicit OneStepLayout(const OneStepProblem& p) {
    const auto S = static_cast<Eigen::Index>(p.num_scenarios());
    const auto nx = p.nx();
    input_ = 0;
    states_ = p.nu();
    slacks_ = states_ + S * nx;
    num_slacks_ = p.soft_first_state ? S * 2 * nx : 0;
    aggregate_ = slacks_ + num_slacks_;
    block_ = block_size(p.surrogate.value);
    blocks_ = aggregate_ + 1;
    num_variables_ = blocks_ + S * 2 * block_;
  }

  static Eigen::Index block_size(const SurrogateFunction& f) {
    if (std::holds_alternative<InterpolantSet>(f)) return 1;
    const auto& arch = std::get<IcnnNet>(f).arch;
    Eigen::Index n = 1;
    for (const auto w : arch.hidden) n += w;
    return n;
  }

  [[nodiscard]] Eigen::Index input() const { return input_; }
  [[nodiscard]] Eigen::Index state(std::size_t s, Eigen::Index nx) const {
    return states_ + static_cast<Eigen::Index>(s) * nx;
  }
  // eta_upper then eta_lower, n_x each
  [[nodiscard]] Eigen::Index slack(std::size_t s, Eigen::Index nx) const {
    return slacks_ + static_cast<Eigen::Index>(s) * 2 * nx;
  }
  [[nodiscard]] Eigen::Index aggregate() const { return aggregate_; }
  [[nodiscard]] Eigen::Index value_block(std::size_t s) const {
    return blocks_ + static_cast<Eigen::Index>(s) * 2 * block_;
  }
  [[nodiscard]] Eigen::Index feasibility_block(std::size_t s) const {
    return value_block(s) + block_;
  }
  [[nodiscard]] Eigen::Index block_size() const { return block_; }
  [[nodiscard]] Eigen::Index num_slacks() const { return num_slacks_; }
  [[nodiscard]] Eigen::Index num_epigraph_scalars() const {
    return num_variables_ - blocks_;
  }
  // Epigraph scalars plus the aggregate.
  [[nodiscard]] Eigen::Index num_surrogate_scalars() const { return num_epigraph_scalars() + 1; }
  [[nodiscard]] Eigen::Index num_variables() const { return num_variables_; }

 private:
  Eigen::Index input_ = 0, states_ = 0, slacks_ = 0, num_slacks_ = 0, aggregate_ = 0;
  Eigen::Index blocks_ = 0, block_ = 0, num_variables_ = 0;
};

struct OneStepSolution {
  Vector u0;
  double value = 0.0;            // l_0 + sum_s w_s (V-hat + mu F-hat), plus x_1 penalties
  std::vector<Vector> x1;        // per scenario
  Vector value_epigraph;         // normalized value epigraph scalar per scenario
  Vector feasibility_epigraph;   // normalized feasibility epigraph scalar per scenario
  std::vector<SurrogateValue> surrogate;  // direct evaluation at each x_1
  double slack_total = 0.0;      // probability-weighted x_1 box slack
  double tightness = 0.0;        // largest epigraph gap over all epigraph scalars
  double solver_tightness = 0.0; // the same gap before tightening
  QpSolution qp;

  [[nodiscard]] bool solved() const { return qp.solved(); }
};

inline QpSettings default_onestep_settings() {
  QpSettings s;
  s.method = QpMethod::interior_point;
  s.eps_rel = 1e-10;
  // Tightening after the solve already makes the epigraphs exact; polish
  // is opt-in and uses hints from the surrogate pieces.
  s.polish = false;
  return s;
}

class OneStepController {
 public:
  // Hidden ICNN units receive this objective weight (times the scenario
  // weight) so they stay tight even where the output unit is clamped.
  static constexpr double kHiddenPressure = 1e-6;

  // Pieces within this distance of the max at x_1 are treated as active
  // when polishing.
  static constexpr double kActiveTolerance = 1e-7;

  explicit OneStepController(OneStepProblem problem,
                             QpSettings settings = default_onestep_settings())
      : problem_(std::move(problem)), layout_(problem_), settings_(settings) {
    // The solver's own polish cannot see which epigraph pieces are active.
    polish_ = settings_.polish;
    settings_.polish = false;
    build();
  }
  // The solver's hint callback refers back to this controller.
  OneStepController(const OneStepController&) = delete;
  OneStepController& operator=(const OneStepController&) = delete;

  [[nodiscard]] const OneStepProblem& problem() const { return problem_; }
  [[nodiscard]] const OneStepLayout& layout() const { return layout_; }

  [[nodiscard]] SparseQp assemble(const Vector& x_hat) const {
    check_state(x_hat);
    SparseQp qp = base_;
    fill_bounds(x_hat, qp.l, qp.u);
    return qp;
  }

  /// Smallest eigenvalue of the Hessian restricted to (u_0, x_1).
  [[nodiscard]] double core_min_eigenvalue() const {
    const Eigen::Index k = layout_.slack(0, problem_.nx());
    return detail::min_eigenvalue(Matrix(base_.P).topLeftCorner(k, k));
  }

  OneStepSolution solve(const Vector& x_hat) {
    check_state(x_hat);
    if (!solver_) {
      solver_ = std::make_unique<QpSolver>(base_, settings_);
      if (polish_) solver_->set_polish_hints([this](const Vector& x) { return active_hints(x); });
    }
    Vector l = base_.l, u = base_.u;
    fill_bounds(x_hat, l, u);
    solver_->update_bounds(l, u);
    return extract(x_hat, solver_->solve());
  }

 private:
  void check_state(const Vector& x_hat) const {
    detail::require_dims(x_hat.size() == problem_.nx(), "initial state");
    if (!x_hat.allFinite()) throw ParameterError("initial state is not finite");
  }

  // Rows for z >= act(a) with a = W^z z_prev + W^x x + b, for one network.
  // Marks the epigraph pieces that attain the max at the current x_1; all
  // other rows are left to the solver.
  [[nodiscard]] std::vector<RowHint> active_hints(const Vector& x) const {
    std::vector<RowHint> hints(static_cast<std::size_t>(base_.A.rows()), RowHint::automatic);
    const auto nx = problem_.nx();
    auto mark = [&hints](Eigen::Index row, bool on) {
      hints[static_cast<std::size_t>(row)] = on ? RowHint::lower : RowHint::inactive;
    };
    for (const auto& e : epigraph_rows_) {
      const Vector x1 = x.segment(layout_.state(e.scenario, nx), nx);
      const SurrogateFunction& f =
          e.feasibility ? problem_.surrogate.feasibility : problem_.surrogate.value;
      Eigen::Index row = e.first_row;
      if (const auto* pwa = std::get_if<InterpolantSet>(&f)) {
        const Vector planes = pwa->intercepts() + pwa->gradients * x1;
        const double top = std::max(planes.maxCoeff(), 0.0);
        for (Eigen::Index i = 0; i < planes.size(); ++i) {
          mark(row++, planes[i] >= top - kActiveTolerance);
        }
        mark(row, top <= kActiveTolerance);
        continue;
      }
      const auto& net = std::get<IcnnNet>(f);
      const IcnnTrace tr = icnn_trace(net.params, net.arch, x1);
      for (std::size_t i = 0; i < tr.pre.size(); ++i) {
        const bool identity = net.arch.activation(i).kind == Activation::Kind::identity;
        for (const double a : tr.pre[i]) {
          if (identity) {
            mark(row++, true);
            continue;
          }
          mark(row++, a >= -kActiveTolerance);
          mark(row++, a <= kActiveTolerance);
        }
      }
    }
    return hints;
  }

  void add_icnn_rows(const IcnnNet& net, Eigen::Index block, Eigen::Index x_col,
                     std::vector<Triplet>& t, std::vector<double>& lo, Eigen::Index& row) {
    const auto& arch = net.arch;
    Eigen::Index prev = -1;
    Eigen::Index offset = block;
    for (std::size_t i = 0; i < net.params.layers.size(); ++i) {
      const auto& layer = net.params.layers[i];
      const Matrix Wz = layer.Wz();
      const Activation& act = arch.activation(i);
      // Identity units need only z >= a; the second row is then redundant.
      const std::vector<double> slopes =
          act.kind == Activation::Kind::identity ? std::vector<double>{1.0}
                                                 : std::vector<double>{1.0, act.slope};
      for (Eigen::Index h = 0; h < arch.width(i); ++h) {
        for (const double alpha : slopes) {
          // z_h - alpha (W^z z_prev + W^x x) >= alpha b
          t.emplace_back(static_cast<int>(row), static_cast<int>(offset + h), 1.0);
          if (alpha != 0.0) {
            for (Eigen::Index d = 0; d < layer.Wx.cols(); ++d) {
              if (layer.Wx(h, d) != 0.0) {
                t.emplace_back(static_cast<int>(row), static_cast<int>(x_col + d),
                               -alpha * layer.Wx(h, d));
              }
            }
            for (Eigen::Index k = 0; k < Wz.cols(); ++k) {
              if (Wz(h, k) != 0.0) {
                t.emplace_back(static_cast<int>(row), static_cast<int>(prev + k),
                               -alpha * Wz(h, k));
              }
            }
          }
          lo.push_back(alpha * layer.b[h]);
          ++row;
        }
      }
      prev = offset;
      offset += arch.width(i);
    }
  }

  void build() {
    const auto& p = problem_;
    const auto& sur = p.surrogate;
    const auto nx = p.nx();
    const auto nu = p.nu();
    const auto n = layout_.num_variables();
    const std::size_t S = p.num_scenarios();

    std::vector<Triplet> hess;
    Vector q = Vector::Zero(n);
    detail::add_block(hess, layout_.input(), layout_.input(), p.R, 2.0);
    for (std::size_t s = 0; s < S; ++s) {
      detail::add_block(hess, layout_.state(s, nx), layout_.state(s, nx), sur.P_lqr.matrix(),
                        2.0 * p.scenarios.weights()[s]);
      if (p.soft_first_state) {
        q.segment(layout_.slack(s, nx), 2 * nx).setConstant(sur.mu * p.scenarios.weights()[s]);
      }
      if (sur.kind() == SurrogateKind::icnn) {
        const Eigen::Index hidden = layout_.block_size() - 1;
        for (const Eigen::Index b : {layout_.value_block(s), layout_.feasibility_block(s)}) {
          q.segment(b, hidden).setConstant(kHiddenPressure * p.scenarios.weights()[s]);
        }
      }
    }
    q[layout_.aggregate()] = 1.0;

    std::vector<Triplet> t;
    std::vector<double> lo, hi;
    Eigen::Index row = 0;
    auto push = [&](double l, double u) {
      lo.push_back(l);
      hi.push_back(u);
      ++row;
    };
    // Dynamics: x_{1,s} - B_s u_0 = A_s x_hat + d_s.
    dynamics_row_ = row;
    for (std::size_t s = 0; s < S; ++s) {
      const auto& r = p.scenarios[s];
      detail::add_identity(t, row, layout_.state(s, nx), nx);
      detail::add_block(t, row, layout_.input(), r.B, -1.0);
      for (Eigen::Index i = 0; i < nx; ++i) push(0.0, 0.0);
    }
    detail::add_identity(t, row, layout_.input(), nu);
    for (Eigen::Index i = 0; i < nu; ++i) push(p.bounds.u_lower[i], p.bounds.u_upper[i]);
    for (std::size_t s = 0; s < S; ++s) {
      const Eigen::Index xs = layout_.state(s, nx);
      if (p.soft_first_state) {
        const Eigen::Index es = layout_.slack(s, nx);
        detail::add_identity(t, row, xs, nx);
        detail::add_identity(t, row, es, nx, -1.0);
        for (Eigen::Index i = 0; i < nx; ++i) push(-kInfinity, p.bounds.x_upper[i]);
        detail::add_identity(t, row, xs, nx);
        detail::add_identity(t, row, es + nx, nx, 1.0);
        for (Eigen::Index i = 0; i < nx; ++i) push(p.bounds.x_lower[i], kInfinity);
        detail::add_identity(t, row, es, 2 * nx);
        for (Eigen::Index i = 0; i < 2 * nx; ++i) push(0.0, kInfinity);
      } else {
        detail::add_identity(t, row, xs, nx);
        for (Eigen::Index i = 0; i < nx; ++i) push(p.bounds.x_lower[i], p.bounds.x_upper[i]);
      }
    }
    // Aggregate: a - sum_s w_s (scale_V t_V,s + mu scale_F t_F,s) = 0.
    t.emplace_back(static_cast<int>(row), static_cast<int>(layout_.aggregate()), 1.0);
    const Eigen::Index out = layout_.block_size() - 1;
    for (std::size_t s = 0; s < S; ++s) {
      const double w = p.scenarios.weights()[s];
      t.emplace_back(static_cast<int>(row), static_cast<int>(layout_.value_block(s) + out),
                     -w * sur.value_norm.scale);
      t.emplace_back(static_cast<int>(row),
                     static_cast<int>(layout_.feasibility_block(s) + out),
                     -w * sur.mu * sur.feasibility_norm.scale);
    }
    push(0.0, 0.0);

    // Surrogate epigraphs.
    for (std::size_t s = 0; s < S; ++s) {
      const Eigen::Index xs = layout_.state(s, nx);
      for (const auto& [f, block] :
           {std::pair{&sur.value, layout_.value_block(s)},
            std::pair{&sur.feasibility, layout_.feasibility_block(s)}}) {
        epigraph_rows_.push_back({s, f == &sur.feasibility, row});
        if (const auto* pwa = std::get_if<InterpolantSet>(f)) {
          const Vector c = pwa->intercepts();
          for (Eigen::Index i = 0; i < pwa->size(); ++i) {
            // t - g_i'x >= y_i - g_i'x_i
            t.emplace_back(static_cast<int>(row), static_cast<int>(block), 1.0);
            for (Eigen::Index d = 0; d < nx; ++d) {
              if (pwa->gradients(i, d) != 0.0) {
                t.emplace_back(static_cast<int>(row), static_cast<int>(xs + d),
                               -pwa->gradients(i, d));
              }
            }
            push(c[i], kInfinity);
          }
          t.emplace_back(static_cast<int>(row), static_cast<int>(block), 1.0);
          push(0.0, kInfinity);
        } else {
          add_icnn_rows(std::get<IcnnNet>(*f), block, xs, t, lo, row);
          hi.resize(lo.size(), kInfinity);
        }
      }
    }

    base_.P = SparseMatrix(n, n);
    base_.P.setFromTriplets(hess.begin(), hess.end());
    base_.P.makeCompressed();
    base_.q = q;
    base_.A = SparseMatrix(row, n);
    base_.A.setFromTriplets(t.begin(), t.end());
    base_.A.makeCompressed();
    base_.l = Eigen::Map<const Vector>(lo.data(), static_cast<Eigen::Index>(lo.size()));
    base_.u = Eigen::Map<const Vector>(hi.data(), static_cast<Eigen::Index>(hi.size()));
    fill_bounds(Vector::Zero(nx), base_.l, base_.u);
  }

  void fill_bounds(const Vector& x_hat, Vector& l, Vector& u) const {
    const auto nx = problem_.nx();
    for (std::size_t s = 0; s < problem_.num_scenarios(); ++s) {
      const auto& r = problem_.scenarios[s];
      const Vector rhs = r.A * x_hat + r.d;
      const Eigen::Index row = dynamics_row_ + static_cast<Eigen::Index>(s) * nx;
      l.segment(row, nx) = rhs;
      u.segment(row, nx) = rhs;
    }
  }

  // Epigraph scalars of one block evaluated exactly at x: the hidden
  // activations then the output, or max(planes, 0) for a PWA block.
  static Vector tight_block(const SurrogateFunction& f, const Vector& x) {
    if (const auto* pwa = std::get_if<InterpolantSet>(&f)) {
      return Vector::Constant(1, std::max(eval_pwa(*pwa, x), 0.0));
    }
    const auto& net = std::get<IcnnNet>(f);
    const IcnnTrace tr = icnn_trace(net.params, net.arch, x);
    Eigen::Index n = 0;
    for (const auto& layer : tr.post) n += layer.size();
    Vector z(n);
    Eigen::Index k = 0;
    for (const auto& layer : tr.post) {
      z.segment(k, layer.size()) = layer;
      k += layer.size();
    }
    return z;
  }

  OneStepSolution extract(const Vector& x_hat, QpSolution qp) const {
    const auto& p = problem_;
    const auto nx = p.nx();
    const std::size_t S = p.num_scenarios();
    const Eigen::Index out = layout_.block_size() - 1;
    OneStepSolution r;
    r.u0 = qp.x.segment(layout_.input(), p.nu());
    r.value_epigraph.resize(static_cast<Eigen::Index>(S));
    r.feasibility_epigraph.resize(static_cast<Eigen::Index>(S));
    const auto& sur = p.surrogate;
    // Lowering an epigraph scalar to its exact value keeps every row
    // satisfied (the network is monotone in earlier layers) and never raises
    // the objective, so a solved point is replaced by its tight version.
    const bool tighten = qp.solved();
    double aggregate = 0.0, pressure = 0.0;
    for (std::size_t s = 0; s < S; ++s) {
      const auto idx = static_cast<Eigen::Index>(s);
      const double w = p.scenarios.weights()[s];
      r.x1.push_back(qp.x.segment(layout_.state(s, nx), nx));
      for (const auto& [f, b] : {std::pair{&sur.value, layout_.value_block(s)},
                                 std::pair{&sur.feasibility, layout_.feasibility_block(s)}}) {
        const Vector exact = tight_block(*f, r.x1.back());
        auto z = qp.x.segment(b, layout_.block_size());
        r.solver_tightness = std::max(r.solver_tightness, (z - exact).cwiseAbs().maxCoeff());
        if (tighten) z = exact;
      }
      const Vector zv = qp.x.segment(layout_.value_block(s), layout_.block_size());
      const Vector zf = qp.x.segment(layout_.feasibility_block(s), layout_.block_size());
      r.value_epigraph[idx] = zv[out];
      r.feasibility_epigraph[idx] = zf[out];
      r.surrogate.push_back(eval_surrogate(sur, r.x1.back()));
      r.tightness = std::max({r.tightness, (zv - tight_block(sur.value, r.x1.back())).cwiseAbs().maxCoeff(),
                              (zf - tight_block(sur.feasibility, r.x1.back())).cwiseAbs().maxCoeff()});
      aggregate += w * (sur.value_norm.scale * zv[out] +
                        sur.mu * sur.feasibility_norm.scale * zf[out]);
      if (p.soft_first_state) {
        r.slack_total += w * qp.x.segment(layout_.slack(s, nx), 2 * nx).sum();
      }
      if (sur.kind() == SurrogateKind::icnn) {
        pressure += kHiddenPressure * w * (zv.head(out).sum() + zf.head(out).sum());
      }
    }
    if (tighten) {
      qp.x[layout_.aggregate()] = aggregate;
      qp.objective = 0.5 * qp.x.dot(base_.P * qp.x) + base_.q.dot(qp.x);
    }
    // Report the modelled value: drop the hidden-unit pressure, add back the
    // constant stage cost and normalization offsets.
    r.value = qp.objective - pressure + x_hat.dot(p.Q * x_hat) + sur.value_norm.offset +
              sur.mu * sur.feasibility_norm.offset;
    r.qp = std::move(qp);
    return r;
  }

  OneStepProblem problem_;
  OneStepLayout layout_;
  QpSettings settings_;
  SparseQp base_;
  struct EpigraphRows {
    std::size_t scenario;
    bool feasibility;
    Eigen::Index first_row;
  };

  Eigen::Index dynamics_row_ = 0;
  std::vector<EpigraphRows> epigraph_rows_;
  bool polish_ = false;
  std::unique_ptr<QpSolver> solver_;
};

inline SparseQp assemble_onestep(const OneStepProblem& problem, const Vector& x_hat) {
  return OneStepController(problem).assemble(x_hat);
}

inline OneStepSolution solve_onestep(const OneStepProblem& problem, const Vector& x_hat,
                                     const QpSettings& settings = default_onestep_settings()) {
  OneStepController c(problem, settings);
  return c.solve(x_hat);
}

}  // namespace cvxctg
