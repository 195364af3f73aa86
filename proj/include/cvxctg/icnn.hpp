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
#include "cvxctg/lbfgs.hpp"

#include <random>
#include <vector>

namespace cvxctg {

/// Convex, non-decreasing activations. Leaky slope 0 is the plain rectifier.
struct Activation {
  enum class Kind { leaky_relu, relu, identity };
  Kind kind = Kind::relu;
  double slope = 0.0;

  static Activation leaky(double s = 0.01) { return {Kind::leaky_relu, s}; }
  static Activation rectifier() { return {Kind::relu, 0.0}; }
  static Activation linear() { return {Kind::identity, 1.0}; }

  [[nodiscard]] double operator()(double a) const {
    switch (kind) {
      case Kind::leaky_relu: return a >= 0.0 ? a : slope * a;
      case Kind::relu: return a > 0.0 ? a : 0.0;
      case Kind::identity: return a;
    }
    return a;
  }

  // One-sided derivative; the kink takes the right slope for leaky units
  // and zero for the rectifier.
  [[nodiscard]] double derivative(double a) const {
    switch (kind) {
      case Kind::leaky_relu: return a >= 0.0 ? 1.0 : slope;
      case Kind::relu: return a > 0.0 ? 1.0 : 0.0;
      case Kind::identity: return 1.0;
    }
    return 1.0;
  }
};

inline std::string to_string(Activation::Kind k) {
  switch (k) {
    case Activation::Kind::leaky_relu: return "leaky_relu";
    case Activation::Kind::relu: return "relu";
    case Activation::Kind::identity: return "identity";
  }
  return "unknown";
}

struct IcnnArch {
  Eigen::Index input_dim = 2;
  std::vector<Eigen::Index> hidden = {20};
  Activation hidden_activation = Activation::leaky(0.01);
  Activation output_activation = Activation::rectifier();

  void validate() const {
    if (input_dim < 1) throw ParameterError("ICNN input dimension must be positive");
    for (const auto w : hidden) {
      if (w < 1) throw ParameterError("ICNN hidden widths must be positive");
    }
    for (const Activation* a : {&hidden_activation, &output_activation}) {
      if (a->kind == Activation::Kind::leaky_relu && !(a->slope >= 0.0 && a->slope <= 1.0)) {
        throw ParameterError("leaky slope must lie in [0, 1] for a convex non-decreasing unit");
      }
    }
  }

  [[nodiscard]] std::size_t num_layers() const { return hidden.size() + 1; }
  [[nodiscard]] Eigen::Index width(std::size_t layer) const {
    return layer < hidden.size() ? hidden[layer] : 1;
  }
  [[nodiscard]] const Activation& activation(std::size_t layer) const {
    return layer < hidden.size() ? hidden_activation : output_activation;
  }
};

/// Layer i computes z_{i+1} = act(W^z_i z_i + W^x_i x + b_i) with
/// W^z_i = raw_z_i squared elementwise; layer 0 has no W^z.
struct IcnnLayer {
  Matrix Wx;
  Vector b;
  Matrix raw_z;  // empty for layer 0

  [[nodiscard]] Matrix Wz() const { return raw_z.array().square().matrix(); }
};

struct IcnnParams {
  std::vector<IcnnLayer> layers;

  [[nodiscard]] Eigen::Index num_parameters() const {
    Eigen::Index n = 0;
    for (const auto& l : layers) n += l.Wx.size() + l.b.size() + l.raw_z.size();
    return n;
  }

  [[nodiscard]] Vector flatten() const {
    Vector v(num_parameters());
    Eigen::Index k = 0;
    for (const auto& l : layers) {
      for (const Matrix* m : {&l.Wx, &l.raw_z}) {
        v.segment(k, m->size()) = m->reshaped();
        k += m->size();
      }
      v.segment(k, l.b.size()) = l.b;
      k += l.b.size();
    }
    return v;
  }

  void unflatten(const Vector& v) {
    detail::require_dims(v.size() == num_parameters(), "parameter vector size");
    Eigen::Index k = 0;
    for (auto& l : layers) {
      for (Matrix* m : {&l.Wx, &l.raw_z}) {
        m->reshaped() = v.segment(k, m->size());
        k += m->size();
      }
      l.b = v.segment(k, l.b.size());
      k += l.b.size();
    }
  }

  static IcnnParams zeros(const IcnnArch& arch) {
    arch.validate();
    IcnnParams p;
    for (std::size_t i = 0; i < arch.num_layers(); ++i) {
      IcnnLayer l;
      l.Wx = Matrix::Zero(arch.width(i), arch.input_dim);
      l.b = Vector::Zero(arch.width(i));
      l.raw_z = i == 0 ? Matrix(arch.width(i), 0) : Matrix::Zero(arch.width(i), arch.width(i - 1));
      p.layers.push_back(std::move(l));
    }
    return p;
  }

  // W^x, b ~ U[-0.5, 0.5]/sqrt(fan_in), raw_z ~ U[0, 1]/sqrt(fan_in), where
  // fan_in counts the inputs feeding the layer.
  template <class Rng>
  static IcnnParams random(const IcnnArch& arch, Rng& rng) {
    IcnnParams p = zeros(arch);
    std::uniform_real_distribution<double> sym(-0.5, 0.5), pos(0.0, 1.0);
    for (auto& l : p.layers) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(l.Wx.cols() + l.raw_z.cols()));
      for (Eigen::Index i = 0; i < l.Wx.size(); ++i) l.Wx.data()[i] = scale * sym(rng);
      for (Eigen::Index i = 0; i < l.b.size(); ++i) l.b[i] = scale * sym(rng);
      for (Eigen::Index i = 0; i < l.raw_z.size(); ++i) l.raw_z.data()[i] = scale * pos(rng);
    }
    return p;
  }

  void check(const IcnnArch& arch) const {
    detail::require_dims(layers.size() == arch.num_layers(), "ICNN layer count");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      const Eigen::Index prev = i == 0 ? 0 : arch.width(i - 1);
      detail::require_dims(l.Wx.rows() == arch.width(i) && l.Wx.cols() == arch.input_dim &&
                               l.b.size() == arch.width(i) && l.raw_z.rows() == arch.width(i) &&
                               l.raw_z.cols() == prev,
                           "ICNN layer shapes");
    }
  }
};

/// Pre-activations and outputs of every layer for one input.
struct IcnnTrace {
  std::vector<Vector> pre;
  std::vector<Vector> post;
};

inline IcnnTrace icnn_trace(const IcnnParams& params, const IcnnArch& arch, const Vector& x) {
  detail::require_dims(x.size() == arch.input_dim, "ICNN input");
  IcnnTrace t;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& l = params.layers[i];
    Vector a = l.Wx * x + l.b;
    if (i > 0) a.noalias() += l.Wz() * t.post.back();
    Vector z = a.unaryExpr([&](double v) { return arch.activation(i)(v); });
    t.pre.push_back(std::move(a));
    t.post.push_back(std::move(z));
  }
  return t;
}

inline double icnn_forward(const IcnnParams& params, const IcnnArch& arch, const Vector& x) {
  return icnn_trace(params, arch, x).post.back()[0];
}

/// Mean squared error over the rows of X and its gradient with respect to
/// the flattened raw parameters.
inline double icnn_loss(const IcnnParams& params, const IcnnArch& arch, const Matrix& X,
                        const Vector& y, Vector* grad = nullptr) {
  detail::require_dims(X.rows() == y.size() && X.cols() == arch.input_dim, "ICNN batch");
  if (X.rows() == 0) throw ParameterError("empty ICNN batch");
  const auto batch = static_cast<double>(X.rows());
  const std::size_t L = params.layers.size();
  // Activations are stored one sample per row.
  std::vector<Matrix> pre(L), post(L);
  std::vector<Matrix> wz(L);
  for (std::size_t i = 0; i < L; ++i) {
    const auto& l = params.layers[i];
    pre[i] = X * l.Wx.transpose();
    pre[i].rowwise() += l.b.transpose();
    if (i > 0) {
      wz[i] = l.Wz();
      pre[i].noalias() += post[i - 1] * wz[i].transpose();
    }
    post[i] = pre[i].unaryExpr([&](double v) { return arch.activation(i)(v); });
  }
  const Vector residual = post[L - 1].col(0) - y;
  const double loss = residual.squaredNorm() / batch;
  if (grad == nullptr) return loss;

  IcnnParams g = IcnnParams::zeros(arch);
  Matrix delta = (2.0 / batch) * residual;
  for (std::size_t i = L; i-- > 0;) {
    const auto& l = params.layers[i];
    delta.array() *=
        pre[i].unaryExpr([&](double v) { return arch.activation(i).derivative(v); }).array();
    g.layers[i].Wx = delta.transpose() * X;
    g.layers[i].b = delta.colwise().sum().transpose();
    if (i > 0) {
      const Matrix dWz = delta.transpose() * post[i - 1];
      g.layers[i].raw_z = 2.0 * l.raw_z.cwiseProduct(dWz);
      delta = delta * wz[i];
    }
  }
  *grad = g.flatten();
  return loss;
}

struct IcnnTrainSettings {
  int restarts = 5;
  std::uint64_t seed = 0;
  LbfgsSettings lbfgs{};
};

struct TrainReport {
  double train_mse = 0.0;
  double test_mse = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
  int restart = 0;
  bool line_search_failed = false;
};

struct TrainResult {
  IcnnParams params;
  TrainReport report;
  std::vector<TrainReport> restarts;  // one entry per restart, diverged ones included
};

/// Restarts run in order with seeds derived from (seed, restart); the
/// restart with the lowest test error wins, ties going to the lower index.
inline TrainResult train_icnn(const FitDataset& train, const FitDataset& test,
                              const IcnnArch& arch, const IcnnTrainSettings& settings = {}) {
  arch.validate();
  detail::require_dims(train.dim() == arch.input_dim && test.dim() == arch.input_dim,
                       "training data dimension");
  if (settings.restarts < 1) throw ParameterError("at least one restart is needed");
  TrainResult best;
  bool have_best = false;
  for (int k = 0; k < settings.restarts; ++k) {
    std::seed_seq seq{static_cast<std::uint32_t>(settings.seed & 0xffffffffu),
                      static_cast<std::uint32_t>(settings.seed >> 32),
                      static_cast<std::uint32_t>(k)};
    std::mt19937_64 rng(seq);
    IcnnParams p = IcnnParams::random(arch, rng);
    IcnnParams work = p;
    const Objective fg = [&](const Vector& theta, Vector& g) {
      work.unflatten(theta);
      return icnn_loss(work, arch, train.points(), train.targets(), &g);
    };
    TrainReport rep;
    rep.restart = k;
    LbfgsResult lr;
    try {
      lr = lbfgs_minimize(fg, p.flatten(), settings.lbfgs);
    } catch (const ParameterError&) {
      rep.train_mse = rep.test_mse = kInfinity;
      best.restarts.push_back(rep);
      continue;
    }
    p.unflatten(lr.x);
    rep.train_mse = lr.f;
    rep.iterations = lr.iterations;
    rep.grad_norm = lr.grad_norm;
    rep.line_search_failed = lr.line_search_failed;
    rep.test_mse = test.size() > 0 ? icnn_loss(p, arch, test.points(), test.targets()) : lr.f;
    best.restarts.push_back(rep);
    if (!std::isfinite(rep.test_mse) || !std::isfinite(rep.train_mse)) continue;
    if (!have_best || rep.test_mse < best.report.test_mse) {
      best.params = p;
      best.report = rep;
      have_best = true;
    }
  }
  if (!have_best) throw TrainingError("every ICNN training restart diverged");
  return best;
}

}  // namespace cvxctg
