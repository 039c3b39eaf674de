#pragma once

// Dense ReLU network over a flat parameter vector with hand-derived backprop.
//
// Parameter layout, per layer l (in -> out): W_l as a row-major in x out
// block followed by the bias b_l (out). Hidden layers use ReLU; the last
// layer produces the logits of a single shared softmax head.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabgap/core.hpp"

namespace stabgap {

struct NetworkSpec {
  std::vector<int> layer_sizes;  // input dim, hidden dims..., output dim

  void validate() const {
    if (layer_sizes.size() < 2) throw std::invalid_argument("NetworkSpec: need at least input and output sizes");
    for (int s : layer_sizes)
      if (s < 1) throw std::invalid_argument("NetworkSpec: layer sizes must be >= 1");
  }
  [[nodiscard]] int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
  [[nodiscard]] int input_dim() const { return layer_sizes.front(); }
  [[nodiscard]] int output_dim() const { return layer_sizes.back(); }
  [[nodiscard]] std::size_t param_count() const {
    std::size_t n = 0;
    for (int l = 0; l < num_layers(); ++l) n += layer_params(l);
    return n;
  }
  [[nodiscard]] std::size_t layer_params(int l) const {
    const auto in = static_cast<std::size_t>(layer_sizes[l]);
    const auto out = static_cast<std::size_t>(layer_sizes[l + 1]);
    return in * out + out;
  }
  /// Offset of W_l in the flat vector; b_l follows at offset + in*out.
  [[nodiscard]] std::size_t layer_offset(int l) const {
    std::size_t off = 0;
    for (int i = 0; i < l; ++i) off += layer_params(i);
    return off;
  }
};

struct OptimizerState {
  ParamVector momentum_buffer;
  double momentum_coeff = 0.9;
  double learning_rate = 0.1;

  static OptimizerState zeros(const NetworkSpec& spec, double learning_rate, double momentum_coeff = 0.9) {
    if (!(learning_rate > 0)) throw std::invalid_argument("OptimizerState: learning_rate must be > 0");
    return {ParamVector::Zero(static_cast<Eigen::Index>(spec.param_count())), momentum_coeff, learning_rate};
  }
};

struct LossGrad {
  double loss = 0.0;
  ParamVector grad;
};

/// Activations kept from a forward pass for the backward pass.
struct ForwardPass {
  std::vector<Matrix> hidden;  // post-ReLU output of each hidden layer
  Matrix logits;
};

namespace detail {

using ConstMatMap = Eigen::Map<const Matrix>;
using ConstVecMap = Eigen::Map<const Vector>;

inline ConstMatMap weights(const ParamVector& w, const NetworkSpec& spec, int l) {
  return {w.data() + spec.layer_offset(l), spec.layer_sizes[l], spec.layer_sizes[l + 1]};
}

inline ConstVecMap bias(const ParamVector& w, const NetworkSpec& spec, int l) {
  const auto off = spec.layer_offset(l) +
                   static_cast<std::size_t>(spec.layer_sizes[l]) * static_cast<std::size_t>(spec.layer_sizes[l + 1]);
  return {w.data() + off, spec.layer_sizes[l + 1]};
}

inline void check_shapes(const ParamVector& w, const NetworkSpec& spec, Eigen::Index input_cols) {
  if (static_cast<std::size_t>(w.size()) != spec.param_count())
    throw std::invalid_argument("parameter vector length " + std::to_string(w.size()) + " does not match network (" +
                                std::to_string(spec.param_count()) + ")");
  if (input_cols != spec.input_dim())
    throw std::invalid_argument("input dimension " + std::to_string(input_cols) + " does not match network input " +
                                std::to_string(spec.input_dim()));
}

}  // namespace detail

/// Weights uniform in +-sqrt(6 / fan_in), zero biases.
inline ParamVector init_network(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  ParamVector w = ParamVector::Zero(static_cast<Eigen::Index>(spec.param_count()));
  Rng rng = make_rng(seed, 0x1a17);
  for (int l = 0; l < spec.num_layers(); ++l) {
    const double s = std::sqrt(6.0 / spec.layer_sizes[l]);
    std::uniform_real_distribution<double> dist(-s, s);
    const auto off = static_cast<Eigen::Index>(spec.layer_offset(l));
    const auto n = static_cast<Eigen::Index>(spec.layer_sizes[l]) * spec.layer_sizes[l + 1];
    for (Eigen::Index i = 0; i < n; ++i) w[off + i] = dist(rng);
  }
  return w;
}

inline ForwardPass forward(const ParamVector& w, const NetworkSpec& spec, const Eigen::Ref<const Matrix>& inputs) {
  detail::check_shapes(w, spec, inputs.cols());
  ForwardPass pass;
  const int L = spec.num_layers();
  pass.hidden.reserve(static_cast<std::size_t>(L - 1));
  for (int l = 0; l < L; ++l) {
    const auto W = detail::weights(w, spec, l);
    const auto b = detail::bias(w, spec, l);
    Matrix z(inputs.rows(), W.cols());
    if (l == 0)
      z.noalias() = inputs * W;
    else
      z.noalias() = pass.hidden.back() * W;
    z.rowwise() += b.transpose();
    if (l + 1 < L) {
      pass.hidden.push_back(z.cwiseMax(0.0));
    } else {
      pass.logits = std::move(z);
    }
  }
  return pass;
}

inline Matrix forward_logits(const ParamVector& w, const NetworkSpec& spec, const Eigen::Ref<const Matrix>& inputs) {
  return forward(w, spec, inputs).logits;
}

inline Matrix forward_logits(const ParamVector& w, const NetworkSpec& spec, const Batch& batch) {
  return forward_logits(w, spec, batch.inputs);
}

/// Gradient of a loss w.r.t. the parameters given its gradient w.r.t. the
/// logits of `pass`.
inline ParamVector backward(const ParamVector& w, const NetworkSpec& spec, const Eigen::Ref<const Matrix>& inputs,
                            const ForwardPass& pass, const Matrix& dlogits) {
  ParamVector grad = ParamVector::Zero(w.size());
  Matrix dz = dlogits;
  for (int l = spec.num_layers() - 1; l >= 0; --l) {
    const auto in = spec.layer_sizes[l];
    const auto out = spec.layer_sizes[l + 1];
    Eigen::Map<Matrix> gW(grad.data() + spec.layer_offset(l), in, out);
    Eigen::Map<Vector> gb(grad.data() + spec.layer_offset(l) + static_cast<std::size_t>(in) * out, out);
    if (l == 0)
      gW.noalias() = inputs.transpose() * dz;
    else
      gW.noalias() = pass.hidden[static_cast<std::size_t>(l - 1)].transpose() * dz;
    gb = dz.colwise().sum().transpose();
    if (l > 0) {
      const Matrix& h = pass.hidden[static_cast<std::size_t>(l - 1)];
      Matrix da(dz.rows(), in);
      da.noalias() = dz * detail::weights(w, spec, l).transpose();
      dz = (h.array() > 0.0).select(da, 0.0);
    }
  }
  return grad;
}

struct LogitLoss {
  double loss = 0.0;
  Matrix dlogits;
};

/// Row-wise numerically stable softmax restricted to the first `classes` columns.
inline Matrix softmax(const Matrix& logits, int classes) {
  Matrix p = Matrix::Zero(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const auto row = logits.row(i).head(classes);
    const double m = row.maxCoeff();
    auto e = (row.array() - m).exp();
    p.row(i).head(classes) = e / e.sum();
  }
  return p;
}

/// Mean softmax cross-entropy over rows and its gradient w.r.t. the logits,
/// scaled by `weight / n`. Only the first `classes` logits take part
/// (all of them when classes < 0).
inline LogitLoss softmax_cross_entropy(const Matrix& logits, std::span<const int> labels, int classes = -1,
                                       double weight = 1.0) {
  const auto n = logits.rows();
  if (n == 0) throw std::invalid_argument("softmax_cross_entropy: empty batch");
  if (classes < 0) classes = static_cast<int>(logits.cols());
  LogitLoss out;
  out.dlogits = softmax(logits, classes);
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= classes) throw std::invalid_argument("label " + std::to_string(y) + " out of range");
    const auto row = logits.row(i).head(classes);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    total += lse - logits(i, y);
    out.dlogits(i, y) -= 1.0;
  }
  out.loss = weight * total / static_cast<double>(n);
  out.dlogits *= weight / static_cast<double>(n);
  return out;
}

inline LossGrad ce_loss_and_grad(const ParamVector& w, const NetworkSpec& spec, const Batch& batch) {
  if (batch.empty()) throw std::invalid_argument("ce_loss_and_grad: empty batch");
  const ForwardPass pass = forward(w, spec, batch.inputs);
  LogitLoss ll = softmax_cross_entropy(pass.logits, batch.labels);
  return {ll.loss, backward(w, spec, batch.inputs, pass, ll.dlogits)};
}

/// Heavy-ball momentum: buf <- mu*buf + g; w <- w - lr*buf.
inline void sgd_momentum_step(ParamVector& w, OptimizerState& state, const ParamVector& g) {
  if (w.size() != g.size() || state.momentum_buffer.size() != w.size())
    throw std::invalid_argument("sgd_momentum_step: shape mismatch");
  state.momentum_buffer = state.momentum_coeff * state.momentum_buffer + g;
  w.noalias() -= state.learning_rate * state.momentum_buffer;
}

/// Argmax per row; ties go to the lowest class index.
inline std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    int best = 0;
    for (Eigen::Index k = 1; k < logits.cols(); ++k)
      if (logits(i, k) > logits(i, best)) best = static_cast<int>(k);
    out[static_cast<std::size_t>(i)] = best;
  }
  return out;
}

inline double accuracy_of_logits(const Matrix& logits, std::span<const int> labels) {
  if (labels.empty()) throw std::invalid_argument("accuracy: empty batch");
  const auto pred = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += pred[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

inline double accuracy(const ParamVector& w, const NetworkSpec& spec, const Batch& batch) {
  return accuracy_of_logits(forward_logits(w, spec, batch), batch.labels);
}

}  // namespace stabgap
