#pragma once

// Dense linear-algebra substrate: matrix aliases over Eigen, activations,
// initialisers, dropout masks and the first-order optimizer update rules.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>

#include "sdai/error.hpp"
#include "sdai/rng.hpp"

namespace sdai {

using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::RowVectorXd;
using Mask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Half-open column interval [begin, end).
struct ColumnRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  friend bool operator==(const ColumnRange&, const ColumnRange&) = default;
};

enum class ActivationKind { Tanh, ReLU, Linear, Sigmoid, Softmax };

inline std::string_view to_string(ActivationKind k) {
  switch (k) {
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::Linear: return "linear";
    case ActivationKind::Sigmoid: return "sigmoid";
    case ActivationKind::Softmax: return "softmax";
  }
  return "?";
}

inline ActivationKind activation_from_string(std::string_view s) {
  if (s == "tanh") return ActivationKind::Tanh;
  if (s == "relu") return ActivationKind::ReLU;
  if (s == "linear") return ActivationKind::Linear;
  if (s == "sigmoid") return ActivationKind::Sigmoid;
  if (s == "softmax") return ActivationKind::Softmax;
  throw InvalidArgument("unknown activation '" + std::string(s) + "'");
}

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Numerically stable softmax of each row restricted to `cols`, written in place.
template <class Derived>
void softmax_block_inplace(Eigen::MatrixBase<Derived>& m, ColumnRange cols) {
  const auto width = static_cast<Eigen::Index>(cols.size());
  const auto first = static_cast<Eigen::Index>(cols.begin);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto seg = m.row(r).segment(first, width);
    const double mx = seg.maxCoeff();
    seg = (seg.array() - mx).exp().matrix();
    seg /= seg.sum();
  }
}

/// Applies `kind` elementwise. Softmax normalises each range in `blocks`
/// separately per row; columns outside the blocks pass through unchanged.
inline DenseMatrix apply_activation(ActivationKind kind, const DenseMatrix& x,
                                    std::span<const ColumnRange> blocks = {}) {
  switch (kind) {
    case ActivationKind::Tanh: return x.array().tanh().matrix();
    case ActivationKind::ReLU: return x.cwiseMax(0.0);
    case ActivationKind::Linear: return x;
    case ActivationKind::Sigmoid: return x.unaryExpr([](double v) { return sigmoid(v); });
    case ActivationKind::Softmax: {
      if (blocks.empty()) throw InvalidArgument("softmax requires block bounds");
      DenseMatrix out = x;
      for (const auto& b : blocks) {
        if (b.end > static_cast<std::size_t>(x.cols()) || b.begin >= b.end)
          throw InvalidArgument("softmax block out of range");
        softmax_block_inplace(out, b);
      }
      return out;
    }
  }
  throw InvalidArgument("unknown activation kind");
}

/// Elementwise derivative of the activation evaluated at the pre-activation.
/// ReLU'(0) is 0. Softmax is rejected: its Jacobian is folded into the
/// cross-entropy gradient.
inline DenseMatrix activation_derivative(ActivationKind kind, const DenseMatrix& pre) {
  switch (kind) {
    case ActivationKind::Tanh: return (1.0 - pre.array().tanh().square()).matrix();
    case ActivationKind::ReLU:
      return pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
    case ActivationKind::Linear: return DenseMatrix::Ones(pre.rows(), pre.cols());
    case ActivationKind::Sigmoid:
      return pre.unaryExpr([](double v) {
        const double s = sigmoid(v);
        return s * (1.0 - s);
      });
    case ActivationKind::Softmax:
      throw InvalidArgument("softmax derivative is only available fused with cross-entropy");
  }
  throw InvalidArgument("unknown activation kind");
}

// ---------------------------------------------------------------------------
// Optimizers

enum class OptimizerKind { SGD, NesterovMomentum, RMSProp, Adam };

inline std::string_view to_string(OptimizerKind k) {
  switch (k) {
    case OptimizerKind::SGD: return "sgd";
    case OptimizerKind::NesterovMomentum: return "nesterov";
    case OptimizerKind::RMSProp: return "rmsprop";
    case OptimizerKind::Adam: return "adam";
  }
  return "?";
}

inline OptimizerKind optimizer_from_string(std::string_view s) {
  if (s == "sgd") return OptimizerKind::SGD;
  if (s == "nesterov") return OptimizerKind::NesterovMomentum;
  if (s == "rmsprop") return OptimizerKind::RMSProp;
  if (s == "adam") return OptimizerKind::Adam;
  throw InvalidArgument("unknown optimizer '" + std::string(s) + "'");
}

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::Adam;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double rho = 0.9;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Per-parameter optimizer state. `first` holds velocity (Nesterov) or the
/// first moment (Adam); `second` holds the squared-gradient average.
struct OptimizerState {
  OptimizerConfig config;
  DenseMatrix first;
  DenseMatrix second;
  std::size_t step_count = 0;

  OptimizerState() = default;
  OptimizerState(const OptimizerConfig& cfg, Eigen::Index rows, Eigen::Index cols)
      : config(cfg),
        first(DenseMatrix::Zero(rows, cols)),
        second(DenseMatrix::Zero(rows, cols)) {}
};

/// One update of `params` in place from `grads`.
template <class P, class G>
void optimizer_step(OptimizerState& state, Eigen::MatrixBase<P>& params,
                    const Eigen::MatrixBase<G>& grads) {
  const auto& c = state.config;
  if (!(c.learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (params.rows() != grads.rows() || params.cols() != grads.cols())
    throw InvalidArgument("optimizer_step: parameter/gradient shape mismatch");
  if (state.first.rows() != params.rows() || state.first.cols() != params.cols() ||
      state.second.rows() != params.rows() || state.second.cols() != params.cols())
    throw InvalidArgument("optimizer_step: accumulator shape mismatch");

  ++state.step_count;
  auto p = params.derived().array();
  const auto g = grads.derived().array();
  auto m = state.first.array();
  auto v = state.second.array();
  const double lr = c.learning_rate;

  switch (c.kind) {
    case OptimizerKind::SGD:
      p -= lr * g;
      break;
    case OptimizerKind::NesterovMomentum:
      // v <- mu v - lr g ; p <- p + mu v - lr g  (look-ahead form)
      m = c.momentum * m - lr * g;
      p += c.momentum * m - lr * g;
      break;
    case OptimizerKind::RMSProp:
      v = c.rho * v + (1.0 - c.rho) * g.square();
      p -= lr * g / (v.sqrt() + c.epsilon);
      break;
    case OptimizerKind::Adam: {
      m = c.beta1 * m + (1.0 - c.beta1) * g;
      v = c.beta2 * v + (1.0 - c.beta2) * g.square();
      const double t = static_cast<double>(state.step_count);
      const double c1 = 1.0 - std::pow(c.beta1, t);
      const double c2 = 1.0 - std::pow(c.beta2, t);
      p -= lr * (m / c1) / ((v / c2).sqrt() + c.epsilon);
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// Random matrices

/// Inverted-dropout mask: each entry is 1/keep_prob with probability
/// keep_prob, else 0.
inline DenseMatrix dropout_mask(std::size_t rows, std::size_t cols, double keep_prob, Rng& rng) {
  if (!(keep_prob > 0.0 && keep_prob <= 1.0))
    throw InvalidArgument("dropout keep probability must lie in (0, 1]");
  DenseMatrix m(rows, cols);
  const double scale = 1.0 / keep_prob;
  for (Eigen::Index i = 0; i < m.size(); ++i)
    m.data()[i] = uniform01(rng) < keep_prob ? scale : 0.0;
  return m;
}

/// Glorot-uniform weights, shape fan_out x fan_in.
inline DenseMatrix init_weights(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  if (fan_in == 0 || fan_out == 0) throw InvalidArgument("init_weights: zero dimension");
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  DenseMatrix w(fan_out, fan_in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = uniform(rng, -bound, bound);
  return w;
}

inline bool all_finite(const DenseMatrix& m) { return m.allFinite(); }

}  // namespace sdai
