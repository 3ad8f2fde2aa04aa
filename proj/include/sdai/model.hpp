#pragma once

// Stacked autoencoder with tied weights and typed output heads.
//
// Encoder layer k maps h_k -> h_{k+1} = f(h_k W_k^T + b_k) (row-major batches).
// Decoder layer j (0-based) reuses W_{L-1-j} transposed, so a single matrix
// backs both uses and the tied decoder weights are structurally the exact
// transpose of the encoder's. When the output mixes variable kinds the final
// decoder layer owns a separate weight matrix instead.

#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "sdai/data.hpp"
#include "sdai/numerics.hpp"

namespace sdai {

enum class HeadKind { Linear, Sigmoid, Softmax };

inline std::string_view to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Linear: return "linear";
    case HeadKind::Sigmoid: return "sigmoid";
    case HeadKind::Softmax: return "softmax";
  }
  return "?";
}

inline HeadKind head_kind_from_string(std::string_view s) {
  if (s == "linear") return HeadKind::Linear;
  if (s == "sigmoid") return HeadKind::Sigmoid;
  if (s == "softmax") return HeadKind::Softmax;
  throw InvalidArgument("unknown head kind '" + std::string(s) + "'");
}

struct OutputHead {
  ColumnRange range;
  HeadKind kind = HeadKind::Linear;
  friend bool operator==(const OutputHead&, const OutputHead&) = default;
};

using HeadSpec = std::vector<OutputHead>;

/// Output heads for an encoded layout. Adjacent continuous (or binary)
/// blocks share one linear (sigmoid) head; each categorical block gets its
/// own softmax head.
inline HeadSpec heads_for(const std::vector<Block>& blocks) {
  HeadSpec heads;
  for (const auto& b : blocks) {
    const HeadKind kind = b.kind == ColumnKind::Continuous ? HeadKind::Linear
                          : b.kind == ColumnKind::Binary   ? HeadKind::Sigmoid
                                                           : HeadKind::Softmax;
    if (kind != HeadKind::Softmax && !heads.empty() && heads.back().kind == kind &&
        heads.back().range.end == b.range.begin) {
      heads.back().range.end = b.range.end;
    } else {
      heads.push_back({b.range, kind});
    }
  }
  return heads;
}

inline HeadSpec plain_head(std::size_t width) { return {{{0, width}, HeadKind::Linear}}; }

inline bool has_mixed_kinds(const HeadSpec& heads) {
  for (const auto& h : heads)
    if (h.kind != heads.front().kind) return true;
  return false;
}

inline void validate_heads(const HeadSpec& heads, std::size_t width) {
  std::size_t at = 0;
  for (const auto& h : heads) {
    if (h.range.begin != at || h.range.end <= h.range.begin)
      throw InvalidArgument("output heads must partition the output width");
    at = h.range.end;
  }
  if (at != width) throw InvalidArgument("output heads do not cover the output width");
}

/// Applies the head activations to output pre-activations.
inline DenseMatrix apply_heads(const HeadSpec& heads, DenseMatrix pre) {
  for (const auto& h : heads) {
    const auto at = static_cast<Eigen::Index>(h.range.begin);
    const auto w = static_cast<Eigen::Index>(h.range.size());
    switch (h.kind) {
      case HeadKind::Linear: break;
      case HeadKind::Sigmoid:
        pre.middleCols(at, w) = pre.middleCols(at, w).unaryExpr([](double v) { return sigmoid(v); });
        break;
      case HeadKind::Softmax: softmax_block_inplace(pre, h.range); break;
    }
  }
  return pre;
}

struct LayerParams {
  DenseMatrix weight;  // out x in
  Vector bias;         // out
  ActivationKind activation = ActivationKind::Tanh;

  std::size_t in() const { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.rows()); }
};

struct AutoencoderModel {
  std::vector<LayerParams> encoder;   // last layer produces the bottleneck
  std::vector<Vector> decoder_biases;  // decoder layer j reconstructs encoder[L-1-j]'s input
  HeadSpec heads;
  bool tied_final_layer = true;
  std::optional<DenseMatrix> untied_final_weight;  // input_width x encoder[0].out()

  std::size_t depth() const { return encoder.size(); }
  std::size_t input_width() const { return encoder.front().in(); }
  std::size_t bottleneck_width() const { return encoder.back().out(); }

  /// Writable view of tied decoder layer j's weight; it aliases the encoder matrix.
  auto tied_decoder_weight(std::size_t j) {
    if (j + 1 == depth() && !tied_final_layer) throw InvalidArgument("final decoder layer is untied");
    return encoder[depth() - 1 - j].weight.transpose();
  }

  /// Decoder layer j's weight (out x in) as a copy.
  DenseMatrix decoder_weight(std::size_t j) const {
    if (j + 1 == depth() && !tied_final_layer) return *untied_final_weight;
    return encoder[depth() - 1 - j].weight.transpose();
  }

  /// Activation of the (non-final) decoder layer j, mirrored from the encoder.
  ActivationKind decoder_activation(std::size_t j) const { return encoder[depth() - 2 - j].activation; }

  std::vector<const DenseMatrix*> weight_matrices() const {
    std::vector<const DenseMatrix*> ws;
    for (const auto& l : encoder) ws.push_back(&l.weight);
    if (untied_final_weight) ws.push_back(&*untied_final_weight);
    return ws;
  }
};

/// Throws if layer shapes do not chain or heads disagree with the widths.
inline void validate_model(const AutoencoderModel& m) {
  if (m.encoder.empty()) throw InvalidArgument("model has no encoder layers");
  for (std::size_t k = 0; k < m.depth(); ++k) {
    const auto& l = m.encoder[k];
    if (static_cast<std::size_t>(l.bias.size()) != l.out())
      throw InvalidArgument("encoder layer " + std::to_string(k) + " bias width mismatch");
    if (k > 0 && l.in() != m.encoder[k - 1].out())
      throw InvalidArgument("encoder layer " + std::to_string(k) + " does not chain");
    if (l.activation == ActivationKind::Softmax)
      throw InvalidArgument("softmax is not allowed on hidden layers");
  }
  if (m.decoder_biases.size() != m.depth()) throw InvalidArgument("decoder bias count mismatch");
  for (std::size_t j = 0; j < m.depth(); ++j)
    if (static_cast<std::size_t>(m.decoder_biases[j].size()) != m.encoder[m.depth() - 1 - j].in())
      throw InvalidArgument("decoder bias " + std::to_string(j) + " width mismatch");
  if (m.tied_final_layer == m.untied_final_weight.has_value())
    throw InvalidArgument("untied final weight must be present exactly when the final layer is untied");
  if (m.untied_final_weight &&
      (static_cast<std::size_t>(m.untied_final_weight->rows()) != m.input_width() ||
       static_cast<std::size_t>(m.untied_final_weight->cols()) != m.encoder.front().out()))
    throw InvalidArgument("untied final weight has the wrong shape");
  validate_heads(m.heads, m.input_width());
}

// ---------------------------------------------------------------------------
// Forward / backward

/// Per-layer inputs and pre-activations kept for backpropagation.
struct ForwardCache {
  std::vector<DenseMatrix> enc_inputs;  // after input masks
  std::vector<DenseMatrix> enc_pre;
  std::vector<DenseMatrix> dec_inputs;
  std::vector<DenseMatrix> dec_pre;
  std::vector<DenseMatrix> input_masks;  // per encoder layer; empty = none
  DenseMatrix output;
};

/// Full pass. `input_masks[k]`, when non-empty, multiplies the input of
/// encoder layer k elementwise (dropout or masking noise).
inline ForwardCache forward(const AutoencoderModel& m, const DenseMatrix& batch,
                            std::span<const DenseMatrix> input_masks = {}) {
  if (static_cast<std::size_t>(batch.cols()) != m.input_width())
    throw InvalidArgument("forward: batch width " + std::to_string(batch.cols()) + " != model input width " +
                          std::to_string(m.input_width()));
  const std::size_t L = m.depth();
  ForwardCache c;
  c.input_masks.assign(input_masks.begin(), input_masks.end());
  c.input_masks.resize(L);
  DenseMatrix h = batch;
  for (std::size_t k = 0; k < L; ++k) {
    const auto& layer = m.encoder[k];
    if (c.input_masks[k].size() > 0) h.array() *= c.input_masks[k].array();
    DenseMatrix pre = h * layer.weight.transpose();
    pre.rowwise() += layer.bias;
    c.enc_inputs.push_back(std::move(h));
    h = apply_activation(layer.activation, pre);
    c.enc_pre.push_back(std::move(pre));
  }
  for (std::size_t j = 0; j < L; ++j) {
    const bool final = j + 1 == L;
    const auto& enc = m.encoder[L - 1 - j];
    DenseMatrix pre = (final && !m.tied_final_layer) ? DenseMatrix(h * m.untied_final_weight->transpose())
                                                     : DenseMatrix(h * enc.weight);
    pre.rowwise() += m.decoder_biases[j];
    c.dec_inputs.push_back(std::move(h));
    if (final)
      h = apply_heads(m.heads, pre);
    else
      h = apply_activation(m.decoder_activation(j), pre);
    c.dec_pre.push_back(std::move(pre));
  }
  c.output = std::move(h);
  return c;
}

inline DenseMatrix predict(const AutoencoderModel& m, const DenseMatrix& batch) {
  return forward(m, batch).output;
}

struct Gradients {
  std::vector<DenseMatrix> encoder_weights;
  std::vector<Vector> encoder_biases;
  std::vector<Vector> decoder_biases;
  std::optional<DenseMatrix> untied_final_weight;
};

/// Backpropagates the gradient w.r.t. the output pre-activations. Tied
/// matrices accumulate both their encoder-side and decoder-side gradients;
/// the L2 term adds 2*lambda*W to every weight matrix.
inline Gradients backward(const AutoencoderModel& m, const ForwardCache& c, const DenseMatrix& grad_out_pre,
                          double l2_lambda) {
  const std::size_t L = m.depth();
  Gradients g;
  g.encoder_weights.resize(L);
  g.encoder_biases.resize(L);
  g.decoder_biases.resize(L);
  for (std::size_t k = 0; k < L; ++k) g.encoder_weights[k] = DenseMatrix::Zero(m.encoder[k].weight.rows(), m.encoder[k].weight.cols());

  DenseMatrix delta = grad_out_pre;
  for (std::size_t jj = L; jj-- > 0;) {
    const std::size_t k = L - 1 - jj;  // encoder layer whose weight this decoder layer mirrors
    const bool untied = jj + 1 == L && !m.tied_final_layer;
    g.decoder_biases[jj] = delta.colwise().sum();
    DenseMatrix back;
    if (untied) {
      g.untied_final_weight = delta.transpose() * c.dec_inputs[jj];
      back = delta * *m.untied_final_weight;
    } else {
      g.encoder_weights[k].noalias() += c.dec_inputs[jj].transpose() * delta;
      back = delta * m.encoder[k].weight.transpose();
    }
    if (jj > 0)
      delta = back.cwiseProduct(activation_derivative(m.decoder_activation(jj - 1), c.dec_pre[jj - 1]));
    else
      delta = std::move(back);
  }
  // delta is now dLoss/d(bottleneck output)
  for (std::size_t k = L; k-- > 0;) {
    delta = delta.cwiseProduct(activation_derivative(m.encoder[k].activation, c.enc_pre[k]));
    g.encoder_weights[k].noalias() += delta.transpose() * c.enc_inputs[k];
    g.encoder_biases[k] = delta.colwise().sum();
    if (k > 0) {
      delta = delta * m.encoder[k].weight;
      if (c.input_masks[k].size() > 0) delta.array() *= c.input_masks[k].array();
    }
  }
  if (l2_lambda > 0.0) {
    for (std::size_t k = 0; k < L; ++k) g.encoder_weights[k] += 2.0 * l2_lambda * m.encoder[k].weight;
    if (g.untied_final_weight) *g.untied_final_weight += 2.0 * l2_lambda * *m.untied_final_weight;
  }
  return g;
}

// ---------------------------------------------------------------------------
// Masked loss

struct LossBreakdown {
  double squared = 0.0;
  double ce_binary = 0.0;
  double ce_categorical = 0.0;
  double l2 = 0.0;
  double total = 0.0;
  std::size_t known_continuous = 0;
  std::size_t known_binary = 0;
  std::size_t known_categorical = 0;  // known categorical blocks
  std::size_t samples = 0;            // rows with at least one known entry
};

struct MaskedLoss {
  LossBreakdown loss;
  DenseMatrix grad;  // d total / d output pre-activation
};

constexpr double kProbabilityFloor = 1e-12;

inline double clamp_probability(double p) {
  return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor);
}

/// Reconstruction loss over known entries only: squared error for linear
/// heads, cross-entropy for sigmoid and softmax heads, averaged over rows
/// that have at least one known entry, plus lambda * sum ||W||^2. Entries
/// whose `known` flag is false are never read and get exactly zero gradient.
inline MaskedLoss masked_loss(const DenseMatrix& outputs, const DenseMatrix& targets, const Mask& known,
                              const HeadSpec& heads, double l2_lambda,
                              std::span<const DenseMatrix* const> weights = {}) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols() || known.rows() != outputs.rows() ||
      known.cols() != outputs.cols())
    throw InvalidArgument("masked_loss: shape mismatch");
  validate_heads(heads, static_cast<std::size_t>(outputs.cols()));

  MaskedLoss r;
  auto& L = r.loss;
  r.grad = DenseMatrix::Zero(outputs.rows(), outputs.cols());
  for (Eigen::Index i = 0; i < known.rows(); ++i)
    if (known.row(i).any()) ++L.samples;
  const double inv_n = L.samples > 0 ? 1.0 / static_cast<double>(L.samples) : 0.0;

  for (const auto& h : heads) {
    const auto b = static_cast<Eigen::Index>(h.range.begin);
    const auto e = static_cast<Eigen::Index>(h.range.end);
    for (Eigen::Index i = 0; i < outputs.rows(); ++i) {
      switch (h.kind) {
        case HeadKind::Linear:
          for (Eigen::Index j = b; j < e; ++j) {
            if (!known(i, j)) continue;
            const double d = outputs(i, j) - targets(i, j);
            L.squared += d * d;
            r.grad(i, j) = 2.0 * d * inv_n;
            ++L.known_continuous;
          }
          break;
        case HeadKind::Sigmoid:
          for (Eigen::Index j = b; j < e; ++j) {
            if (!known(i, j)) continue;
            const double y = outputs(i, j), t = targets(i, j);
            L.ce_binary -= t * std::log(clamp_probability(y)) + (1.0 - t) * std::log(clamp_probability(1.0 - y));
            r.grad(i, j) = (y - t) * inv_n;
            ++L.known_binary;
          }
          break;
        case HeadKind::Softmax: {
          if (!known(i, b)) break;
          double sum = 0.0;
          for (Eigen::Index j = b; j < e; ++j) sum += targets(i, j);
          if (std::abs(sum - 1.0) > 1e-9)
            throw InvalidArgument("masked_loss: known softmax target block in row " + std::to_string(i) +
                                  " does not sum to 1");
          for (Eigen::Index j = b; j < e; ++j) {
            const double t = targets(i, j);
            if (t != 0.0) L.ce_categorical -= t * std::log(clamp_probability(outputs(i, j)));
            r.grad(i, j) = (outputs(i, j) - t) * inv_n;
          }
          ++L.known_categorical;
          break;
        }
      }
    }
  }
  L.squared *= inv_n;
  L.ce_binary *= inv_n;
  L.ce_categorical *= inv_n;
  for (const DenseMatrix* w : weights) L.l2 += l2_lambda * w->squaredNorm();
  L.total = L.squared + L.ce_binary + L.ce_categorical + L.l2;
  return r;
}

inline Mask all_known(Eigen::Index rows, Eigen::Index cols) { return Mask::Constant(rows, cols, true); }

/// Masked loss of the model on (inputs, targets) without any input masks.
inline LossBreakdown evaluate_loss(const AutoencoderModel& m, const DenseMatrix& inputs, const DenseMatrix& targets,
                                   const Mask& known, double l2_lambda) {
  const auto out = forward(m, inputs).output;
  const auto ws = m.weight_matrices();
  return masked_loss(out, targets, known, m.heads, l2_lambda, ws).loss;
}

}  // namespace sdai
