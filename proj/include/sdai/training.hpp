#pragma once

// Two-phase training of the imputation autoencoder: greedy layer-wise
// denoising pre-training of the encoder, mirroring into a full tied-weight
// autoencoder, and masked end-to-end fine-tuning with dropout.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "sdai/data.hpp"
#include "sdai/model.hpp"
#include "sdai/numerics.hpp"
#include "sdai/rng.hpp"

namespace sdai {

struct Hyperparams {
  std::vector<std::size_t> encoder_sizes{100, 8};
  std::vector<double> dropout_probs{0.3, 0.1};  // removal probability at the input of each encoder layer
  double l2_lambda = 1e-4;
  double pretrain_noise_fraction = 0.2;
  OptimizerConfig optimizer{};
  std::size_t batch_size = 32;
  std::size_t pretrain_epochs = 10;
  std::size_t finetune_epochs = 50;
  ActivationKind hidden_activation = ActivationKind::Tanh;
  bool pretrain = true;  // false: random encoder initialisation
  std::uint64_t seed = 0;

  friend bool operator==(const Hyperparams& a, const Hyperparams& b) {
    return a.encoder_sizes == b.encoder_sizes && a.dropout_probs == b.dropout_probs &&
           a.l2_lambda == b.l2_lambda && a.pretrain_noise_fraction == b.pretrain_noise_fraction &&
           a.optimizer.kind == b.optimizer.kind && a.optimizer.learning_rate == b.optimizer.learning_rate &&
           a.batch_size == b.batch_size && a.pretrain_epochs == b.pretrain_epochs &&
           a.finetune_epochs == b.finetune_epochs && a.hidden_activation == b.hidden_activation &&
           a.pretrain == b.pretrain && a.seed == b.seed;
  }
};

inline void validate_hyperparams(const Hyperparams& hp, std::size_t input_width) {
  using detail::require;
  require(!hp.encoder_sizes.empty(), "encoder_sizes must not be empty");
  require(hp.dropout_probs.size() == hp.encoder_sizes.size(),
          "dropout_probs must have one entry per encoder layer");
  for (double p : hp.dropout_probs) require(p >= 0.0 && p < 1.0, "dropout probabilities must lie in [0, 1)");
  for (std::size_t w : hp.encoder_sizes) require(w >= 1, "encoder widths must be positive");
  require(hp.encoder_sizes.back() < input_width, "bottleneck width must be smaller than the input width");
  require(hp.l2_lambda >= 0.0, "l2_lambda must be non-negative");
  require(hp.pretrain_noise_fraction >= 0.0 && hp.pretrain_noise_fraction < 1.0,
          "pretrain_noise_fraction must lie in [0, 1)");
  require(hp.optimizer.learning_rate > 0.0, "learning_rate must be positive");
  require(hp.batch_size >= 1, "batch_size must be positive");
  require(hp.hidden_activation == ActivationKind::Tanh || hp.hidden_activation == ActivationKind::ReLU,
          "hidden_activation must be tanh or relu");
}

namespace detail {

/// Optimizer states for every trainable tensor of a model.
struct ModelOptimizer {
  std::vector<OptimizerState> enc_w, enc_b, dec_b;
  std::optional<OptimizerState> untied;

  ModelOptimizer(const AutoencoderModel& m, const OptimizerConfig& cfg) {
    for (const auto& l : m.encoder) {
      enc_w.emplace_back(cfg, l.weight.rows(), l.weight.cols());
      enc_b.emplace_back(cfg, 1, l.bias.size());
    }
    for (const auto& b : m.decoder_biases) dec_b.emplace_back(cfg, 1, b.size());
    if (m.untied_final_weight) untied.emplace(cfg, m.untied_final_weight->rows(), m.untied_final_weight->cols());
  }

  void step(AutoencoderModel& m, const Gradients& g) {
    for (std::size_t k = 0; k < m.depth(); ++k) {
      optimizer_step(enc_w[k], m.encoder[k].weight, g.encoder_weights[k]);
      optimizer_step(enc_b[k], m.encoder[k].bias, g.encoder_biases[k]);
      optimizer_step(dec_b[k], m.decoder_biases[k], g.decoder_biases[k]);
    }
    if (m.untied_final_weight) optimizer_step(*untied, *m.untied_final_weight, *g.untied_final_weight);
  }
};

inline DenseMatrix gather_rows(const DenseMatrix& m, std::span<const Eigen::Index> rows) {
  DenseMatrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

inline Mask gather_rows(const Mask& m, std::span<const Eigen::Index> rows) {
  Mask out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

enum class InputNoise { Dropout, Masking };

/// Masks for the inputs of each encoder layer. Dropout masks are inverted
/// ({0, 1/keep}); masking noise zeroes entries without rescaling.
inline std::vector<DenseMatrix> input_masks(std::size_t rows, const AutoencoderModel& m,
                                            std::span<const double> probs, InputNoise noise, Rng& rng) {
  std::vector<DenseMatrix> masks(m.depth());
  for (std::size_t k = 0; k < m.depth() && k < probs.size(); ++k) {
    if (probs[k] <= 0.0) continue;
    masks[k] = dropout_mask(rows, m.encoder[k].in(), 1.0 - probs[k], rng);
    if (noise == InputNoise::Masking) masks[k] = (masks[k].array() > 0.0).cast<double>().matrix();
  }
  return masks;
}

/// Mini-batch training loop shared by pre-training and fine-tuning.
/// Returns the per-epoch loss (mean of batch totals weighted by the rows
/// that contributed).
inline std::vector<double> train_epochs(AutoencoderModel& m, const DenseMatrix& inputs, const DenseMatrix& targets,
                                        const Mask& known, const Hyperparams& hp, std::size_t epochs,
                                        std::span<const double> noise_probs, InputNoise noise, Rng& rng,
                                        const std::string& phase) {
  ModelOptimizer opt(m, hp.optimizer);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    shuffle(std::span(order), rng);
    double weighted = 0.0;
    std::size_t rows_seen = 0;
    for (std::size_t start = 0; start < order.size(); start += hp.batch_size) {
      const std::size_t end = std::min(order.size(), start + hp.batch_size);
      const std::span<const Eigen::Index> idx(order.data() + start, end - start);
      const DenseMatrix xb = gather_rows(inputs, idx);
      const DenseMatrix tb = gather_rows(targets, idx);
      const Mask kb = gather_rows(known, idx);
      const auto masks = input_masks(idx.size(), m, noise_probs, noise, rng);
      const auto cache = forward(m, xb, masks);
      const auto ws = m.weight_matrices();
      const auto loss = masked_loss(cache.output, tb, kb, m.heads, hp.l2_lambda, ws);
      if (!std::isfinite(loss.loss.total)) throw TrainingDiverged(phase, epoch);
      if (loss.loss.samples == 0) continue;
      weighted += loss.loss.total * static_cast<double>(loss.loss.samples);
      rows_seen += loss.loss.samples;
      opt.step(m, backward(m, cache, loss.grad, hp.l2_lambda));
    }
    const double epoch_loss = rows_seen ? weighted / static_cast<double>(rows_seen) : 0.0;
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(phase, epoch);
    history.push_back(epoch_loss);
  }
  return history;
}

}  // namespace detail

struct PretrainResult {
  LayerParams layer;
  std::vector<double> epoch_loss;
};

/// Trains one single-hidden-layer tied-weight denoising autoencoder on
/// `input_rep` and returns its encoder layer. With `known` and typed `heads`
/// (first layer) the reconstruction loss is masked and typed; deeper layers
/// pass an all-known mask and a single linear head.
inline PretrainResult pretrain_layer(const DenseMatrix& input_rep, const Mask& known, std::size_t hidden_width,
                                     const Hyperparams& hp, const HeadSpec& heads, Rng& rng) {
  const auto in = static_cast<std::size_t>(input_rep.cols());
  detail::require(hidden_width >= 1, "hidden width must be positive");
  if (hidden_width >= in && hp.pretrain_noise_fraction == 0.0)
    throw InvalidArgument("hidden width " + std::to_string(hidden_width) + " >= input width " + std::to_string(in) +
                          " without denoising noise would learn the identity");
  if (!input_rep.allFinite()) throw InvalidArgument("pretrain_layer: non-finite input");

  AutoencoderModel ae;
  ae.encoder.push_back({init_weights(in, hidden_width, rng), Vector::Zero(static_cast<Eigen::Index>(hidden_width)),
                        hp.hidden_activation});
  ae.decoder_biases.push_back(Vector::Zero(static_cast<Eigen::Index>(in)));
  ae.heads = heads;
  ae.tied_final_layer = true;
  validate_model(ae);

  const double noise[] = {hp.pretrain_noise_fraction};
  PretrainResult r;
  r.epoch_loss = detail::train_epochs(ae, input_rep, input_rep, known, hp, hp.pretrain_epochs, noise,
                                      detail::InputNoise::Masking, rng, "pre-training");
  r.layer = std::move(ae.encoder.front());
  return r;
}

/// Hidden representation produced by one encoder layer.
inline DenseMatrix encode_layer(const LayerParams& layer, const DenseMatrix& x) {
  DenseMatrix pre = x * layer.weight.transpose();
  pre.rowwise() += layer.bias;
  return apply_activation(layer.activation, pre);
}

/// Builds the full autoencoder from an encoder stack: tied transposed
/// weights in the decoder, freshly drawn decoder biases (uniform in
/// +-1/sqrt(fan_in)), and an untied Glorot-initialised final layer when the
/// heads mix variable kinds.
inline AutoencoderModel stack_and_mirror(std::vector<LayerParams> encoder, const HeadSpec& heads, Rng& rng) {
  AutoencoderModel m;
  m.encoder = std::move(encoder);
  m.heads = heads;
  const std::size_t L = m.depth();
  for (std::size_t j = 0; j < L; ++j) {
    const auto& mirrored = m.encoder[L - 1 - j];
    const double bound = 1.0 / std::sqrt(static_cast<double>(mirrored.out()));
    Vector b(static_cast<Eigen::Index>(mirrored.in()));
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = uniform(rng, -bound, bound);
    m.decoder_biases.push_back(std::move(b));
  }
  m.tied_final_layer = !has_mixed_kinds(heads);
  if (!m.tied_final_layer) m.untied_final_weight = init_weights(m.encoder.front().out(), m.encoder.front().in(), rng);
  validate_model(m);
  return m;
}

/// Encoder initialised either by greedy layer-wise pre-training or randomly.
inline std::vector<LayerParams> build_encoder(const DenseMatrix& filled, const Mask& known, const HeadSpec& heads,
                                              const Hyperparams& hp, Rng& rng) {
  std::vector<LayerParams> layers;
  DenseMatrix rep = filled;
  for (std::size_t k = 0; k < hp.encoder_sizes.size(); ++k) {
    const std::size_t in = static_cast<std::size_t>(rep.cols());
    if (hp.pretrain) {
      const bool first = k == 0;
      const Mask all = first ? Mask() : all_known(rep.rows(), rep.cols());
      auto r = pretrain_layer(rep, first ? known : all, hp.encoder_sizes[k], hp, first ? heads : plain_head(in), rng);
      layers.push_back(std::move(r.layer));
    } else {
      layers.push_back({init_weights(in, hp.encoder_sizes[k], rng),
                        Vector::Zero(static_cast<Eigen::Index>(hp.encoder_sizes[k])), hp.hidden_activation});
    }
    if (k + 1 < hp.encoder_sizes.size()) rep = encode_layer(layers.back(), rep);
  }
  return layers;
}

struct FinetuneResult {
  double initial_loss = 0.0;  // full-data masked loss before the first update
  std::vector<double> epoch_loss;
};

/// Masked end-to-end training on mean-filled inputs with dropout on the
/// encoder inputs; tied matrices receive the sum of both gradient paths.
inline FinetuneResult finetune(AutoencoderModel& m, const DenseMatrix& filled, const Mask& known,
                               const Hyperparams& hp, Rng& rng) {
  if (static_cast<std::size_t>(filled.cols()) != m.input_width())
    throw InvalidArgument("finetune: data width does not match the model");
  FinetuneResult r;
  r.initial_loss = evaluate_loss(m, filled, filled, known, hp.l2_lambda).total;
  r.epoch_loss = detail::train_epochs(m, filled, filled, known, hp, hp.finetune_epochs, hp.dropout_probs,
                                      detail::InputNoise::Dropout, rng, "fine-tuning");
  return r;
}

// ---------------------------------------------------------------------------
// Trained artifact

/// Everything needed to impute new data with a trained network.
struct SdaiModel {
  AutoencoderModel network;
  Schema schema;
  std::vector<ColumnStats> stats;
  Hyperparams hyperparams;
};

struct TrainingReport {
  FinetuneResult finetune;
  std::vector<std::size_t> zero_variance_columns;
};

struct TrainedSdai {
  SdaiModel model;
  TrainingReport report;
};

inline TrainedSdai train_sdai(const TabularDataset& ds, const Hyperparams& hp) {
  const EncodedMatrix em = mean_fill(encode(ds));
  validate_hyperparams(hp, em.width());
  const Mask known = em.known();
  const HeadSpec heads = heads_for(em.blocks);
  Rng rng(derive_seed(hp.seed, "sdai.train"));
  auto encoder = build_encoder(em.values, known, heads, hp, rng);
  TrainedSdai t;
  t.model.network = stack_and_mirror(std::move(encoder), heads, rng);
  t.report.finetune = finetune(t.model.network, em.values, known, hp, rng);
  t.report.zero_variance_columns = em.zero_variance_columns;
  t.model.schema = ds.schema;
  t.model.stats = em.stats;
  t.model.hyperparams = hp;
  return t;
}

/// Mean-fills the masked entries, runs the network without dropout and
/// decodes; observed cells come back unchanged.
inline Imputation impute(const AutoencoderModel& m, const EncodedMatrix& em, DecodeMode mode = DecodeMode::Hard) {
  const EncodedMatrix filled = mean_fill(em);
  return decode(em, predict(m, filled.values), mode);
}

inline Imputation impute(const SdaiModel& model, const TabularDataset& ds, DecodeMode mode = DecodeMode::Hard) {
  if (ds.schema != model.schema)
    throw DataError("dataset schema does not match the model: " + schema_diff(model.schema, ds.schema));
  return impute(model.network, encode(ds, model.stats), mode);
}

}  // namespace sdai
