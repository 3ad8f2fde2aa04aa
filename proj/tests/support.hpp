#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sdai/sdai.hpp"

namespace sdai::testing {

/// Schema with one column of each kind: continuous, binary, categorical-3.
inline Schema mixed_schema() {
  return {{"c", ColumnKind::Continuous, {}},
          {"b", ColumnKind::Binary, {}},
          {"k", ColumnKind::Categorical, {"red", "green", "blue"}}};
}

/// Random dataset over `schema`; each cell missing with probability `missing`,
/// keeping at least one observed value per column.
inline TabularDataset random_dataset(const Schema& schema, std::size_t rows, double missing, std::uint64_t seed) {
  Rng rng(seed);
  auto ds = make_dataset(schema, rows);
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const auto cc = static_cast<Eigen::Index>(c);
    for (std::size_t r = 0; r < rows; ++r) {
      const auto rr = static_cast<Eigen::Index>(r);
      switch (schema[c].kind) {
        case ColumnKind::Continuous: ds.cells(rr, cc) = 3.0 * standard_normal(rng) + 1.0; break;
        case ColumnKind::Binary: ds.cells(rr, cc) = static_cast<double>(uniform_index(rng, 2)); break;
        case ColumnKind::Categorical:
          ds.cells(rr, cc) = static_cast<double>(uniform_index(rng, schema[c].labels.size()));
          break;
      }
      ds.missing(rr, cc) = r > 0 && uniform01(rng) < missing;
    }
  }
  for (Eigen::Index r = 0; r < ds.cells.rows(); ++r)
    for (Eigen::Index c = 0; c < ds.cells.cols(); ++c)
      if (ds.missing(r, c)) ds.cells(r, c) = 0.0;
  return ds;
}

/// Mutable views of every trainable parameter of a model, in a fixed order.
inline std::vector<double*> parameter_pointers(AutoencoderModel& m) {
  std::vector<double*> p;
  auto add = [&](auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) p.push_back(mat.data() + i);
  };
  for (auto& l : m.encoder) {
    add(l.weight);
    add(l.bias);
  }
  for (auto& b : m.decoder_biases) add(b);
  if (m.untied_final_weight) add(*m.untied_final_weight);
  return p;
}

/// Analytic gradient flattened in parameter_pointers order.
inline std::vector<double> flatten(const AutoencoderModel& m, const Gradients& g) {
  std::vector<double> out;
  auto add = [&](const auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) out.push_back(mat.data()[i]);
  };
  for (std::size_t k = 0; k < m.depth(); ++k) {
    add(g.encoder_weights[k]);
    add(g.encoder_biases[k]);
  }
  for (const auto& b : g.decoder_biases) add(b);
  if (g.untied_final_weight) add(*g.untied_final_weight);
  return out;
}

inline double total_loss(const AutoencoderModel& m, const DenseMatrix& x, const DenseMatrix& t, const Mask& known,
                         double l2) {
  return evaluate_loss(m, x, t, known, l2).total;
}

/// Norm-wise relative error between the analytic gradient and central finite
/// differences of the total masked loss.
inline double gradient_check(AutoencoderModel m, const DenseMatrix& x, const DenseMatrix& t, const Mask& known,
                             double l2, double step = 1e-5) {
  const auto cache = forward(m, x);
  const auto ws = m.weight_matrices();
  const auto ml = masked_loss(cache.output, t, known, m.heads, l2, ws);
  const auto analytic = flatten(m, backward(m, cache, ml.grad, l2));
  auto params = parameter_pointers(m);
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double saved = *params[i];
    *params[i] = saved + step;
    const double up = total_loss(m, x, t, known, l2);
    *params[i] = saved - step;
    const double down = total_loss(m, x, t, known, l2);
    *params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    diff += (analytic[i] - numeric) * (analytic[i] - numeric);
    na += analytic[i] * analytic[i];
    nn += numeric * numeric;
  }
  const double scale = std::max(std::sqrt(std::max(na, nn)), 1e-12);
  return std::sqrt(diff) / scale;
}

/// Random small mixed-head autoencoder and a batch for gradient checks.
struct GradientProblem {
  AutoencoderModel model;
  DenseMatrix inputs;
  DenseMatrix targets;
  Mask known;
  double l2 = 0.0;
};

inline GradientProblem random_gradient_problem(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t n_cont = 1 + uniform_index(rng, 3);
  const std::size_t n_bin = uniform_index(rng, 3);
  const std::size_t n_cat = uniform_index(rng, 2);
  Schema schema;
  for (std::size_t i = 0; i < n_cont; ++i) schema.push_back({"c" + std::to_string(i), ColumnKind::Continuous, {}});
  for (std::size_t i = 0; i < n_bin; ++i) schema.push_back({"b" + std::to_string(i), ColumnKind::Binary, {}});
  for (std::size_t i = 0; i < n_cat; ++i)
    schema.push_back({"k" + std::to_string(i), ColumnKind::Categorical, {"a", "b", "c", "d"}});
  const std::size_t rows = 6 + uniform_index(rng, 7);
  auto ds = random_dataset(schema, rows, 0.25, seed ^ 0x9e37u);
  const auto em = mean_fill(encode(ds));
  const auto heads = heads_for(em.blocks);
  const std::size_t width = em.width();

  std::vector<LayerParams> layers;
  const std::size_t depth = 1 + uniform_index(rng, 2);
  const auto act = uniform_index(rng, 3) ? ActivationKind::Tanh : ActivationKind::Linear;
  std::size_t in = width;
  for (std::size_t k = 0; k < depth; ++k) {
    const std::size_t out = std::max<std::size_t>(1, in > 2 ? in - 1 - uniform_index(rng, 2) : 1);
    LayerParams l;
    l.weight = init_weights(in, out, rng);
    l.bias = Vector::NullaryExpr(static_cast<Eigen::Index>(out), [&] { return uniform(rng, -0.5, 0.5); });
    l.activation = act;
    layers.push_back(std::move(l));
    in = out;
  }
  GradientProblem p;
  p.model = stack_and_mirror(std::move(layers), heads, rng);
  p.inputs = em.values;
  p.targets = em.values;
  p.known = em.known();
  p.l2 = uniform_index(rng, 2) ? 1e-3 : 0.0;
  return p;
}

// Unweighted k-nearest-neighbour mean on a continuous table, written from the
// definition: population-standardised columns, RMS difference over commonly
// observed columns, ties broken by row index.
inline double oracle_knn_mean(const TabularDataset& ds, std::size_t row, std::size_t col, std::size_t k) {
  const std::size_t n = ds.n_samples(), d = ds.n_columns();
  std::vector<double> mean(d, 0.0), sd(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double s = 0.0, cnt = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (!ds.missing(r, c)) s += ds.cells(r, c), cnt += 1.0;
    mean[c] = s / cnt;
    double v = 0.0;
    for (std::size_t r = 0; r < n; ++r)
      if (!ds.missing(r, c)) v += std::pow(ds.cells(r, c) - mean[c], 2);
    sd[c] = v > 0.0 ? std::sqrt(v / cnt) : 1.0;
  }
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t j = 0; j < n; ++j) {
    if (j == row || ds.missing(j, col)) continue;
    double s = 0.0;
    int shared = 0;
    for (std::size_t c = 0; c < d; ++c) {
      if (ds.missing(row, c) || ds.missing(j, c)) continue;
      s += std::pow((ds.cells(row, c) - ds.cells(j, c)) / sd[c], 2);
      ++shared;
    }
    if (shared) cand.emplace_back(std::sqrt(s / shared), j);
  }
  std::sort(cand.begin(), cand.end());
  double acc = 0.0;
  const std::size_t take = std::min(k, cand.size());
  for (std::size_t t = 0; t < take; ++t) acc += ds.cells(cand[t].second, col);
  return acc / static_cast<double>(take);
}

struct BruteForce {
  double p_greater;
  double p_less;
};

// Enumerates every sign assignment of the midranks of |a - b|.
inline BruteForce wilcoxon_brute_force(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> absd;
  double w = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) absd.push_back(std::abs(a[i] - b[i]));
  // midrank of each |d|: one plus the count below, plus half the other ties
  std::vector<double> ranks(absd.size());
  for (std::size_t i = 0; i < absd.size(); ++i) {
    double below = 0.0, tied = 0.0;
    for (double v : absd) below += v < absd[i], tied += v == absd[i];
    ranks[i] = 1.0 + below + (tied - 1.0) / 2.0;
  }
  std::size_t k = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) {
      if (a[i] > b[i]) w += ranks[k];
      ++k;
    }
  const std::size_t n = ranks.size();
  std::uint64_t ge = 0, le = 0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << n); ++s) {
    double wp = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (s >> i & 1u) wp += ranks[i];
    ge += wp >= w;
    le += wp <= w;
  }
  const double all = static_cast<double>(std::uint64_t{1} << n);
  return {static_cast<double>(ge) / all, static_cast<double>(le) / all};
}

}  // namespace sdai::testing
