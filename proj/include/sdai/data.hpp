#pragma once

// Schema-aware tabular data: typed columns with a per-cell missingness mask,
// the one-hot/standardised encoding the networks train on, mean-fill, and the
// inverse mapping from network outputs back to typed values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "sdai/error.hpp"
#include "sdai/numerics.hpp"
#include "sdai/rng.hpp"

namespace sdai {

enum class ColumnKind { Continuous, Binary, Categorical };

inline std::string_view to_string(ColumnKind k) {
  switch (k) {
    case ColumnKind::Continuous: return "continuous";
    case ColumnKind::Binary: return "binary";
    case ColumnKind::Categorical: return "categorical";
  }
  return "?";
}

inline ColumnKind column_kind_from_string(std::string_view s) {
  if (s == "continuous") return ColumnKind::Continuous;
  if (s == "binary") return ColumnKind::Binary;
  if (s == "categorical") return ColumnKind::Categorical;
  throw DataError("unknown column kind '" + std::string(s) + "'");
}

struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::Continuous;
  std::vector<std::string> labels;  // categorical only

  std::size_t encoded_width() const {
    return kind == ColumnKind::Categorical ? labels.size() : 1;
  }
  friend bool operator==(const ColumnSchema&, const ColumnSchema&) = default;
};

using Schema = std::vector<ColumnSchema>;

inline void validate_schema(const Schema& schema) {
  std::set<std::string> names;
  for (const auto& c : schema) {
    if (!names.insert(c.name).second) throw DataError("duplicate column name '" + c.name + "'");
    if (c.kind == ColumnKind::Categorical) {
      if (c.labels.size() < 2)
        throw DataError("categorical column '" + c.name + "' needs at least 2 labels");
      std::set<std::string> labels(c.labels.begin(), c.labels.end());
      if (labels.size() != c.labels.size())
        throw DataError("categorical column '" + c.name + "' has duplicate labels");
    } else if (!c.labels.empty()) {
      throw DataError("column '" + c.name + "' is not categorical but lists labels");
    }
  }
}

inline std::size_t encoded_width(const Schema& schema) {
  std::size_t w = 0;
  for (const auto& c : schema) w += c.encoded_width();
  return w;
}

/// Human-readable difference between two schemas, empty when equal.
inline std::string schema_diff(const Schema& expected, const Schema& found) {
  std::string out;
  if (expected.size() != found.size())
    out += "column count " + std::to_string(expected.size()) + " vs " +
           std::to_string(found.size()) + "; ";
  for (std::size_t i = 0; i < std::min(expected.size(), found.size()); ++i) {
    const auto& a = expected[i];
    const auto& b = found[i];
    if (a == b) continue;
    out += "column " + std::to_string(i) + ": ";
    if (a.name != b.name) out += "name '" + a.name + "' vs '" + b.name + "' ";
    if (a.kind != b.kind)
      out += "kind " + std::string(to_string(a.kind)) + " vs " + std::string(to_string(b.kind)) + " ";
    if (a.labels != b.labels) out += "labels differ ";
    out += "; ";
  }
  return out;
}

/// Raw typed table. Continuous cells hold their value, binary cells 0/1,
/// categorical cells the label index. Missing cells hold 0 and are flagged in
/// `missing`.
struct TabularDataset {
  Schema schema;
  DenseMatrix cells;
  Mask missing;

  std::size_t n_samples() const { return static_cast<std::size_t>(cells.rows()); }
  std::size_t n_columns() const { return schema.size(); }
  bool is_missing(std::size_t r, std::size_t c) const { return missing(r, c); }
  std::size_t missing_count() const { return static_cast<std::size_t>(missing.count()); }

  /// Equal schema, equal mask, and bit-equal observed cells.
  friend bool operator==(const TabularDataset& a, const TabularDataset& b) {
    if (a.schema != b.schema || a.cells.rows() != b.cells.rows() ||
        a.cells.cols() != b.cells.cols() || a.missing != b.missing)
      return false;
    for (Eigen::Index r = 0; r < a.cells.rows(); ++r)
      for (Eigen::Index c = 0; c < a.cells.cols(); ++c)
        if (!a.missing(r, c) && a.cells(r, c) != b.cells(r, c)) return false;
    return true;
  }
};

inline TabularDataset make_dataset(Schema schema, std::size_t n_samples) {
  validate_schema(schema);
  TabularDataset ds;
  const auto cols = static_cast<Eigen::Index>(schema.size());
  ds.schema = std::move(schema);
  ds.cells = DenseMatrix::Zero(static_cast<Eigen::Index>(n_samples), cols);
  ds.missing = Mask::Constant(static_cast<Eigen::Index>(n_samples), cols, false);
  return ds;
}

/// Throws DataError if a present cell violates its column's domain.
inline void validate_cells(const TabularDataset& ds) {
  for (std::size_t c = 0; c < ds.n_columns(); ++c) {
    const auto& col = ds.schema[c];
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
      if (ds.missing(r, c)) continue;
      const double v = ds.cells(r, c);
      const bool ok = col.kind == ColumnKind::Continuous ? std::isfinite(v)
                      : col.kind == ColumnKind::Binary
                          ? (v == 0.0 || v == 1.0)
                          : (v >= 0.0 && v < static_cast<double>(col.labels.size()) &&
                             v == std::floor(v));
      if (!ok)
        throw DataError("row " + std::to_string(r) + ", column '" + col.name +
                        "': value outside the column domain");
    }
  }
}

inline TabularDataset select_rows(const TabularDataset& ds, std::span<const std::size_t> rows) {
  TabularDataset out;
  out.schema = ds.schema;
  out.cells.resize(static_cast<Eigen::Index>(rows.size()), ds.cells.cols());
  out.missing.resize(static_cast<Eigen::Index>(rows.size()), ds.missing.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(rows[i]);
    out.cells.row(static_cast<Eigen::Index>(i)) = ds.cells.row(src);
    out.missing.row(static_cast<Eigen::Index>(i)) = ds.missing.row(src);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Encoding

/// One source column's slice of the encoded matrix.
struct Block {
  std::size_t column = 0;
  ColumnKind kind = ColumnKind::Continuous;
  ColumnRange range;
  friend bool operator==(const Block&, const Block&) = default;
};

inline std::vector<Block> block_layout(const Schema& schema) {
  std::vector<Block> blocks;
  std::size_t at = 0;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const std::size_t w = schema[c].encoded_width();
    blocks.push_back({c, schema[c].kind, {at, at + w}});
    at += w;
  }
  return blocks;
}

/// Statistics of the observed cells of one column. Continuous columns use
/// mean/std; discrete columns use `frequencies` (P(1) for binary, class
/// frequencies for categorical).
struct ColumnStats {
  double mean = 0.0;
  double std = 1.0;
  bool zero_variance = false;
  std::vector<double> frequencies;
  friend bool operator==(const ColumnStats&, const ColumnStats&) = default;
};

struct EncodedMatrix {
  DenseMatrix values;
  Mask mask;  // true = derived from a missing cell
  std::vector<Block> blocks;
  std::vector<ColumnStats> stats;
  std::vector<std::size_t> zero_variance_columns;
  std::shared_ptr<const TabularDataset> source;

  std::size_t width() const { return static_cast<std::size_t>(values.cols()); }
  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  Mask known() const { return mask.unaryExpr([](bool m) { return !m; }); }
};

inline std::vector<ColumnStats> compute_stats(const TabularDataset& ds) {
  std::vector<ColumnStats> stats(ds.n_columns());
  for (std::size_t c = 0; c < ds.n_columns(); ++c) {
    const auto& col = ds.schema[c];
    std::vector<double> values;
    std::vector<double> counts(col.kind == ColumnKind::Categorical ? col.labels.size() : 2, 0.0);
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
      if (ds.missing(r, c)) continue;
      const double v = ds.cells(r, c);
      values.push_back(v);
      if (col.kind != ColumnKind::Continuous) counts[static_cast<std::size_t>(v)] += 1.0;
    }
    const std::size_t n = values.size();
    if (n == 0) throw DataError("column '" + col.name + "' has no observed values");
    auto& s = stats[c];
    const double dn = static_cast<double>(n);
    if (col.kind == ColumnKind::Continuous) {
      // summing in sorted order makes the statistics independent of row order
      std::sort(values.begin(), values.end());
      s.mean = std::accumulate(values.begin(), values.end(), 0.0) / dn;
      double ss = 0.0;
      for (double v : values) ss += (v - s.mean) * (v - s.mean);
      s.std = std::sqrt(ss / dn);
      if (!(s.std > 0.0)) {
        s.std = 1.0;
        s.zero_variance = true;
      }
    } else if (col.kind == ColumnKind::Binary) {
      s.frequencies = {counts[1] / dn};
    } else {
      s.frequencies.resize(counts.size());
      for (std::size_t k = 0; k < counts.size(); ++k) s.frequencies[k] = counts[k] / dn;
    }
  }
  return stats;
}

/// Encodes with externally supplied statistics (e.g. those of a training set).
inline EncodedMatrix encode(const TabularDataset& ds, std::vector<ColumnStats> stats) {
  if (stats.size() != ds.n_columns()) throw DataError("column statistics do not match schema");
  EncodedMatrix em;
  em.blocks = block_layout(ds.schema);
  const auto n = static_cast<Eigen::Index>(ds.n_samples());
  const auto w = static_cast<Eigen::Index>(encoded_width(ds.schema));
  em.values = DenseMatrix::Zero(n, w);
  em.mask = Mask::Constant(n, w, false);
  for (const auto& b : em.blocks) {
    const auto& s = stats[b.column];
    if (s.zero_variance) em.zero_variance_columns.push_back(b.column);
    const auto c = static_cast<Eigen::Index>(b.column);
    const auto at = static_cast<Eigen::Index>(b.range.begin);
    for (Eigen::Index r = 0; r < n; ++r) {
      if (ds.missing(r, c)) {
        em.mask.row(r).segment(at, static_cast<Eigen::Index>(b.range.size())).setConstant(true);
        continue;
      }
      const double v = ds.cells(r, c);
      switch (b.kind) {
        case ColumnKind::Continuous: em.values(r, at) = (v - s.mean) / s.std; break;
        case ColumnKind::Binary: em.values(r, at) = v; break;
        case ColumnKind::Categorical: em.values(r, at + static_cast<Eigen::Index>(v)) = 1.0; break;
      }
    }
  }
  em.stats = std::move(stats);
  em.source = std::make_shared<const TabularDataset>(ds);
  return em;
}

/// Standardises continuous columns over their observed values, passes
/// binary through and expands categoricals one-hot. Missing cells encode as 0.
inline EncodedMatrix encode(const TabularDataset& ds) { return encode(ds, compute_stats(ds)); }

/// Replaces masked entries by the observed column average in encoded space.
inline EncodedMatrix mean_fill(EncodedMatrix em) {
  for (const auto& b : em.blocks) {
    const auto& s = em.stats[b.column];
    const auto at = static_cast<Eigen::Index>(b.range.begin);
    for (Eigen::Index r = 0; r < em.values.rows(); ++r) {
      if (!em.mask(r, at)) continue;
      switch (b.kind) {
        case ColumnKind::Continuous: em.values(r, at) = 0.0; break;
        case ColumnKind::Binary: em.values(r, at) = s.frequencies[0]; break;
        case ColumnKind::Categorical:
          for (std::size_t k = 0; k < b.range.size(); ++k)
            em.values(r, at + static_cast<Eigen::Index>(k)) = s.frequencies[k];
          break;
      }
    }
  }
  return em;
}

// ---------------------------------------------------------------------------
// Decoding

enum class DecodeMode { Hard, Probabilities };

/// Decoded network output. `data` always carries hard values; in
/// probabilities mode `probabilities` is an encoded-layout matrix holding
/// de-standardised continuous values, P(1) for binary columns and class
/// probabilities for categorical blocks (observed cells keep their exact
/// encoding).
struct Imputation {
  TabularDataset data;
  DenseMatrix probabilities;
};

inline std::size_t argmax_lowest(const auto& seg) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < static_cast<std::size_t>(seg.size()); ++k)
    if (seg(static_cast<Eigen::Index>(k)) > seg(static_cast<Eigen::Index>(best))) best = k;
  return best;
}

/// Observed-cell encoding in the probabilities layout (raw continuous values).
inline DenseMatrix observed_probabilities(const TabularDataset& ds) {
  const auto blocks = block_layout(ds.schema);
  DenseMatrix p = DenseMatrix::Zero(static_cast<Eigen::Index>(ds.n_samples()),
                                    static_cast<Eigen::Index>(encoded_width(ds.schema)));
  for (const auto& b : blocks) {
    const auto c = static_cast<Eigen::Index>(b.column);
    const auto at = static_cast<Eigen::Index>(b.range.begin);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      if (ds.missing(r, c)) continue;
      if (b.kind == ColumnKind::Categorical)
        p(r, at + static_cast<Eigen::Index>(ds.cells(r, c))) = 1.0;
      else
        p(r, at) = ds.cells(r, c);
    }
  }
  return p;
}

inline Imputation decode(const EncodedMatrix& em, const DenseMatrix& predictions,
                         DecodeMode mode = DecodeMode::Hard) {
  if (predictions.rows() != em.values.rows() || predictions.cols() != em.values.cols())
    throw InvalidArgument("decode: prediction shape does not match the encoding");
  if (!em.source) throw InvalidArgument("decode: encoding has no source dataset");
  const TabularDataset& src = *em.source;
  Imputation out;
  out.data = src;
  if (mode == DecodeMode::Probabilities) out.probabilities = observed_probabilities(src);
  for (const auto& b : em.blocks) {
    const auto& s = em.stats[b.column];
    const auto c = static_cast<Eigen::Index>(b.column);
    const auto at = static_cast<Eigen::Index>(b.range.begin);
    const auto w = static_cast<Eigen::Index>(b.range.size());
    for (Eigen::Index r = 0; r < predictions.rows(); ++r) {
      if (!src.missing(r, c)) continue;
      double value = 0.0;
      switch (b.kind) {
        case ColumnKind::Continuous: value = predictions(r, at) * s.std + s.mean; break;
        case ColumnKind::Binary: value = predictions(r, at) >= 0.5 ? 1.0 : 0.0; break;
        case ColumnKind::Categorical:
          value = static_cast<double>(argmax_lowest(predictions.row(r).segment(at, w)));
          break;
      }
      out.data.cells(r, c) = value;
      out.data.missing(r, c) = false;
      if (mode == DecodeMode::Probabilities) {
        if (b.kind == ColumnKind::Continuous)
          out.probabilities(r, at) = value;
        else
          out.probabilities.row(r).segment(at, w) = predictions.row(r).segment(at, w);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic data

struct SyntheticSpec {
  std::size_t n_samples = 1000;
  std::size_t n_features = 200;
  std::vector<int> frequency_set{1};
  double noise_sigma = 0.1;
  std::uint64_t seed = 0;
};

/// Noise-free sample: sin(f * x_i) with x_i = 2*pi*i/d + u, i = 0..d-1.
inline std::vector<double> sine_sample(std::size_t d, double frequency, double phase) {
  std::vector<double> s(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double x = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(d) + phase;
    s[i] = std::sin(frequency * x);
  }
  return s;
}

inline Schema continuous_schema(std::size_t d, const std::string& prefix = "x") {
  Schema schema;
  for (std::size_t i = 0; i < d; ++i)
    schema.push_back({prefix + std::to_string(i + 1), ColumnKind::Continuous, {}});
  return schema;
}

/// Shifted-sine dataset: per sample a frequency from the set and a uniform
/// phase, plus independent Gaussian noise on every feature.
inline TabularDataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.frequency_set.empty()) throw InvalidArgument("frequency set must be non-empty");
  if (spec.n_features < 2) throw InvalidArgument("synthetic data needs at least 2 features");
  if (spec.noise_sigma < 0.0) throw InvalidArgument("noise sigma must be non-negative");
  for (int f : spec.frequency_set)
    if (f <= 0) throw InvalidArgument("frequencies must be positive integers");
  auto ds = make_dataset(continuous_schema(spec.n_features), spec.n_samples);
  Rng rng(spec.seed);
  for (std::size_t n = 0; n < spec.n_samples; ++n) {
    const double f = spec.frequency_set[uniform_index(rng, spec.frequency_set.size())];
    const double u = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const auto row = sine_sample(spec.n_features, f, u);
    for (std::size_t i = 0; i < spec.n_features; ++i)
      ds.cells(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) =
          row[i] + spec.noise_sigma * standard_normal(rng);
  }
  return ds;
}

/// Bundled stand-in for a handwritten-digit image set: each height x width
/// image holds one to three thick strokes with Gaussian cross-section, pixel
/// values in [0, 1], flattened row-major.
inline TabularDataset generate_blob_images(std::size_t n_images, std::size_t height,
                                           std::size_t width, std::uint64_t seed) {
  if (height < 8 || width < 8) throw InvalidArgument("images must be at least 8x8");
  auto ds = make_dataset(continuous_schema(height * width, "p"), n_images);
  Rng rng(seed);
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  for (std::size_t n = 0; n < n_images; ++n) {
    std::vector<double> img(height * width, 0.0);
    const std::size_t strokes = 1 + uniform_index(rng, 3);
    for (std::size_t s = 0; s < strokes; ++s) {
      const double y0 = uniform(rng, 0.2 * h, 0.8 * h), x0 = uniform(rng, 0.2 * w, 0.8 * w);
      const double y1 = uniform(rng, 0.2 * h, 0.8 * h), x1 = uniform(rng, 0.2 * w, 0.8 * w);
      const double sigma = uniform(rng, 0.04, 0.07) * w;
      const double dy = y1 - y0, dx = x1 - x0;
      const double len2 = std::max(dy * dy + dx * dx, 1e-9);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          // distance from the pixel centre to the segment
          const double py = static_cast<double>(y) + 0.5 - y0;
          const double px = static_cast<double>(x) + 0.5 - x0;
          const double t = std::clamp((py * dy + px * dx) / len2, 0.0, 1.0);
          const double ey = py - t * dy, ex = px - t * dx;
          const double v = std::exp(-(ey * ey + ex * ex) / (2.0 * sigma * sigma));
          auto& p = img[y * width + x];
          p = std::max(p, v);
        }
      }
    }
    for (std::size_t i = 0; i < img.size(); ++i)
      ds.cells(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(i)) = std::clamp(img[i], 0.0, 1.0);
  }
  return ds;
}

}  // namespace sdai
