#pragma once

// Reference imputers: column mean/mode, and distance-weighted K nearest
// neighbours over the encoded (standardised, one-hot) representation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "sdai/data.hpp"
#include "sdai/parallel.hpp"

namespace sdai {

namespace detail {

inline std::size_t mode_index(const std::vector<double>& freqs) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < freqs.size(); ++k)
    if (freqs[k] > freqs[best]) best = k;
  return best;
}

/// Column fill value from observed statistics: mean for continuous columns,
/// most frequent value (lowest index on ties) otherwise.
inline double fill_value(const ColumnSchema& col, const ColumnStats& s) {
  switch (col.kind) {
    case ColumnKind::Continuous: return s.mean;
    case ColumnKind::Binary: return s.frequencies[0] > 0.5 ? 1.0 : 0.0;
    case ColumnKind::Categorical: return static_cast<double>(mode_index(s.frequencies));
  }
  return 0.0;
}

}  // namespace detail

/// Mean (continuous) / mode (discrete) imputation. Probabilities hold the
/// observed class frequencies for discrete cells.
inline Imputation impute_mean(const TabularDataset& ds) {
  const auto stats = compute_stats(ds);  // throws on a fully missing column
  const auto blocks = block_layout(ds.schema);
  Imputation out{ds, observed_probabilities(ds)};
  for (const auto& b : blocks) {
    const auto c = static_cast<Eigen::Index>(b.column);
    const auto at = static_cast<Eigen::Index>(b.range.begin);
    const double fill = detail::fill_value(ds.schema[b.column], stats[b.column]);
    for (Eigen::Index r = 0; r < out.data.cells.rows(); ++r) {
      if (!ds.missing(r, c)) continue;
      out.data.cells(r, c) = fill;
      out.data.missing(r, c) = false;
      switch (b.kind) {
        case ColumnKind::Continuous: out.probabilities(r, at) = fill; break;
        case ColumnKind::Binary: out.probabilities(r, at) = stats[b.column].frequencies[0]; break;
        case ColumnKind::Categorical:
          for (std::size_t k = 0; k < b.range.size(); ++k)
            out.probabilities(r, at + static_cast<Eigen::Index>(k)) = stats[b.column].frequencies[k];
          break;
      }
    }
  }
  return out;
}

struct KnnParams {
  std::size_t k = 5;
  double lambda = 1.0;  // Gaussian kernel bandwidth: w = exp(-d^2 / lambda)
};

struct KnnReport {
  std::size_t imputed_cells = 0;
  std::size_t fallbacks = 0;  // cells with no eligible neighbour, filled by the column mean/mode
};

/// Weighted KNN imputer. Construction encodes the data and precomputes the
/// pairwise row distances and each row's neighbour ordering, so several
/// (k, lambda) settings can be evaluated cheaply.
///
/// Distance between rows i and j: sqrt of the mean squared difference over
/// the encoded features observed in both; rows sharing no observed feature
/// are never neighbours. Ties are broken by row index.
class KnnImputer {
 public:
  explicit KnnImputer(const TabularDataset& ds, std::size_t jobs = 1)
      : ds_(ds), em_(encode(ds)), n_(ds.n_samples()), dist_(n_ * n_, kInf), order_(n_ * n_) {
    const auto width = em_.values.cols();
    // observed-feature lists keep the inner loop short for sparse rows
    std::vector<std::vector<Eigen::Index>> observed(n_);
    for (std::size_t i = 0; i < n_; ++i)
      for (Eigen::Index f = 0; f < width; ++f)
        if (!em_.mask(static_cast<Eigen::Index>(i), f)) observed[i].push_back(f);
    parallel_for(n_, jobs, [&](std::size_t i) {
      const auto ri = static_cast<Eigen::Index>(i);
      for (std::size_t j = 0; j < n_; ++j) {
        if (j == i) continue;
        const auto rj = static_cast<Eigen::Index>(j);
        double sum = 0.0;
        std::size_t count = 0;
        for (Eigen::Index f : observed[i]) {
          if (em_.mask(rj, f)) continue;
          const double d = em_.values(ri, f) - em_.values(rj, f);
          sum += d * d;
          ++count;
        }
        if (count > 0) dist_[i * n_ + j] = std::sqrt(sum / static_cast<double>(count));
      }
      auto* ord = order_.data() + i * n_;
      std::iota(ord, ord + n_, std::uint32_t{0});
      const double* row = dist_.data() + i * n_;
      std::stable_sort(ord, ord + n_, [row](std::uint32_t a, std::uint32_t b) { return row[a] < row[b]; });
    });
    stats_ = compute_stats(ds);
  }

  double distance(std::size_t i, std::size_t j) const { return dist_[i * n_ + j]; }
  const TabularDataset& data() const { return ds_; }

  Imputation impute(const KnnParams& p, KnnReport* report = nullptr) const {
    if (p.k < 1 || p.k + 1 > n_) throw InvalidArgument("knn: k must lie in [1, n_samples - 1]");
    if (!(p.lambda > 0.0)) throw InvalidArgument("knn: lambda must be positive");
    Imputation out{ds_, observed_probabilities(ds_)};
    KnnReport rep;
    std::vector<std::uint32_t> nb;
    std::vector<double> w;
    for (const auto& b : em_.blocks) {
      const auto c = static_cast<Eigen::Index>(b.column);
      const auto at = static_cast<Eigen::Index>(b.range.begin);
      const auto& col = ds_.schema[b.column];
      for (std::size_t i = 0; i < n_; ++i) {
        const auto ri = static_cast<Eigen::Index>(i);
        if (!ds_.missing(ri, c)) continue;
        ++rep.imputed_cells;
        nb.clear();
        const auto* ord = order_.data() + i * n_;
        for (std::size_t t = 0; t < n_ && nb.size() < p.k; ++t) {
          const std::uint32_t j = ord[t];
          if (j == i || !std::isfinite(dist_[i * n_ + j])) continue;
          if (ds_.missing(static_cast<Eigen::Index>(j), c)) continue;
          nb.push_back(j);
        }
        double value;
        if (nb.empty()) {
          ++rep.fallbacks;
          value = detail::fill_value(col, stats_[b.column]);
          if (b.kind == ColumnKind::Binary) {
            out.probabilities(ri, at) = stats_[b.column].frequencies[0];
          } else if (b.kind == ColumnKind::Categorical) {
            for (std::size_t k = 0; k < b.range.size(); ++k)
              out.probabilities(ri, at + static_cast<Eigen::Index>(k)) = stats_[b.column].frequencies[k];
          }
        } else {
          // shift by the nearest distance so the kernel cannot underflow to all zeros
          const double d0 = dist_[i * n_ + nb.front()];
          w.resize(nb.size());
          double wsum = 0.0;
          for (std::size_t t = 0; t < nb.size(); ++t) {
            const double d = dist_[i * n_ + nb[t]];
            w[t] = std::exp(-(d * d - d0 * d0) / p.lambda);
            wsum += w[t];
          }
          if (b.kind == ColumnKind::Continuous) {
            double acc = 0.0;
            for (std::size_t t = 0; t < nb.size(); ++t) acc += w[t] * ds_.cells(nb[t], c);
            value = acc / wsum;
          } else {
            const std::size_t classes = b.kind == ColumnKind::Binary ? 2 : b.range.size();
            std::vector<double> votes(classes, 0.0);
            for (std::size_t t = 0; t < nb.size(); ++t)
              votes[static_cast<std::size_t>(ds_.cells(nb[t], c))] += w[t];
            value = static_cast<double>(detail::mode_index(votes));
            if (b.kind == ColumnKind::Binary) {
              out.probabilities(ri, at) = votes[1] / wsum;
            } else {
              for (std::size_t k = 0; k < classes; ++k)
                out.probabilities(ri, at + static_cast<Eigen::Index>(k)) = votes[k] / wsum;
            }
          }
        }
        out.data.cells(ri, c) = value;
        out.data.missing(ri, c) = false;
        if (b.kind == ColumnKind::Continuous) out.probabilities(ri, at) = value;
      }
    }
    if (report) *report = rep;
    return out;
  }

 private:
  static constexpr double kInf = std::numeric_limits<double>::infinity();
  TabularDataset ds_;
  EncodedMatrix em_;
  std::size_t n_;
  std::vector<double> dist_;
  std::vector<std::uint32_t> order_;
  std::vector<ColumnStats> stats_;
};

inline Imputation impute_knn(const TabularDataset& ds, const KnnParams& p, KnnReport* report = nullptr) {
  return KnnImputer(ds).impute(p, report);
}

}  // namespace sdai
