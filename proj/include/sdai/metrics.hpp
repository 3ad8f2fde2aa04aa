#pragma once

// Imputation error metrics, image similarity and the paired signed-rank test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "sdai/data.hpp"
#include "sdai/model.hpp"

namespace sdai {

namespace detail {

inline void require_same_shape(const TabularDataset& gold, const TabularDataset& imputed, const Mask& eval_mask) {
  if (gold.cells.rows() != imputed.cells.rows() || gold.cells.cols() != imputed.cells.cols() ||
      eval_mask.rows() != gold.cells.rows() || eval_mask.cols() != gold.cells.cols())
    throw InvalidArgument("metrics: gold, imputed and eval_mask shapes differ");
}

}  // namespace detail

/// Root mean squared error over the selected continuous cells, original scale.
inline double rmse_masked(const TabularDataset& gold, const TabularDataset& imputed, const Mask& eval_mask) {
  detail::require_same_shape(gold, imputed, eval_mask);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t c = 0; c < gold.n_columns(); ++c) {
    if (gold.schema[c].kind != ColumnKind::Continuous) continue;
    const auto cc = static_cast<Eigen::Index>(c);
    for (Eigen::Index r = 0; r < gold.cells.rows(); ++r) {
      if (!eval_mask(r, cc)) continue;
      const double d = imputed.cells(r, cc) - gold.cells(r, cc);
      sum += d * d;
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument("rmse_masked: no continuous cells selected");
  return std::sqrt(sum / static_cast<double>(n));
}

/// Mean cross-entropy over the selected cells of one discrete kind.
/// `probabilities` uses the encoded layout (one column per binary column,
/// one per category for categorical columns).
inline double ce_masked(const TabularDataset& gold, const DenseMatrix& probabilities, const Mask& eval_mask,
                        ColumnKind kind) {
  if (kind == ColumnKind::Continuous) throw InvalidArgument("ce_masked: kind must be binary or categorical");
  detail::require_same_shape(gold, gold, eval_mask);
  if (probabilities.rows() != gold.cells.rows() ||
      probabilities.cols() != static_cast<Eigen::Index>(encoded_width(gold.schema)))
    throw InvalidArgument("ce_masked: probability matrix does not match the encoded layout");
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& b : block_layout(gold.schema)) {
    if (b.kind != kind) continue;
    const auto c = static_cast<Eigen::Index>(b.column);
    const auto at = static_cast<Eigen::Index>(b.range.begin);
    for (Eigen::Index r = 0; r < gold.cells.rows(); ++r) {
      if (!eval_mask(r, c)) continue;
      const double x = gold.cells(r, c);
      if (kind == ColumnKind::Binary) {
        const double p = clamp_probability(probabilities(r, at));
        sum -= x * std::log(p) + (1.0 - x) * std::log(1.0 - p);
      } else {
        sum -= std::log(clamp_probability(probabilities(r, at + static_cast<Eigen::Index>(x))));
      }
      ++n;
    }
  }
  if (n == 0) throw InvalidArgument(std::string("ce_masked: no ") + std::string(to_string(kind)) + " cells selected");
  return sum / static_cast<double>(n);
}

struct EvalReport {
  std::string method;
  std::string corruption;  // echo of the corruption that produced eval_mask
  double rmse_continuous = 0.0;
  double ce_binary = 0.0;
  double ce_categorical = 0.0;
  double total_error = 0.0;
  std::optional<double> ssim;
  std::size_t n_continuous = 0;
  std::size_t n_binary = 0;
  std::size_t n_categorical = 0;
  double seconds = 0.0;
};

/// Scores an imputation on the eval_mask cells. Kinds with no selected cell
/// contribute zero to the total error.
inline EvalReport evaluate(const TabularDataset& gold, const Imputation& imp, const Mask& eval_mask,
                           std::string method = {}) {
  detail::require_same_shape(gold, imp.data, eval_mask);
  EvalReport rep;
  rep.method = std::move(method);
  for (std::size_t c = 0; c < gold.n_columns(); ++c) {
    const auto n = static_cast<std::size_t>(eval_mask.col(static_cast<Eigen::Index>(c)).count());
    switch (gold.schema[c].kind) {
      case ColumnKind::Continuous: rep.n_continuous += n; break;
      case ColumnKind::Binary: rep.n_binary += n; break;
      case ColumnKind::Categorical: rep.n_categorical += n; break;
    }
  }
  if (rep.n_continuous) rep.rmse_continuous = rmse_masked(gold, imp.data, eval_mask);
  if (rep.n_binary) rep.ce_binary = ce_masked(gold, imp.probabilities, eval_mask, ColumnKind::Binary);
  if (rep.n_categorical) rep.ce_categorical = ce_masked(gold, imp.probabilities, eval_mask, ColumnKind::Categorical);
  rep.total_error = rep.rmse_continuous + rep.ce_binary + rep.ce_categorical;
  return rep;
}

inline constexpr std::size_t kSsimWindow = 8;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

/// Mean SSIM over all 8x8 windows (stride 1, uniform weights) of two
/// row-major height x width images with dynamic range 1.
inline double ssim(std::span<const double> a, std::span<const double> b, std::size_t height, std::size_t width) {
  if (a.size() != height * width || b.size() != height * width)
    throw InvalidArgument("ssim: image sizes do not match height x width");
  if (height < kSsimWindow || width < kSsimWindow)
    throw InvalidArgument("ssim: image smaller than the 8x8 window");
  constexpr double n = static_cast<double>(kSsimWindow * kSsimWindow);
  double total = 0.0;
  for (std::size_t y0 = 0; y0 + kSsimWindow <= height; ++y0) {
    for (std::size_t x0 = 0; x0 + kSsimWindow <= width; ++x0) {
      double sa = 0.0, sb = 0.0;
      for (std::size_t y = y0; y < y0 + kSsimWindow; ++y)
        for (std::size_t x = x0; x < x0 + kSsimWindow; ++x) {
          sa += a[y * width + x];
          sb += b[y * width + x];
        }
      const double ma = sa / n, mb = sb / n;
      double va = 0.0, vb = 0.0, cov = 0.0;
      for (std::size_t y = y0; y < y0 + kSsimWindow; ++y)
        for (std::size_t x = x0; x < x0 + kSsimWindow; ++x) {
          const double da = a[y * width + x] - ma, db = b[y * width + x] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= n;
      vb /= n;
      cov /= n;
      total += ((2.0 * ma * mb + kSsimC1) * (2.0 * cov + kSsimC2)) /
               ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
    }
  }
  const double windows = static_cast<double>((height - kSsimWindow + 1) * (width - kSsimWindow + 1));
  return total / windows;
}

/// Mean SSIM between matching rows of two image datasets.
inline double mean_ssim(const DenseMatrix& gold, const DenseMatrix& imputed, std::size_t height, std::size_t width) {
  if (gold.rows() != imputed.rows() || gold.cols() != imputed.cols() || gold.rows() == 0)
    throw InvalidArgument("mean_ssim: image sets differ in shape or are empty");
  const auto cols = static_cast<std::size_t>(gold.cols());
  double sum = 0.0;
  for (Eigen::Index r = 0; r < gold.rows(); ++r)
    sum += ssim({gold.row(r).data(), cols}, {imputed.row(r).data(), cols}, height, width);
  return sum / static_cast<double>(gold.rows());
}

enum class Alternative { TwoSided, Greater, Less };

inline std::string_view to_string(Alternative a) {
  switch (a) {
    case Alternative::TwoSided: return "two-sided";
    case Alternative::Greater: return "greater";
    case Alternative::Less: return "less";
  }
  return "?";
}

struct WilcoxonResult {
  double statistic = 0.0;  // W+: sum of ranks of positive differences
  double p_value = 1.0;
  Alternative side = Alternative::TwoSided;
  std::size_t n = 0;  // nonzero differences
  bool exact = true;
};

inline constexpr std::size_t kWilcoxonExactMax = 20;

/// Midranks (1-based) of the absolute values, ties sharing their average rank.
inline std::vector<double> signed_rank_midranks(const std::vector<double>& abs_diffs) {
  const std::size_t n = abs_diffs.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return abs_diffs[i] < abs_diffs[j]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && abs_diffs[idx[j + 1]] == abs_diffs[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) rank[idx[t]] = mid;
    i = j + 1;
  }
  return rank;
}

/// Paired Wilcoxon signed-rank test of a - b. Zero differences are dropped
/// and ties get midranks. Exact null distribution (all sign assignments) for
/// n <= 20, normal approximation with continuity and tie correction above.
/// Greater tests whether a tends to exceed b.
inline WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& a, const std::vector<double>& b,
                                           Alternative side = Alternative::TwoSided) {
  if (a.size() != b.size()) throw InvalidArgument("wilcoxon: paired samples differ in length");
  std::vector<double> diff, absd;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (!std::isfinite(d)) throw InvalidArgument("wilcoxon: non-finite difference");
    if (d != 0.0) {
      diff.push_back(d);
      absd.push_back(std::abs(d));
    }
  }
  if (diff.empty()) throw InvalidArgument("wilcoxon: all differences are zero");
  if (diff.size() < 5) throw InvalidArgument("wilcoxon: need at least 5 nonzero differences");
  const auto rank = signed_rank_midranks(absd);
  const std::size_t n = diff.size();

  WilcoxonResult res;
  res.side = side;
  res.n = n;
  for (std::size_t i = 0; i < n; ++i)
    if (diff[i] > 0) res.statistic += rank[i];

  double p_greater, p_less;  // P(W+ >= w), P(W+ <= w)
  if (n <= kWilcoxonExactMax) {
    // midranks are multiples of 1/2, so doubled ranks are integers
    std::vector<std::size_t> r2(n);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) total += r2[i] = static_cast<std::size_t>(std::lround(2.0 * rank[i]));
    std::vector<std::uint64_t> count(total + 1, 0);
    count[0] = 1;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t s = total; s + 1 > r2[i]; --s) count[s] += count[s - r2[i]];
    const auto w2 = static_cast<std::size_t>(std::lround(2.0 * res.statistic));
    std::uint64_t ge = 0, le = 0;
    for (std::size_t s = 0; s <= total; ++s) {
      if (s >= w2) ge += count[s];
      if (s <= w2) le += count[s];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    p_greater = static_cast<double>(ge) / all;
    p_less = static_cast<double>(le) / all;
  } else {
    res.exact = false;
    const double dn = static_cast<double>(n);
    const double mean = dn * (dn + 1.0) / 4.0;
    std::vector<double> sorted = rank;
    std::sort(sorted.begin(), sorted.end());
    double tie = 0.0;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j < n && sorted[j] == sorted[i]) ++j;
      const double t = static_cast<double>(j - i);
      tie += t * t * t - t;
      i = j;
    }
    const double sd = std::sqrt(dn * (dn + 1.0) * (2.0 * dn + 1.0) / 24.0 - tie / 48.0);
    auto upper = [](double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); };
    p_greater = upper((res.statistic - mean - 0.5) / sd);
    p_less = upper((mean - res.statistic - 0.5) / sd);
  }
  switch (side) {
    case Alternative::Greater: res.p_value = p_greater; break;
    case Alternative::Less: res.p_value = p_less; break;
    case Alternative::TwoSided: res.p_value = std::min(1.0, 2.0 * std::min(p_greater, p_less)); break;
  }
  return res;
}

}  // namespace sdai
