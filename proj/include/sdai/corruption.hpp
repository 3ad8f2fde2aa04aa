#pragma once

// Gold-standard missingness generators: uniform cell removal (MCAR), image
// line removal, and spatially correlated Ising-like masks.

#include <cmath>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "sdai/data.hpp"
#include "sdai/error.hpp"
#include "sdai/rng.hpp"

namespace sdai {

/// Corrupted copy of a dataset together with the cells that were removed.
struct GoldStandard {
  TabularDataset original;
  TabularDataset corrupted;
  Mask eval_mask;  // true = removed by the corruption
  std::size_t removed = 0;
};

namespace detail {

inline GoldStandard apply_removal(const TabularDataset& ds, Mask removal) {
  removal = removal.array() && !ds.missing.array();
  GoldStandard g;
  g.original = ds;
  g.corrupted = ds;
  for (Eigen::Index r = 0; r < removal.rows(); ++r)
    for (Eigen::Index c = 0; c < removal.cols(); ++c)
      if (removal(r, c)) {
        g.corrupted.missing(r, c) = true;
        g.corrupted.cells(r, c) = 0.0;
      }
  g.removed = static_cast<std::size_t>(removal.count());
  g.eval_mask = std::move(removal);
  return g;
}

inline void require_fraction(double f, const char* what) {
  if (!(f > 0.0 && f < 1.0)) throw InvalidArgument(std::string(what) + " must lie in (0, 1)");
}

inline void require_image_rows(const TabularDataset& ds, std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || ds.n_columns() != height * width)
    throw InvalidArgument("row width " + std::to_string(ds.n_columns()) + " does not match image " +
                          std::to_string(height) + "x" + std::to_string(width));
}

}  // namespace detail

/// Removes exactly floor(fraction * observed) cells chosen uniformly
/// without replacement among the observed cells.
inline GoldStandard corrupt_cells(const TabularDataset& ds, double fraction, std::uint64_t seed) {
  detail::require_fraction(fraction, "corruption fraction");
  std::vector<std::size_t> observed;
  const std::size_t cols = ds.n_columns();
  for (std::size_t r = 0; r < ds.n_samples(); ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (!ds.missing(r, c)) observed.push_back(r * cols + c);
  const auto count = static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(observed.size()) + 1e-9));
  Rng rng(seed);
  // partial Fisher-Yates: the first `count` slots become the sample
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + uniform_index(rng, observed.size() - i);
    std::swap(observed[i], observed[j]);
  }
  Mask removal = Mask::Constant(ds.missing.rows(), ds.missing.cols(), false);
  for (std::size_t i = 0; i < count; ++i)
    removal(static_cast<Eigen::Index>(observed[i] / cols), static_cast<Eigen::Index>(observed[i] % cols)) = true;
  return detail::apply_removal(ds, std::move(removal));
}

/// Number of horizontal and vertical lines removed per image at a nominal
/// fraction: half the fraction of each direction.
inline std::pair<std::size_t, std::size_t> line_counts(double fraction, std::size_t height,
                                                       std::size_t width) {
  const auto rows = static_cast<std::size_t>(std::floor(fraction / 2.0 * static_cast<double>(height) + 1e-9));
  const auto cols = static_cast<std::size_t>(std::floor(fraction / 2.0 * static_cast<double>(width) + 1e-9));
  return {std::min(rows, height), std::min(cols, width)};
}

/// Per image (row), removes floor(fraction/2 * height) full pixel rows and
/// floor(fraction/2 * width) full pixel columns, drawn independently per image.
inline GoldStandard corrupt_lines(const TabularDataset& ds, double fraction, std::size_t height,
                                  std::size_t width, std::uint64_t seed) {
  detail::require_fraction(fraction, "corruption fraction");
  detail::require_image_rows(ds, height, width);
  for (const auto& c : ds.schema)
    if (c.kind != ColumnKind::Continuous) throw InvalidArgument("line corruption needs continuous pixels");
  const auto [n_rows, n_cols] = line_counts(fraction, height, width);
  Rng rng(seed);
  Mask removal = Mask::Constant(ds.missing.rows(), ds.missing.cols(), false);
  std::vector<std::size_t> ys(height), xs(width);
  for (Eigen::Index img = 0; img < removal.rows(); ++img) {
    for (std::size_t i = 0; i < height; ++i) ys[i] = i;
    for (std::size_t i = 0; i < width; ++i) xs[i] = i;
    for (std::size_t i = 0; i < n_rows; ++i) std::swap(ys[i], ys[i + uniform_index(rng, height - i)]);
    for (std::size_t i = 0; i < n_cols; ++i) std::swap(xs[i], xs[i + uniform_index(rng, width - i)]);
    for (std::size_t i = 0; i < n_rows; ++i)
      for (std::size_t x = 0; x < width; ++x) removal(img, static_cast<Eigen::Index>(ys[i] * width + x)) = true;
    for (std::size_t i = 0; i < n_cols; ++i)
      for (std::size_t y = 0; y < height; ++y) removal(img, static_cast<Eigen::Index>(y * width + xs[i])) = true;
  }
  return detail::apply_removal(ds, std::move(removal));
}

// ---------------------------------------------------------------------------
// Ising-like masks

struct IsingParams {
  std::size_t height = 64;
  std::size_t width = 64;
  double target_fraction = 0.65;
  double coupling = 0.4;  // J / kT
  std::size_t sweeps = 200;
  std::uint64_t seed = 0;
};

/// Calibrated mask. `pixels` is row-major, true = missing (down spin).
struct IsingMask {
  std::vector<bool> pixels;
  std::size_t height = 0;
  std::size_t width = 0;
  double field = 0.0;
  double achieved_fraction = 0.0;

  bool at(std::size_t y, std::size_t x) const { return pixels[y * width + x]; }
};

/// Metropolis dynamics on a periodic 4-neighbour square lattice with
/// coupling J and external field h (both in units of kT). Spins start
/// uniformly random; down spins are returned as true.
inline std::vector<bool> ising_sample(std::size_t height, std::size_t width, double coupling,
                                      double field, std::size_t sweeps, std::uint64_t seed) {
  if (height == 0 || width == 0) throw InvalidArgument("ising lattice must be non-empty");
  Rng rng(seed);
  std::vector<int> spin(height * width);
  for (auto& s : spin) s = uniform01(rng) < 0.5 ? -1 : 1;
  const std::size_t n = spin.size();
  for (std::size_t sweep = 0; sweep < sweeps; ++sweep) {
    for (std::size_t step = 0; step < n; ++step) {
      const std::size_t i = uniform_index(rng, n);
      const std::size_t y = i / width, x = i % width;
      const int nb = spin[((y + height - 1) % height) * width + x] + spin[((y + 1) % height) * width + x] +
                     spin[y * width + (x + width - 1) % width] + spin[y * width + (x + 1) % width];
      const double delta = 2.0 * spin[i] * (coupling * nb + field);
      // the uniform is drawn unconditionally so the stream does not depend on the branch
      const double u = uniform01(rng);
      if (delta <= 0.0 || u < std::exp(-delta)) spin[i] = -spin[i];
    }
  }
  std::vector<bool> down(n);
  for (std::size_t i = 0; i < n; ++i) down[i] = spin[i] < 0;
  return down;
}

inline double true_fraction(const std::vector<bool>& v) {
  std::size_t k = 0;
  for (bool b : v) k += b;
  return v.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(v.size());
}

/// Fraction of horizontally/vertically adjacent pixel pairs (periodic) that agree.
inline double neighbour_agreement(const std::vector<bool>& px, std::size_t height, std::size_t width) {
  std::size_t agree = 0;
  for (std::size_t y = 0; y < height; ++y)
    for (std::size_t x = 0; x < width; ++x) {
      const bool s = px[y * width + x];
      agree += s == px[y * width + (x + 1) % width];
      agree += s == px[((y + 1) % height) * width + x];
    }
  return static_cast<double>(agree) / static_cast<double>(2 * height * width);
}

/// Ising mask whose down-spin fraction is calibrated to `target_fraction`
/// (within 0.05) by bisection on the external field. Every candidate field
/// is simulated from the same seed.
inline IsingMask ising_mask(const IsingParams& p) {
  detail::require_fraction(p.target_fraction, "target fraction");
  if (p.sweeps < 1) throw InvalidArgument("ising mask needs at least one sweep");
  constexpr double tolerance = 0.05;
  constexpr double aim = 0.01;
  constexpr int budget = 40;

  IsingMask best;
  best.height = p.height;
  best.width = p.width;
  double best_err = 2.0;
  auto evaluate = [&](double field) {
    auto px = ising_sample(p.height, p.width, p.coupling, field, p.sweeps, p.seed);
    const double f = true_fraction(px);
    const double err = std::abs(f - p.target_fraction);
    if (err < best_err) {
      best_err = err;
      best.pixels = std::move(px);
      best.field = field;
      best.achieved_fraction = f;
    }
    return f;
  };

  // missing fraction decreases with the field
  double lo = -4.0, hi = 4.0;
  (evaluate(0.0) > p.target_fraction ? lo : hi) = 0.0;
  for (int it = 0; it < budget && best_err > aim; ++it) {
    const double mid = 0.5 * (lo + hi);
    (evaluate(mid) > p.target_fraction ? lo : hi) = mid;
  }
  if (best_err > tolerance)
    throw Error("ising mask calibration did not reach target " + std::to_string(p.target_fraction) +
                " (achieved " + std::to_string(best.achieved_fraction) + ")");
  return best;
}

/// Removes the pixels of one mask from every image (row) of the dataset.
inline GoldStandard corrupt_with_mask(const TabularDataset& ds, const IsingMask& mask) {
  detail::require_image_rows(ds, mask.height, mask.width);
  Mask removal(ds.missing.rows(), ds.missing.cols());
  for (Eigen::Index r = 0; r < removal.rows(); ++r)
    for (Eigen::Index c = 0; c < removal.cols(); ++c) removal(r, c) = mask.pixels[static_cast<std::size_t>(c)];
  return detail::apply_removal(ds, std::move(removal));
}

// ---------------------------------------------------------------------------

struct CellsCorruption {
  double fraction = 0.3;
};
struct LinesCorruption {
  double fraction = 0.5;
  std::size_t height = 28;
  std::size_t width = 28;
};
struct IsingCorruption {
  double target_fraction = 0.65;
  double coupling = 0.4;
  std::size_t sweeps = 200;
  std::size_t height = 64;
  std::size_t width = 64;
};

struct CorruptionSpec {
  std::variant<CellsCorruption, LinesCorruption, IsingCorruption> kind;
  std::uint64_t seed = 0;
};

inline GoldStandard corrupt(const TabularDataset& ds, const CorruptionSpec& spec) {
  return std::visit(
      [&](const auto& k) -> GoldStandard {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, CellsCorruption>) {
          return corrupt_cells(ds, k.fraction, spec.seed);
        } else if constexpr (std::is_same_v<K, LinesCorruption>) {
          return corrupt_lines(ds, k.fraction, k.height, k.width, spec.seed);
        } else {
          const auto mask = ising_mask({k.height, k.width, k.target_fraction, k.coupling, k.sweeps, spec.seed});
          return corrupt_with_mask(ds, mask);
        }
      },
      spec.kind);
}

}  // namespace sdai
