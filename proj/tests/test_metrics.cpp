#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "sdai/metrics.hpp"
#include "support.hpp"

using namespace sdai;

namespace {

TabularDataset column(std::vector<double> values) {
  auto ds = make_dataset(continuous_schema(1), values.size());
  for (std::size_t i = 0; i < values.size(); ++i) ds.cells(static_cast<Eigen::Index>(i), 0) = values[i];
  return ds;
}

std::vector<double> image(std::size_t h, std::size_t w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> px(h * w);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      px[y * w + x] = 0.5 + 0.3 * std::sin(0.4 * static_cast<double>(x) + 0.2 * static_cast<double>(y)) + 0.1 * uniform01(rng);
  return px;
}

}  // namespace

TEST(Rmse, IdenticalImputationIsZero) {
  const auto g = column({1.0, 2.0, 3.0});
  EXPECT_EQ(rmse_masked(g, g, Mask::Constant(3, 1, true)), 0.0);
}

TEST(Rmse, HandEvaluatedExample) {
  EXPECT_NEAR(rmse_masked(column({1.0, 2.0}), column({2.0, 4.0}), Mask::Constant(2, 1, true)), std::sqrt(2.5), 1e-15);
  EXPECT_NEAR(std::sqrt(2.5), 1.5811, 1e-4);
}

TEST(Rmse, OnlySelectedCellsCount) {
  Mask m(3, 1);
  m << true, false, true;
  EXPECT_DOUBLE_EQ(rmse_masked(column({0, 0, 0}), column({3, 100, 4}), m), std::sqrt(12.5));
  EXPECT_THROW(rmse_masked(column({0}), column({0}), Mask::Constant(1, 1, false)), InvalidArgument);
  EXPECT_THROW(rmse_masked(column({0, 1}), column({0}), Mask::Constant(2, 1, true)), InvalidArgument);
}

TEST(Rmse, InvariantUnderRowPermutation) {
  const auto g = sdai::testing::random_dataset(continuous_schema(4), 30, 0.0, 1);
  const auto imp = sdai::testing::random_dataset(continuous_schema(4), 30, 0.0, 2);
  Rng rng(3);
  Mask m = Mask::NullaryExpr(30, 4, [&] { return uniform01(rng) < 0.5; });
  std::vector<std::size_t> perm(30);
  std::iota(perm.begin(), perm.end(), 0u);
  std::reverse(perm.begin(), perm.end());
  std::swap(perm[3], perm[17]);
  Mask pm(30, 4);
  for (std::size_t i = 0; i < 30; ++i) pm.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(perm[i]));
  EXPECT_NEAR(rmse_masked(g, imp, m), rmse_masked(select_rows(g, perm), select_rows(imp, perm), pm), 1e-12);
}

TEST(CrossEntropy, UniformBinaryIsLnTwo) {
  Schema s{{"b", ColumnKind::Binary, {}}};
  auto g = make_dataset(s, 4);
  g.cells << 0, 1, 1, 0;
  const DenseMatrix p = DenseMatrix::Constant(4, 1, 0.5);
  EXPECT_NEAR(ce_masked(g, p, Mask::Constant(4, 1, true), ColumnKind::Binary), std::log(2.0), 1e-15);
}

TEST(CrossEntropy, UniformCategoricalFourIsLnFour) {
  Schema s{{"k", ColumnKind::Categorical, {"a", "b", "c", "d"}}};
  auto g = make_dataset(s, 3);
  g.cells << 0, 3, 2;
  const DenseMatrix p = DenseMatrix::Constant(3, 4, 0.25);
  EXPECT_NEAR(ce_masked(g, p, Mask::Constant(3, 1, true), ColumnKind::Categorical), std::log(4.0), 1e-15);
}

TEST(CrossEntropy, ConfidentCorrectPredictionHitsTheClampFloor) {
  Schema s{{"b", ColumnKind::Binary, {}}, {"k", ColumnKind::Categorical, {"a", "b"}}};
  auto g = make_dataset(s, 2);
  g.cells << 1, 0, 0, 1;
  DenseMatrix p(2, 3);
  p << 1, 1, 0, 0, 0, 1;
  const auto all = Mask::Constant(2, 2, true);
  EXPECT_LE(ce_masked(g, p, all, ColumnKind::Binary), 1e-11);
  EXPECT_LE(ce_masked(g, p, all, ColumnKind::Categorical), 1e-11);
  p << 0, 0, 1, 1, 1, 0;
  EXPECT_NEAR(ce_masked(g, p, all, ColumnKind::Binary), -std::log(1e-12), 1e-4);
}

TEST(Evaluate, MixedReportAddsKindErrors) {
  const auto gold = sdai::testing::random_dataset(sdai::testing::mixed_schema(), 20, 0.0, 4);
  Imputation imp{gold, DenseMatrix::Constant(20, 5, 0.5)};
  imp.data.cells.col(0).array() += 1.0;
  imp.probabilities.middleCols(2, 3).setConstant(1.0 / 3.0);
  const auto rep = evaluate(gold, imp, Mask::Constant(20, 3, true), "x");
  EXPECT_NEAR(rep.rmse_continuous, 1.0, 1e-12);
  EXPECT_NEAR(rep.ce_binary, std::log(2.0), 1e-12);
  EXPECT_NEAR(rep.ce_categorical, std::log(3.0), 1e-12);
  EXPECT_NEAR(rep.total_error, 1.0 + std::log(2.0) + std::log(3.0), 1e-12);
  EXPECT_EQ(rep.n_continuous, 20u);
  EXPECT_EQ(rep.n_binary, 20u);
  EXPECT_EQ(rep.n_categorical, 20u);
}

TEST(Ssim, IdenticalImagesGiveExactlyOne) {
  const auto a = image(28, 28, 1);
  EXPECT_EQ(ssim(a, a, 28, 28), 1.0);
}

TEST(Ssim, ConstantImagesHandEvaluated) {
  const std::vector<double> a(16 * 16, 0.2), b(16 * 16, 0.8);
  const double expected = (2.0 * 0.16 + kSsimC1) / (0.04 + 0.64 + kSsimC1);
  EXPECT_NEAR(ssim(a, b, 16, 16), expected, 1e-12);
  EXPECT_NEAR(expected, 0.4707, 1e-4);
}

TEST(Ssim, Symmetric) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = image(20, 24, s), b = image(20, 24, s + 100);
    EXPECT_NEAR(ssim(a, b, 20, 24), ssim(b, a, 20, 24), 1e-12);
  }
}

TEST(Ssim, DecreasesAsNoiseGrows) {
  const auto a = image(28, 28, 7);
  Rng rng(8);
  std::vector<double> noise(a.size());
  for (auto& v : noise) v = standard_normal(rng);
  double prev = 1.0;
  for (double level : {0.01, 0.03, 0.1, 0.3}) {
    std::vector<double> b(a);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] += level * noise[i];
    const double s = ssim(a, b, 28, 28);
    EXPECT_LT(s, prev);
    prev = s;
  }
}

TEST(Ssim, RejectsImagesSmallerThanTheWindow) {
  const std::vector<double> a(7 * 7, 0.5);
  EXPECT_THROW(ssim(a, a, 7, 7), InvalidArgument);
  EXPECT_THROW(ssim(a, a, 7, 8), InvalidArgument);
  const std::vector<double> c(8 * 8, 0.5);
  EXPECT_EQ(ssim(c, c, 8, 8), 1.0);
}

TEST(Wilcoxon, FiveAllPositiveIsOneOverThirtyTwo) {
  const std::vector<double> a{1.1, 2.3, 3.2, 4.5, 5.4}, b{1.0, 2.0, 3.0, 4.0, 5.0};
  const auto r = wilcoxon_signed_rank(a, b, Alternative::Greater);
  EXPECT_EQ(r.p_value, 1.0 / 32.0);
  EXPECT_EQ(r.statistic, 15.0);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(wilcoxon_signed_rank(b, a, Alternative::Less).p_value, 1.0 / 32.0);
  EXPECT_EQ(wilcoxon_signed_rank(a, b).p_value, 2.0 / 32.0);
}

TEST(Wilcoxon, SymmetricDifferencesGiveOne) {
  const std::vector<double> d{1, -1, 2, -2, 3, -3};
  const std::vector<double> zero(d.size(), 0.0);
  EXPECT_EQ(wilcoxon_signed_rank(d, zero).p_value, 1.0);
}

TEST(Wilcoxon, DegenerateInputsAreRejected) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  EXPECT_THROW(wilcoxon_signed_rank(a, a), InvalidArgument);
  EXPECT_THROW(wilcoxon_signed_rank(a, {1, 2}), InvalidArgument);
  EXPECT_THROW(wilcoxon_signed_rank({1, 2, 3, 4}, {0, 0, 0, 0}), InvalidArgument);
}

TEST(Wilcoxon, ExactMatchesBruteForceEnumeration) {
  Rng rng(9);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 5 + uniform_index(rng, 8);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      // small integer grid forces ties and zero differences
      a[i] = static_cast<double>(uniform_index(rng, 7));
      b[i] = static_cast<double>(uniform_index(rng, 7));
    }
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < n; ++i) nonzero += a[i] != b[i];
    if (nonzero < 5) continue;
    const auto bf = sdai::testing::wilcoxon_brute_force(a, b);
    EXPECT_EQ(wilcoxon_signed_rank(a, b, Alternative::Greater).p_value, bf.p_greater);
    EXPECT_EQ(wilcoxon_signed_rank(a, b, Alternative::Less).p_value, bf.p_less);
    EXPECT_EQ(wilcoxon_signed_rank(a, b).p_value, std::min(1.0, 2.0 * std::min(bf.p_greater, bf.p_less)));
  }
}

TEST(Wilcoxon, LargeSamplesUseTheNormalApproximation) {
  std::vector<double> a(40), b(40, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<double>(i + 1) * (i % 4 == 0 ? -1.0 : 1.0);
  const auto r = wilcoxon_signed_rank(a, b, Alternative::Greater);
  EXPECT_FALSE(r.exact);
  EXPECT_GT(r.p_value, 0.0);
  EXPECT_LT(r.p_value, 0.01);
  const auto both = wilcoxon_signed_rank(a, b);
  EXPECT_NEAR(both.p_value, 2.0 * r.p_value, 1e-15);
}
