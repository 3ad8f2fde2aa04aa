#include <gtest/gtest.h>

#include <sstream>

#include "sdai/csv.hpp"
#include "sdai/data.hpp"
#include "support.hpp"

using namespace sdai;
using sdai::testing::mixed_schema;
using sdai::testing::random_dataset;

namespace {

TabularDataset parse(const std::string& text, const Schema& schema) {
  std::istringstream in(text);
  return read_csv(in, schema);
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

TEST(Schema, RejectsDuplicatesAndBadLabels) {
  EXPECT_THROW(validate_schema({{"a", ColumnKind::Continuous, {}}, {"a", ColumnKind::Binary, {}}}), DataError);
  EXPECT_THROW(validate_schema({{"k", ColumnKind::Categorical, {"x", "x"}}}), DataError);
  EXPECT_THROW(validate_schema({{"k", ColumnKind::Categorical, {"x"}}}), DataError);
  EXPECT_NO_THROW(validate_schema(mixed_schema()));
}

TEST(Schema, EncodedWidthOfMixedSchema) { EXPECT_EQ(encoded_width(mixed_schema()), 5u); }

TEST(Schema, DiffNamesTheDifference) {
  auto other = mixed_schema();
  other[1].name = "flag";
  const auto diff = schema_diff(mixed_schema(), other);
  EXPECT_NE(diff.find("'b' vs 'flag'"), std::string::npos);
  EXPECT_TRUE(schema_diff(mixed_schema(), mixed_schema()).empty());
}

TEST(Csv, OneEmptyFieldGivesOneMissingCell) {
  const auto ds = parse("c,b,k\n1.5,0,red\n,1,blue\n2,1,green\n", mixed_schema());
  EXPECT_EQ(ds.n_samples(), 3u);
  EXPECT_EQ(ds.missing_count(), 1u);
  EXPECT_TRUE(ds.missing(1, 0));
  EXPECT_EQ(ds.cells(2, 2), 1.0);
}

TEST(Csv, MissingTokensAreCaseInsensitive) {
  const auto ds = parse("c,b,k\nNA,nan,red\nna,NaN,blue\nNaN,1,\n", mixed_schema());
  EXPECT_EQ(ds.missing_count(), 6u);
}

TEST(Csv, BinaryOutOfDomainNamesRowAndColumn) {
  const auto msg = error_of([] { parse("c,b,k\n1,0,red\n2,2,red\n", mixed_schema()); });
  EXPECT_NE(msg.find("row 2"), std::string::npos) << msg;
  EXPECT_NE(msg.find("column 'b'"), std::string::npos) << msg;
}

TEST(Csv, UnknownLabelAndNonNumericAreErrors) {
  EXPECT_THROW(parse("c,b,k\n1,0,purple\n", mixed_schema()), DataError);
  EXPECT_THROW(parse("c,b,k\nabc,0,red\n", mixed_schema()), DataError);
  EXPECT_THROW(parse("c,b,k\n1,0\n", mixed_schema()), DataError);
  EXPECT_THROW(parse("c,x,k\n1,0,red\n", mixed_schema()), DataError);
}

TEST(Csv, RoundTripPreservesValuesAndMask) {
  const auto ds = random_dataset(mixed_schema(), 40, 0.3, 21);
  std::ostringstream out;
  write_csv(out, ds);
  const auto back = parse(out.str(), ds.schema);
  EXPECT_EQ(back, ds);
  EXPECT_EQ(back.missing, ds.missing);
}

TEST(Csv, QuotedFieldsAreParsed) {
  Schema s{{"k", ColumnKind::Categorical, {"a,b", "c"}}, {"x", ColumnKind::Continuous, {}}};
  const auto ds = parse("k,x\n\"a,b\",1\nc,2\n", s);
  EXPECT_EQ(ds.cells(0, 0), 0.0);
  std::ostringstream out;
  write_csv(out, ds);
  EXPECT_EQ(parse(out.str(), s), ds);
}

TEST(Csv, SchemaJsonRoundTrip) {
  const auto j = schema_to_json(mixed_schema());
  EXPECT_EQ(schema_from_json(j), mixed_schema());
}

TEST(Csv, MaskRoundTrip) {
  const auto ds = random_dataset(mixed_schema(), 10, 0.4, 5);
  std::ostringstream out;
  write_mask_csv(out, ds.missing, &ds.schema);
  std::istringstream in(out.str());
  EXPECT_EQ(read_mask_csv(in), ds.missing);
}

TEST(Encode, OneHotCategoricalBlock) {
  Schema s{{"k", ColumnKind::Categorical, {"a", "b", "c", "d"}}};
  auto ds = make_dataset(s, 2);
  ds.cells(0, 0) = 2;
  ds.cells(1, 0) = 0;
  const auto em = encode(ds);
  EXPECT_EQ(em.values.row(0), (Vector(4) << 0, 0, 1, 0).finished());
}

TEST(Encode, TwoPointStandardisation) {
  Schema s{{"x", ColumnKind::Continuous, {}}};
  auto ds = make_dataset(s, 2);
  ds.cells(0, 0) = 2;
  ds.cells(1, 0) = 4;
  const auto em = encode(ds);
  EXPECT_DOUBLE_EQ(em.values(0, 0), -1.0);
  EXPECT_DOUBLE_EQ(em.values(1, 0), 1.0);
}

TEST(Encode, BlocksPartitionTheEncodedWidth) {
  const auto em = encode(random_dataset(mixed_schema(), 8, 0.2, 3));
  std::size_t at = 0;
  for (const auto& b : em.blocks) {
    EXPECT_EQ(b.range.begin, at);
    at = b.range.end;
  }
  EXPECT_EQ(at, em.width());
  EXPECT_EQ(em.blocks[2].range.size(), 3u);
}

TEST(Encode, MaskIsSharedWithinBlocks) {
  const auto ds = random_dataset(mixed_schema(), 30, 0.4, 8);
  const auto em = encode(ds);
  for (const auto& b : em.blocks)
    for (Eigen::Index r = 0; r < em.mask.rows(); ++r)
      for (std::size_t j = b.range.begin; j < b.range.end; ++j)
        EXPECT_EQ(em.mask(r, static_cast<Eigen::Index>(j)), ds.missing(r, static_cast<Eigen::Index>(b.column)));
}

TEST(Encode, FullyMissingColumnIsAnError) {
  auto ds = make_dataset({{"x", ColumnKind::Continuous, {}}}, 3);
  ds.missing.setConstant(true);
  const auto msg = error_of([&] { encode(ds); });
  EXPECT_NE(msg.find("'x'"), std::string::npos);
}

TEST(Encode, ZeroVarianceIsFlaggedNotRejected) {
  auto ds = make_dataset({{"x", ColumnKind::Continuous, {}}, {"y", ColumnKind::Continuous, {}}}, 3);
  ds.cells << 5, 1, 5, 2, 5, 3;
  const auto em = encode(ds);
  ASSERT_EQ(em.zero_variance_columns, std::vector<std::size_t>{0});
  EXPECT_EQ(em.values(0, 0), 0.0);
  EXPECT_EQ(em.stats[0].std, 1.0);
}

TEST(MeanFill, ContinuousMissingBecomesZero) {
  auto ds = make_dataset({{"x", ColumnKind::Continuous, {}}}, 3);
  ds.cells << 1, 7, 3;
  ds.missing(1, 0) = true;
  const auto em = mean_fill(encode(ds));
  EXPECT_EQ(em.values(1, 0), 0.0);
  EXPECT_TRUE(em.mask(1, 0));
}

TEST(MeanFill, BinaryMissingBecomesFrequency) {
  auto ds = make_dataset({{"b", ColumnKind::Binary, {}}}, 4);
  ds.cells << 0, 1, 1, 0;
  ds.missing(3, 0) = true;
  EXPECT_DOUBLE_EQ(mean_fill(encode(ds)).values(3, 0), 2.0 / 3.0);
}

TEST(MeanFill, CategoricalMissingBecomesFrequencyVector) {
  auto ds = make_dataset({{"k", ColumnKind::Categorical, {"a", "b", "c"}}}, 5);
  ds.cells << 0, 0, 1, 2, 0;
  ds.missing(4, 0) = true;
  const auto em = mean_fill(encode(ds));
  EXPECT_DOUBLE_EQ(em.values(4, 0), 0.5);
  EXPECT_DOUBLE_EQ(em.values(4, 1), 0.25);
  EXPECT_DOUBLE_EQ(em.values(4, 2), 0.25);
}

TEST(MeanFill, MaskedBlocksShareOneFillAndSumToOne) {
  const auto ds = random_dataset(mixed_schema(), 60, 0.35, 12);
  const auto em = mean_fill(encode(ds));
  for (const auto& b : em.blocks) {
    const auto at = static_cast<Eigen::Index>(b.range.begin);
    const auto w = static_cast<Eigen::Index>(b.range.size());
    std::optional<Vector> fill;
    for (Eigen::Index r = 0; r < em.values.rows(); ++r) {
      if (!em.mask(r, at)) continue;
      const Vector v = em.values.row(r).segment(at, w);
      if (fill) {
        EXPECT_EQ(v, *fill);
      }
      fill = v;
      if (b.kind == ColumnKind::Categorical) {
        EXPECT_NEAR(v.sum(), 1.0, 1e-12);
      }
    }
  }
}

TEST(Decode, IdentityOnFullyObservedData) {
  const auto ds = random_dataset(mixed_schema(), 25, 0.0, 4);
  const auto em = encode(ds);
  const auto out = decode(em, em.values, DecodeMode::Hard);
  EXPECT_EQ(out.data, ds);
}

TEST(Decode, ArgmaxAndDestandardisation) {
  auto ds = make_dataset({{"x", ColumnKind::Continuous, {}}, {"k", ColumnKind::Categorical, {"a", "b", "c"}}}, 2);
  ds.cells << 8, 0, 12, 2;
  ds.missing(1, 0) = ds.missing(1, 1) = true;
  auto stats = compute_stats(ds);
  stats[0].mean = 10;
  stats[0].std = 2;
  const auto em = encode(ds, stats);
  DenseMatrix pred = em.values;
  pred(1, 0) = 1.0;
  pred.row(1).segment(1, 3) << 0.1, 0.7, 0.2;
  const auto out = decode(em, pred, DecodeMode::Probabilities);
  EXPECT_DOUBLE_EQ(out.data.cells(1, 0), 12.0);
  EXPECT_EQ(out.data.cells(1, 1), 1.0);
  EXPECT_DOUBLE_EQ(out.probabilities(1, 2), 0.7);
  EXPECT_EQ(out.data.cells(0, 0), 8.0);
  EXPECT_EQ(out.data.missing_count(), 0u);
}

TEST(Decode, ArgmaxTiesBreakLow) {
  auto ds = make_dataset({{"k", ColumnKind::Categorical, {"a", "b", "c"}}}, 2);
  ds.missing(1, 0) = true;
  const auto em = encode(ds);
  DenseMatrix pred = em.values;
  pred.row(1) << 0.2, 0.4, 0.4;
  EXPECT_EQ(decode(em, pred).data.cells(1, 0), 1.0);
}

TEST(Decode, ShapeMismatchIsRejected) {
  const auto em = encode(random_dataset(mixed_schema(), 5, 0.0, 1));
  EXPECT_THROW(decode(em, DenseMatrix::Zero(5, 4)), InvalidArgument);
}

TEST(Synthetic, ExactSineValues) {
  const auto s = sine_sample(4, 1.0, 0.0);
  EXPECT_NEAR(s[0], 0.0, 1e-15);
  EXPECT_NEAR(s[1], 1.0, 1e-15);
  EXPECT_NEAR(s[2], 0.0, 1e-15);
  EXPECT_NEAR(s[3], -1.0, 1e-15);
}

TEST(Synthetic, NoiselessValuesAreBounded) {
  const auto ds = generate_synthetic({200, 50, {1, 3}, 0.0, 9});
  EXPECT_LE(ds.cells.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(ds.missing_count(), 0u);
  EXPECT_EQ(ds.schema.front().name, "x1");
}

TEST(Synthetic, ColumnVarianceMatchesPhaseAverage) {
  const auto ds = generate_synthetic({10000, 8, {1}, 0.1, 10});
  for (Eigen::Index c = 0; c < 8; ++c) {
    const double mean = ds.cells.col(c).mean();
    const double var = (ds.cells.col(c).array() - mean).square().sum() / 9999.0;
    EXPECT_NEAR(var, 0.51, 0.02);
  }
}

TEST(Synthetic, SeedReuseAndChange) {
  const auto a = generate_synthetic({20, 10, {1}, 0.1, 1});
  const auto b = generate_synthetic({20, 10, {1}, 0.1, 1});
  const auto c = generate_synthetic({20, 10, {1}, 0.1, 2});
  EXPECT_EQ(a.cells, b.cells);
  EXPECT_NE(a.cells, c.cells);
}

TEST(Synthetic, InvalidSpecIsRejected) {
  EXPECT_THROW(generate_synthetic({10, 1, {1}, 0.1, 1}), InvalidArgument);
  EXPECT_THROW(generate_synthetic({10, 5, {}, 0.1, 1}), InvalidArgument);
}

TEST(Synthetic, BlobImagesInUnitRange) {
  const auto ds = generate_blob_images(10, 28, 28, 3);
  EXPECT_EQ(ds.n_columns(), 784u);
  EXPECT_GE(ds.cells.minCoeff(), 0.0);
  EXPECT_LE(ds.cells.maxCoeff(), 1.0);
  EXPECT_GT(ds.cells.maxCoeff(), 0.5);
}

TEST(SelectRows, KeepsOrderAndMask) {
  const auto ds = random_dataset(mixed_schema(), 10, 0.3, 2);
  const std::vector<std::size_t> rows{7, 2};
  const auto sub = select_rows(ds, rows);
  EXPECT_EQ(sub.cells.row(0), ds.cells.row(7));
  EXPECT_EQ(sub.missing.row(1), ds.missing.row(2));
}
