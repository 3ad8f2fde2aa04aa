#include <gtest/gtest.h>

#include <cmath>

#include "sdai/artifact.hpp"
#include "sdai/training.hpp"
#include "support.hpp"

using namespace sdai;

namespace {

Hyperparams quick_hp(std::uint64_t seed = 1) {
  Hyperparams hp;
  hp.encoder_sizes = {6, 2};
  hp.dropout_probs = {0.1, 0.0};
  hp.l2_lambda = 1e-5;
  hp.pretrain_noise_fraction = 0.1;
  hp.optimizer = {OptimizerKind::Adam, 5e-3};
  hp.batch_size = 16;
  hp.pretrain_epochs = 3;
  hp.finetune_epochs = 10;
  hp.seed = seed;
  return hp;
}

TabularDataset sine_data(std::size_t n, std::size_t d, double sigma, std::uint64_t seed) {
  SyntheticSpec s;
  s.n_samples = n;
  s.n_features = d;
  s.noise_sigma = sigma;
  s.seed = seed;
  return generate_synthetic(s);
}

}  // namespace

TEST(Pretrain, LayerShapeAndHiddenRepresentation) {
  Rng rng(1);
  const DenseMatrix x = DenseMatrix::Random(40, 7);
  auto hp = quick_hp();
  const auto r = pretrain_layer(x, all_known(40, 7), 3, hp, plain_head(7), rng);
  EXPECT_EQ(r.layer.weight.rows(), 3);
  EXPECT_EQ(r.layer.weight.cols(), 7);
  EXPECT_EQ(r.epoch_loss.size(), hp.pretrain_epochs);
  const auto h = encode_layer(r.layer, x);
  EXPECT_EQ(h.rows(), 40);
  EXPECT_EQ(h.cols(), 3);
}

TEST(Pretrain, OvercompleteWithoutNoiseIsRejected) {
  Rng rng(2);
  auto hp = quick_hp();
  hp.pretrain_noise_fraction = 0.0;
  const DenseMatrix x = DenseMatrix::Random(10, 4);
  EXPECT_THROW(pretrain_layer(x, all_known(10, 4), 4, hp, plain_head(4), rng), InvalidArgument);
  EXPECT_THROW(pretrain_layer(x, all_known(10, 4), 6, hp, plain_head(4), rng), InvalidArgument);
  hp.pretrain_noise_fraction = 0.1;
  EXPECT_NO_THROW(pretrain_layer(x, all_known(10, 4), 6, hp, plain_head(4), rng));
}

TEST(Pretrain, RejectsNonFiniteInput) {
  Rng rng(3);
  DenseMatrix x = DenseMatrix::Zero(5, 4);
  x(2, 1) = std::nan("");
  EXPECT_THROW(pretrain_layer(x, all_known(5, 4), 2, quick_hp(), plain_head(4), rng), InvalidArgument);
}

TEST(Pretrain, LinearLayerReachesPcaReconstruction) {
  // Rank-2 data: the optimal linear reconstruction through 5 units is exact.
  Rng rng(4);
  const Eigen::Index n = 400, d = 6;
  const DenseMatrix basis = DenseMatrix::NullaryExpr(2, d, [&] { return standard_normal(rng) / std::sqrt(2.0); });
  const DenseMatrix z = DenseMatrix::NullaryExpr(n, 2, [&] { return standard_normal(rng); });
  const DenseMatrix x = z * basis;
  Eigen::JacobiSVD<DenseMatrix> svd(x);
  const double pca_mse = svd.singularValues().tail(d - 5).squaredNorm() / static_cast<double>(n * d);
  ASSERT_LT(pca_mse, 1e-20);

  Hyperparams hp = quick_hp();
  hp.hidden_activation = ActivationKind::Linear;
  hp.pretrain_noise_fraction = 0.05;
  hp.l2_lambda = 0.0;
  hp.optimizer = {OptimizerKind::Adam, 1e-2};
  hp.pretrain_epochs = 300;
  hp.batch_size = 32;
  const auto r = pretrain_layer(x, all_known(n, d), static_cast<std::size_t>(d - 1), hp, plain_head(d), rng);
  // Tied decoder: x_hat = h W + b', with b' set to its least-squares optimum.
  const DenseMatrix recon = encode_layer(r.layer, x) * r.layer.weight;
  const DenseMatrix resid = x - recon;
  const Vector bias = resid.colwise().mean();
  const double mse = (resid.rowwise() - bias).squaredNorm() / static_cast<double>(n * d);
  EXPECT_LT(mse, pca_mse + 0.01);
}

TEST(Finetune, RankOneDataIsFitAlmostExactly) {
  Rng rng(5);
  const std::size_t n = 200, d = 10;
  auto ds = make_dataset(continuous_schema(d), n);
  Vector v(static_cast<Eigen::Index>(d));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = uniform(rng, 0.5, 1.5) * (i % 2 ? 1.0 : -1.0);
  for (std::size_t r = 0; r < n; ++r) {
    const double a = uniform(rng, -1.0, 1.0);
    ds.cells.row(static_cast<Eigen::Index>(r)) = a * v.transpose();
  }
  Hyperparams hp = quick_hp(6);
  // piecewise-linear units represent the rank-one map exactly
  hp.hidden_activation = ActivationKind::ReLU;
  hp.encoder_sizes = {4, 1};
  hp.dropout_probs = {0.0, 0.0};
  hp.l2_lambda = 0.0;
  hp.pretrain_noise_fraction = 0.0;
  hp.optimizer = {OptimizerKind::Adam, 5e-3};
  hp.finetune_epochs = 300;
  const auto t = train_sdai(ds, hp);
  EXPECT_LT(t.report.finetune.epoch_loss.back(), 1e-3);
}

TEST(Finetune, SmoothedLossDoesNotIncreaseOnNoiselessSines) {
  const auto ds = sine_data(300, 20, 0.0, 7);
  Hyperparams hp = quick_hp(8);
  hp.encoder_sizes = {10, 2};
  hp.dropout_probs = {0.0, 0.0};
  hp.optimizer = {OptimizerKind::Adam, 1e-3};
  hp.batch_size = 32;
  hp.finetune_epochs = 60;
  const auto loss = train_sdai(ds, hp).report.finetune.epoch_loss;
  ASSERT_EQ(loss.size(), 60u);
  std::vector<double> avg;
  for (std::size_t e = 4; e < loss.size(); ++e) avg.push_back((loss[e - 4] + loss[e - 3] + loss[e - 2] + loss[e - 1] + loss[e]) / 5.0);
  for (std::size_t i = 1; i < avg.size(); ++i) EXPECT_LE(avg[i], avg[i - 1]) << "window ending at epoch " << i + 4;
}

TEST(Finetune, TiedWeightsStayTransposedAfterTraining) {
  const auto ds = sine_data(64, 12, 0.1, 9);
  const auto t = train_sdai(ds, quick_hp(10));
  const auto& net = t.model.network;
  ASSERT_TRUE(net.tied_final_layer);
  for (std::size_t j = 0; j < net.depth(); ++j)
    EXPECT_TRUE(net.decoder_weight(j) == net.encoder[net.depth() - 1 - j].weight.transpose());
}

TEST(Finetune, MixedHeadsUntieOnlyTheFinalLayer) {
  const auto ds = sdai::testing::random_dataset(sdai::testing::mixed_schema(), 60, 0.2, 11);
  Hyperparams hp = quick_hp(12);
  hp.encoder_sizes = {4, 2};
  const auto t = train_sdai(ds, hp);
  EXPECT_FALSE(t.model.network.tied_final_layer);
  EXPECT_TRUE(t.model.network.decoder_weight(0) == t.model.network.encoder[1].weight.transpose());
}

TEST(Finetune, DivergenceIsReported) {
  const auto ds = sine_data(64, 12, 0.1, 13);
  Hyperparams hp = quick_hp(14);
  hp.pretrain = false;
  hp.hidden_activation = ActivationKind::ReLU;
  hp.dropout_probs = {0.0, 0.0};
  hp.optimizer = {OptimizerKind::SGD, 1e6};
  EXPECT_THROW(train_sdai(ds, hp), TrainingDiverged);
}

TEST(Training, SameSeedIsBitReproducible) {
  const auto ds = sdai::testing::random_dataset(sdai::testing::mixed_schema(), 80, 0.2, 15);
  Hyperparams hp = quick_hp(16);
  hp.encoder_sizes = {4, 2};
  const auto a = train_sdai(ds, hp);
  const auto b = train_sdai(ds, hp);
  EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));
  EXPECT_EQ(a.report.finetune.epoch_loss, b.report.finetune.epoch_loss);
  hp.seed = 17;
  EXPECT_NE(serialize_model(train_sdai(ds, hp).model), serialize_model(a.model));
}

TEST(Training, HyperparamValidation) {
  const auto ds = sine_data(20, 6, 0.1, 18);
  auto bad = [&](auto edit) {
    Hyperparams hp = quick_hp();
    hp.encoder_sizes = {4, 2};
    edit(hp);
    EXPECT_THROW(train_sdai(ds, hp), InvalidArgument);
  };
  bad([](Hyperparams& h) { h.encoder_sizes.clear(); });
  bad([](Hyperparams& h) { h.dropout_probs = {0.1}; });
  bad([](Hyperparams& h) { h.dropout_probs = {1.0, 0.0}; });
  bad([](Hyperparams& h) { h.encoder_sizes = {4, 6}; });
  bad([](Hyperparams& h) { h.l2_lambda = -1.0; });
  bad([](Hyperparams& h) { h.optimizer.learning_rate = 0.0; });
  bad([](Hyperparams& h) { h.batch_size = 0; });
  bad([](Hyperparams& h) { h.hidden_activation = ActivationKind::Sigmoid; });
}

TEST(Impute, FullyObservedInputIsReturnedUnchanged) {
  const auto ds = sdai::testing::random_dataset(sdai::testing::mixed_schema(), 50, 0.2, 19);
  Hyperparams hp = quick_hp(20);
  hp.encoder_sizes = {4, 2};
  const auto t = train_sdai(ds, hp);
  auto full = ds;
  full.missing.setConstant(false);
  EXPECT_EQ(impute(t.model, full).data, full);
}

TEST(Impute, ObservedCellsUnchangedAndMissingCellsFilled) {
  const auto ds = sdai::testing::random_dataset(sdai::testing::mixed_schema(), 80, 0.3, 21);
  Hyperparams hp = quick_hp(22);
  hp.encoder_sizes = {4, 2};
  const auto t = train_sdai(ds, hp);
  const auto out = impute(t.model, ds).data;
  EXPECT_FALSE(out.missing.any());
  for (Eigen::Index r = 0; r < ds.cells.rows(); ++r)
    for (Eigen::Index c = 0; c < ds.cells.cols(); ++c) {
      if (!ds.missing(r, c)) {
        EXPECT_EQ(out.cells(r, c), ds.cells(r, c));
      }
      if (c > 0) {
        const double v = out.cells(r, c);
        EXPECT_EQ(v, std::round(v));
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, c == 1 ? 2.0 : 3.0);
      }
    }
}

TEST(Impute, ConstantColumnIsImputedAsTheConstant) {
  auto ds = sine_data(200, 8, 0.1, 23);
  const double c = 3.5;
  Rng rng(24);
  for (Eigen::Index r = 0; r < ds.cells.rows(); ++r) {
    ds.cells(r, 0) = c;
    ds.missing(r, 0) = uniform01(rng) < 0.3;
    if (ds.missing(r, 0)) ds.cells(r, 0) = 0.0;
  }
  Hyperparams hp = quick_hp(25);
  hp.finetune_epochs = 40;
  const auto t = train_sdai(ds, hp);
  ASSERT_EQ(t.report.zero_variance_columns, std::vector<std::size_t>{0});
  const double scale = t.model.stats[0].std;
  const auto out = impute(t.model, ds).data;
  for (Eigen::Index r = 0; r < ds.cells.rows(); ++r)
    if (ds.missing(r, 0)) {
      EXPECT_NEAR(out.cells(r, 0), c, 0.05 * scale);
    }
}

TEST(Impute, ProbabilitiesModeFillsEncodedProbabilities) {
  const auto ds = sdai::testing::random_dataset(sdai::testing::mixed_schema(), 40, 0.3, 26);
  Hyperparams hp = quick_hp(27);
  hp.encoder_sizes = {4, 2};
  const auto t = train_sdai(ds, hp);
  const auto hard = impute(t.model, ds, DecodeMode::Hard);
  const auto soft = impute(t.model, ds, DecodeMode::Probabilities);
  EXPECT_EQ(hard.probabilities.size(), 0);
  ASSERT_EQ(soft.probabilities.cols(), 5);
  for (Eigen::Index r = 0; r < soft.probabilities.rows(); ++r) {
    EXPECT_NEAR(soft.probabilities.row(r).segment(2, 3).sum(), 1.0, 1e-12);
    if (!ds.missing(r, 1)) continue;
    EXPECT_GT(soft.probabilities(r, 1), 0.0);
    EXPECT_LT(soft.probabilities(r, 1), 1.0);
  }
}

TEST(Impute, SchemaMismatchIsRefusedWithDiff) {
  const auto ds = sine_data(30, 6, 0.1, 28);
  Hyperparams hp = quick_hp(29);
  hp.encoder_sizes = {4, 2};
  const auto t = train_sdai(ds, hp);
  auto other = ds;
  other.schema[2].name = "renamed";
  try {
    impute(t.model, other);
    FAIL() << "expected a schema error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("renamed"), std::string::npos);
  }
}
