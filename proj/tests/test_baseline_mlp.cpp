#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "treecoder/perceptron.hpp"
#include "treecoder/synthetic.hpp"

using namespace treecoder;

TEST(Perceptron, ZeroWeightsGiveZeroOutput) {
  PerceptronAutoencoder<double> m(4, 2);
  const auto f = mlp_reconstruct<double>(m, std::vector<double>{1, 2, 3, 4});
  for (double h : f.code()) EXPECT_EQ(h, 0.0);
  for (double v : f.x_hat) EXPECT_EQ(v, 0.0);
}

TEST(Perceptron, BiasOnlyDecoder) {
  Rng rng(1);
  auto m = PerceptronAutoencoder<double>::random(3, 2, 1.0, rng);
  for (std::size_t r = 0; r < 3; ++r) {
    m.W_dec(r, 0) = m.W_dec(r, 1) = 0;
    m.W_dec(r, 2) = 0.1 * static_cast<double>(r + 1);
  }
  for (int i = 0; i < 5; ++i) {
    const auto f = mlp_reconstruct<double>(m, oracle::random_vector(3, rng));
    EXPECT_EQ(f.x_hat, (std::vector<double>{0.1, 0.2, 0.1 * 3.0}));
  }
}

TEST(Perceptron, RandomInitHasZeroBiases) {
  Rng rng(2);
  const auto m = PerceptronAutoencoder<double>::random(6, 3, 0.01, rng);
  for (std::size_t r = 0; r < 3; ++r) EXPECT_EQ(m.W(r, 6), 0.0);
  for (std::size_t r = 0; r < 6; ++r) EXPECT_EQ(m.W_dec(r, 3), 0.0);
  EXPECT_NE(m.W(0, 0), 0.0);
}

TEST(Perceptron, MatchesMatrixProductOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const auto m = PerceptronAutoencoder<double>::random(7, 3, 1.0, rng);
    const auto x = oracle::random_vector(7, rng);
    std::vector<double> h;
    const auto y = oracle::mlp_eval(m, x, &h);
    const auto f = mlp_reconstruct<double>(m, x);
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_NEAR(f.code()[j], h[j], 1e-12);
      EXPECT_GT(f.code()[j], -1.0);
      EXPECT_LT(f.code()[j], 1.0);
    }
    for (std::size_t j = 0; j < 7; ++j) EXPECT_NEAR(f.x_hat[j], y[j], 1e-12 * std::max(1.0, std::abs(y[j])));
  }
}

TEST(Perceptron, DimensionMismatchIsStructural) {
  PerceptronAutoencoder<double> m(4, 2);
  EXPECT_THROW(mlp_reconstruct<double>(m, std::vector<double>{1, 2}), StructuralError);
  EXPECT_THROW(PerceptronAutoencoder<double>(0, 2), StructuralError);
}

TEST(Perceptron, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 100; ++trial)
    EXPECT_LE(oracle::mlp_grad_check(rng, trial % 2 ? 1e-2 : 0.0), 1e-4) << "trial " << trial;
}

TEST(Perceptron, PerfectReconstructionLeavesParametersUnchanged) {
  PerceptronAutoencoder<double> m(3, 2);
  for (std::size_t r = 0; r < 3; ++r) m.W_dec(r, 2) = static_cast<double>(r);
  const auto before = m;
  auto opt = MlpOptimizerState<double>::for_model(m);
  TrainConfig<double> cfg;
  cfg.l2_strength = 0;
  EXPECT_EQ(mlp_train_step<double>(m, std::vector<double>{0, 1, 2}, opt, cfg), 0.0);
  EXPECT_EQ(m, before);
}

TEST(Perceptron, RepeatedStepsConverge) {
  Rng rng(5);
  auto m = PerceptronAutoencoder<double>::random(6, 2, 0.1, rng);
  const auto x = oracle::random_vector(6, rng);
  TrainConfig<double> cfg;
  cfg.l2_strength = 0;
  cfg.learning_rate = 0.1;
  auto opt = MlpOptimizerState<double>::for_model(m);
  const double initial = mlp_gradients<double>(m, x, 0.0).loss;
  for (int s = 0; s < 500; ++s) mlp_train_step<double>(m, x, opt, cfg);
  EXPECT_LT(mlp_gradients<double>(m, x, 0.0).loss, 0.01 * initial);
}

TEST(Perceptron, DivergenceDetected) {
  PerceptronAutoencoder<double> m(2, 1);
  m.W_dec(0, 1) = 1e300;
  auto opt = MlpOptimizerState<double>::for_model(m);
  TrainConfig<double> cfg;
  EXPECT_THROW(mlp_train_step<double>(m, std::vector<double>{-1e300, 0}, opt, cfg), TrainingDiverged);
}

TEST(Perceptron, SaturationFractionInRange) {
  const auto data = make_synthetic_clusters<double>(3, 10, 4, 0.1, 1).data;
  Rng rng(6);
  auto big = PerceptronAutoencoder<double>::random(4, 2, 100.0, rng);
  EXPECT_GT(saturation_fraction<double>(big, data), 0.5);
  PerceptronAutoencoder<double> zero(4, 2);
  EXPECT_EQ(saturation_fraction<double>(zero, data), 0.0);
}

TEST(Perceptron, TrainingIsDeterministicAndImproves) {
  const auto data = make_synthetic_clusters<double>(4, 15, 6, 0.05, 2).data;
  TrainConfig<double> cfg;
  cfg.total_epochs = 10;
  cfg.learning_rate = 0.05;
  auto run = [&] {
    Rng rng(3);
    auto m = PerceptronAutoencoder<double>::random(6, 2, kPerceptronInitScale, rng);
    auto h = train_perceptron<double>(m, data, data, cfg, rng);
    return std::pair{m, h};
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  ASSERT_EQ(a.second.size(), 10u);
  EXPECT_LT(a.second.back().test_error, a.second.front().test_error);
  EXPECT_NEAR(a.second.back().test_error, mlp_evaluate<double>(a.first, data), 1e-15);
}

TEST(Stacked, BookkeepingAndDeterminism) {
  const auto data = make_synthetic_clusters<double>(4, 10, 60, 0.05, 3).data;
  TrainConfig<double> cfg;
  cfg.total_epochs = 3;
  cfg.latent_dim = 2;
  cfg.seed = 5;
  const auto [m, h] = stacked_train<double>(data, data, cfg);
  EXPECT_EQ(m.stage1.latent_dim(), kStackedIntermediateDim);
  EXPECT_EQ(m.stage2.data_dim(), kStackedIntermediateDim);
  EXPECT_EQ(m.stage2.latent_dim(), 2u);
  ASSERT_EQ(h.size(), 6u);
  for (std::size_t i = 0; i < h.size(); ++i) {
    EXPECT_EQ(h[i].epoch, i + 1);
    EXPECT_EQ(h[i].depth, i < 3 ? 1u : 2u);
    EXPECT_GE(h[i].test_error, 0.0);
  }
  EXPECT_NEAR(h.back().test_error, m.evaluate(data), 1e-15);
  const auto [m2, h2] = stacked_train<double>(data, data, cfg);
  EXPECT_EQ(m.stage1, m2.stage1);
  EXPECT_EQ(m.stage2, m2.stage2);
  EXPECT_EQ(h, h2);
}

TEST(Stacked, ReconstructionDecodesThroughBothStages) {
  Rng rng(7);
  StackedAutoencoder<double> s{PerceptronAutoencoder<double>::random(5, 50, 0.5, rng),
                               PerceptronAutoencoder<double>::random(50, 2, 0.5, rng)};
  const auto x = oracle::random_vector(5, rng);
  std::vector<double> h1;
  oracle::mlp_eval(s.stage1, x, &h1);
  const auto h1_hat = oracle::mlp_eval(s.stage2, h1);
  std::vector<double> expect(5);
  for (std::size_t r = 0; r < 5; ++r) {
    expect[r] = s.stage1.W_dec(r, 50);
    for (std::size_t c = 0; c < 50; ++c) expect[r] += s.stage1.W_dec(r, c) * h1_hat[c];
  }
  const auto got = s.reconstruct(x);
  for (std::size_t r = 0; r < 5; ++r) EXPECT_NEAR(got[r], expect[r], 1e-12);
}
