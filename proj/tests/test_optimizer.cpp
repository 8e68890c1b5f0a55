#include <gtest/gtest.h>

#include <random>

#include "treecoder/optimizer.hpp"

using namespace treecoder;

TEST(AdaGrad, ZeroGradientChangesNothing) {
  std::vector<double> p{1, -2}, G{0.5, 0};
  adagrad_update<double>(p, std::vector<double>{0, 0}, G, 0.1);
  EXPECT_EQ(p, (std::vector<double>{1, -2}));
  EXPECT_EQ(G, (std::vector<double>{0.5, 0}));
}

TEST(AdaGrad, FirstStepHasLearningRateMagnitude) {
  for (double g : {3.0, -0.2, 1e-3}) {
    std::vector<double> p{0}, G{0};
    adagrad_update<double>(p, std::vector<double>{g}, G, 0.05);
    EXPECT_DOUBLE_EQ(p[0], -0.05 * g / (std::abs(g) + 1e-8));
    EXPECT_NEAR(std::abs(p[0]), 0.05, 1e-6);
  }
}

TEST(AdaGrad, AccumulatorIsSumOfSquares) {
  std::vector<double> p{0}, G{0};
  const double g = 0.3;
  for (int t = 1; t <= 50; ++t) {
    adagrad_update<double>(p, std::vector<double>{g}, G, 0.01);
    EXPECT_NEAR(G[0], t * g * g, 1e-12);
  }
}

TEST(AdaGrad, AccumulatorNeverDecreases) {
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> p(5, 0.0), G(5, 0.0), g(5);
  for (int t = 0; t < 200; ++t) {
    const auto before = G;
    for (auto& v : g) v = n(rng) * (t % 3);
    adagrad_update<double>(p, g, G, 0.1);
    for (std::size_t i = 0; i < 5; ++i) EXPECT_GE(G[i], before[i]);
  }
}

TEST(AdaGrad, TreeAccumulatorCarriesGateHistoryThroughGrowth) {
  std::mt19937_64 rng(1);
  auto t = make_random_tree<double>(2, 2, 2, LeafKind::Constant, 1.0, 1.0, rng);
  auto acc = TreeAccumulator<double>::for_tree(t);
  auto g = t.params();  // any non-zero gradient
  acc.apply(t, g, 0.1, 1e-8);
  const auto grown = split_all_leaves<double>(t, 0.01, rng);
  const auto acc2 = acc.grown_for(grown);
  EXPECT_EQ(acc2.sq_grad.splits[0], acc.sq_grad.splits[0]);
  EXPECT_EQ(acc2.sq_grad.splits.size(), 3u);
  for (std::size_t m = 1; m < 3; ++m)
    for (double v : acc2.sq_grad.splits[m].w) EXPECT_EQ(v, 0.0);
  for (const auto& l : acc2.sq_grad.leaves)
    for (double v : std::get<ConstantLeaf<double>>(l).rho) EXPECT_EQ(v, 0.0);
}

TEST(AdaGrad, ShapeMismatchThrows) {
  SoftTree<double> a(2, 2, 2, LeafKind::Constant), b(2, 2, 3, LeafKind::Constant);
  auto acc = TreeAccumulator<double>::for_tree(a);
  EXPECT_THROW(acc.apply(b, b.params(), 0.1, 1e-8), StructuralError);
}
