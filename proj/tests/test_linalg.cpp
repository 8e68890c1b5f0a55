#include <gtest/gtest.h>

#include <thread>

#include "treecoder/linalg.hpp"
#include "treecoder/parallel.hpp"

using namespace treecoder;

TEST(Linalg, MatrixIsRowMajor) {
  Matrix<double> m(2, 3);
  m(1, 2) = 5;
  EXPECT_EQ(m.flat()[5], 5);
  EXPECT_EQ(m.row(1)[2], 5);
  EXPECT_EQ(m.size(), 6u);
}

TEST(Linalg, Kernels) {
  Matrix<double> m(2, 3);
  double v = 1;
  for (double& e : m.flat()) e = v++;
  const std::vector<double> x{1, 0, -1};
  std::vector<double> y(2);
  gemv<double>(m, x, y);
  EXPECT_EQ(y, (std::vector<double>{-2, -2}));

  std::vector<double> t{1, 1, 1};
  gemv_t_add<double>(m, std::vector<double>{1, 2}, t);
  EXPECT_EQ(t, (std::vector<double>{10, 13, 16}));

  EXPECT_EQ(dot<double>(x, std::vector<double>{3, 4, 5}), -2);

  std::vector<double> z{1, 1, 1};
  axpy<double>(2.0, x, z);
  EXPECT_EQ(z, (std::vector<double>{3, 1, -1}));

  Matrix<double> r(2, 2);
  rank1_add<double>(0.5, std::vector<double>{2, 4}, std::vector<double>{1, 3}, r);
  EXPECT_EQ(r.flat()[0], 1);
  EXPECT_EQ(r.flat()[3], 6);

  EXPECT_EQ(squared_distance<double>(x, std::vector<double>{0, 0, 0}), 2);
  EXPECT_EQ(augment<double>(x), (std::vector<double>{1, 0, -1, 1}));
  EXPECT_TRUE(all_finite<double>(x));
  EXPECT_FALSE(all_finite<double>(std::vector<double>{1, NAN}));
}

TEST(Parallel, EveryIndexVisitedOnce) {
  for (std::size_t threads : {1u, 2u, 3u, 8u}) {
    std::vector<int> hits(101, 0);
    parallel_for(hits.size(), threads, [&](std::size_t i) { hits[i]++; });
    for (int h : hits) EXPECT_EQ(h, 1);
  }
}

TEST(Parallel, ExceptionsPropagate) {
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 7) throw std::runtime_error("boom");
               }),
               std::runtime_error);
}
