#pragma once

#include <concepts>
#include <cstdint>
#include <random>

#include "treecoder/dataset.hpp"
#include "treecoder/errors.hpp"

namespace treecoder {

template <std::floating_point T>
struct SyntheticClusters {
  Dataset<T> data;
  Matrix<T> centers;  // n_clusters x dim
};

/// Centers uniform in [-1, 1]^dim; each point is its center plus
/// Normal(0, spread^2) noise. Points are grouped by cluster; label = cluster.
template <std::floating_point T = double>
SyntheticClusters<T> make_synthetic_clusters(std::size_t n_clusters, std::size_t points_per_cluster,
                                             std::size_t dim, T spread, std::uint64_t seed) {
  if (n_clusters < 1 || points_per_cluster < 1 || dim < 1)
    throw InputError("cluster count, points per cluster and dimension must be at least 1");
  if (!(spread >= T{0})) throw InputError("spread must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<T> uniform(T{-1}, T{1});
  std::normal_distribution<T> normal(T{0}, T{1});

  SyntheticClusters<T> out;
  out.centers = Matrix<T>(n_clusters, dim);
  for (T& v : out.centers.flat()) v = uniform(rng);

  out.data = Dataset<T>(Matrix<T>(n_clusters * points_per_cluster, dim));
  std::vector<int> labels;
  labels.reserve(out.data.size());
  std::size_t row = 0;
  for (std::size_t c = 0; c < n_clusters; ++c) {
    for (std::size_t p = 0; p < points_per_cluster; ++p, ++row) {
      auto x = out.data.instances.row(row);
      const auto center = out.centers.row(c);
      for (std::size_t j = 0; j < dim; ++j) x[j] = center[j] + spread * normal(rng);
      labels.push_back(static_cast<int>(c));
    }
  }
  out.data.labels = std::move(labels);
  return out;
}

}  // namespace treecoder
