#pragma once

#include <algorithm>
#include <concepts>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treecoder/errors.hpp"
#include "treecoder/linalg.hpp"

namespace treecoder {

/// Dense N x d instance matrix with optional class labels and per-dimension
/// normalizers (raw value = stored value * dim_scale[j]).
template <std::floating_point T>
struct Dataset {
  Matrix<T> instances;
  std::optional<std::vector<int>> labels;
  std::optional<Vector<T>> dim_scale;

  Dataset() = default;
  explicit Dataset(Matrix<T> x) : instances(std::move(x)) {}

  std::size_t size() const { return instances.rows(); }
  std::size_t dim() const { return instances.cols(); }
  bool empty() const { return size() == 0; }
  bool has_labels() const { return labels.has_value(); }

  std::span<const T> instance(std::size_t i) const { return instances.row(i); }

  int num_classes() const {
    if (!labels || labels->empty()) return 0;
    return *std::max_element(labels->begin(), labels->end()) + 1;
  }

  void attach_labels(std::vector<int> l) {
    if (l.size() != size())
      throw PairingError("label count " + std::to_string(l.size()) + " does not match instance count " +
                         std::to_string(size()));
    for (int c : l)
      if (c < 0) throw PairingError("negative class label");
    labels = std::move(l);
  }

  /// Instances (and labels) at the given positions, in that order.
  Dataset subset(std::span<const std::size_t> rows) const {
    Dataset out(Matrix<T>(rows.size(), dim()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      auto src = instance(rows[r]);
      std::copy(src.begin(), src.end(), out.instances.row(r).begin());
    }
    if (labels) {
      std::vector<int> l;
      l.reserve(rows.size());
      for (auto r : rows) l.push_back((*labels)[r]);
      out.labels = std::move(l);
    }
    out.dim_scale = dim_scale;
    return out;
  }

  Dataset head(std::size_t n) const {
    std::vector<std::size_t> rows(std::min(n, size()));
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
    return subset(rows);
  }
};

}  // namespace treecoder
