#pragma once

// Minimal dense kernels. Every reduction runs left to right in index order so
// results are reproducible bit-for-bit on a given build.

#include <cassert>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <type_traits>
#include <vector>

#include "treecoder/errors.hpp"

namespace treecoder {

template <std::floating_point T>
using Vector = std::vector<T>;

// Non-deduced span aliases: T comes from the other arguments, so vectors and
// spans both bind without spelling out the template argument.
template <class T>
using ConstSpan = std::span<const std::type_identity_t<T>>;
template <class T>
using MutSpan = std::span<std::type_identity_t<T>>;

/// Row-major dense matrix.
template <std::floating_point T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  T operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  MutSpan<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  ConstSpan<T> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  MutSpan<T> flat() { return data_; }
  ConstSpan<T> flat() const { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <std::floating_point T>
T dot(ConstSpan<T> a, ConstSpan<T> b) {
  assert(a.size() == b.size());
  T s{0};
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// y += alpha * x
template <std::floating_point T>
void axpy(T alpha, ConstSpan<T> x, MutSpan<T> y) {
  assert(x.size() == y.size());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

// y = M x
template <std::floating_point T>
void gemv(const Matrix<T>& m, ConstSpan<T> x, MutSpan<T> y) {
  assert(m.cols() == x.size() && m.rows() == y.size());
  for (std::size_t r = 0; r < m.rows(); ++r) y[r] = dot<T>(m.row(r), x);
}

// y += M^T x
template <std::floating_point T>
void gemv_t_add(const Matrix<T>& m, ConstSpan<T> x, MutSpan<T> y) {
  assert(m.rows() == x.size() && m.cols() == y.size());
  for (std::size_t r = 0; r < m.rows(); ++r) axpy<T>(x[r], m.row(r), y);
}

// M += alpha * a b^T
template <std::floating_point T>
void rank1_add(T alpha, ConstSpan<T> a, ConstSpan<T> b, Matrix<T>& m) {
  assert(m.rows() == a.size() && m.cols() == b.size());
  for (std::size_t r = 0; r < m.rows(); ++r) axpy<T>(alpha * a[r], b, m.row(r));
}

template <std::floating_point T>
bool all_finite(ConstSpan<T> v) {
  for (T x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

template <std::floating_point T>
T squared_distance(ConstSpan<T> a, ConstSpan<T> b) {
  assert(a.size() == b.size());
  T s{0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const T d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// Input with a constant 1 appended for the bias weight.
template <std::floating_point T>
Vector<T> augment(ConstSpan<T> x) {
  Vector<T> out(x.begin(), x.end());
  out.push_back(T{1});
  return out;
}

}  // namespace treecoder
