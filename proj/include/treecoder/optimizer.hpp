#pragma once

#include <cassert>
#include <cmath>
#include <concepts>
#include <span>

#include "treecoder/soft_tree.hpp"

namespace treecoder {

inline constexpr double kAdaGradEpsilon = 1e-8;

/// Diagonal AdaGrad step over one parameter block:
///   G += g*g;  p -= lr * g / (sqrt(G) + eps)
template <std::floating_point T>
void adagrad_update(MutSpan<T> param, ConstSpan<T> grad, MutSpan<T> accum, T learning_rate,
                    T epsilon = T(kAdaGradEpsilon)) {
  assert(param.size() == grad.size() && param.size() == accum.size());
  for (std::size_t i = 0; i < param.size(); ++i) {
    const T g = grad[i];
    accum[i] += g * g;
    param[i] -= learning_rate * g / (std::sqrt(accum[i]) + epsilon);
  }
}

/// AdaGrad accumulators for one tree, shaped like its parameters.
template <std::floating_point T>
struct TreeAccumulator {
  TreeParams<T> sq_grad;

  static TreeAccumulator for_tree(const SoftTree<T>& tree) { return {tree.params().zeros_like()}; }

  /// Accumulator for a tree grown from the one this tracked. Surviving gates
  /// keep their history; everything introduced by the growth starts at zero.
  TreeAccumulator grown_for(const SoftTree<T>& grown) const {
    TreeAccumulator out = for_tree(grown);
    for (std::size_t m = 0; m < sq_grad.splits.size(); ++m) out.sq_grad.splits[m] = sq_grad.splits[m];
    return out;
  }

  void apply(SoftTree<T>& tree, const ParamGrads<T>& grads, T learning_rate, T epsilon) {
    auto p = tree.params().blocks();
    auto g = grads.blocks();
    auto a = sq_grad.blocks();
    if (p.size() != g.size() || p.size() != a.size()) throw StructuralError("optimizer state shape mismatch");
    for (std::size_t b = 0; b < p.size(); ++b) {
      if (p[b].size() != g[b].size() || p[b].size() != a[b].size())
        throw StructuralError("optimizer state shape mismatch");
      adagrad_update<T>(p[b], g[b], a[b], learning_rate, epsilon);
    }
  }
};

}  // namespace treecoder
