#pragma once

// Soft multivariate decision tree.
//
// Every internal node m routes its input to both children, weighting the left
// subtree by g_m(x) = sigmoid(w_m . [x, 1]) and the right by 1 - g_m(x). The
// tree response is the gate-weighted average of leaf responses, where a leaf
// holds either a constant vector rho or a linear map V applied to [x, 1].
//
// Nodes live in a level-order array of a complete binary tree: children of
// node m are 2m+1 and 2m+2, the first num_internal() indices are internal.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "treecoder/errors.hpp"
#include "treecoder/linalg.hpp"

namespace treecoder {

enum class LeafKind { Constant, Linear };

inline const char* to_string(LeafKind k) { return k == LeafKind::Constant ? "constant" : "linear"; }

inline LeafKind leaf_kind_from_string(const std::string& s) {
  if (s == "constant") return LeafKind::Constant;
  if (s == "linear") return LeafKind::Linear;
  throw InputError("unknown leaf kind '" + s + "' (expected constant or linear)");
}

template <std::floating_point T>
struct GatingSplit {
  Vector<T> w;  // d_in weights followed by the bias weight
  friend bool operator==(const GatingSplit&, const GatingSplit&) = default;
};

template <std::floating_point T>
struct ConstantLeaf {
  Vector<T> rho;
  friend bool operator==(const ConstantLeaf&, const ConstantLeaf&) = default;
};

template <std::floating_point T>
struct LinearLeaf {
  Matrix<T> V;  // d_out x (d_in + 1)
  friend bool operator==(const LinearLeaf&, const LinearLeaf&) = default;
};

template <std::floating_point T>
using LeafModel = std::variant<ConstantLeaf<T>, LinearLeaf<T>>;

template <std::floating_point T>
MutSpan<T> param_span(LeafModel<T>& leaf) {
  return std::visit(
      [](auto& l) -> MutSpan<T> {
        if constexpr (std::is_same_v<std::decay_t<decltype(l)>, ConstantLeaf<T>>)
          return l.rho;
        else
          return l.V.flat();
      },
      leaf);
}

template <std::floating_point T>
ConstSpan<T> param_span(const LeafModel<T>& leaf) {
  return param_span<T>(const_cast<LeafModel<T>&>(leaf));
}

/// The parameter set of one tree: gate weights and leaf models. Gradients and
/// optimizer accumulators use the same type so their shapes always mirror the
/// tree they belong to.
template <std::floating_point T>
struct TreeParams {
  std::vector<GatingSplit<T>> splits;
  std::vector<LeafModel<T>> leaves;

  /// Every parameter block in canonical order: splits, then leaves.
  std::vector<MutSpan<T>> blocks() {
    std::vector<MutSpan<T>> out;
    out.reserve(splits.size() + leaves.size());
    for (auto& s : splits) out.emplace_back(s.w);
    for (auto& l : leaves) out.push_back(param_span<T>(l));
    return out;
  }
  std::vector<ConstSpan<T>> blocks() const {
    std::vector<ConstSpan<T>> out;
    out.reserve(splits.size() + leaves.size());
    for (const auto& s : splits) out.emplace_back(s.w);
    for (const auto& l : leaves) out.push_back(param_span<T>(l));
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto b : blocks()) n += b.size();
    return n;
  }

  /// Same shapes, every entry zero.
  TreeParams zeros_like() const {
    TreeParams z = *this;
    for (auto b : z.blocks()) std::fill(b.begin(), b.end(), T{0});
    return z;
  }

  friend bool operator==(const TreeParams&, const TreeParams&) = default;
};

template <std::floating_point T>
using ParamGrads = TreeParams<T>;

template <std::floating_point T>
class SoftTree {
 public:
  SoftTree() = default;

  /// All-zero tree of the given shape. depth 1 is a single leaf.
  SoftTree(std::size_t input_dim, std::size_t output_dim, std::size_t depth, LeafKind kind)
      : input_dim_(input_dim), output_dim_(output_dim), depth_(depth), kind_(kind) {
    if (depth < 1) throw StructuralError("tree depth must be at least 1");
    if (input_dim < 1 || output_dim < 1) throw StructuralError("tree dimensions must be positive");
    if (depth > 30) throw StructuralError("tree depth too large");
    params_.splits.assign(num_internal(), GatingSplit<T>{Vector<T>(input_dim + 1, T{0})});
    params_.leaves.reserve(num_leaves());
    for (std::size_t l = 0; l < num_leaves(); ++l) params_.leaves.push_back(zero_leaf());
  }

  /// Adopt an existing parameter set, checking every shape.
  SoftTree(std::size_t input_dim, std::size_t output_dim, std::size_t depth, LeafKind kind,
           TreeParams<T> params)
      : SoftTree(input_dim, output_dim, depth, kind) {
    check_shapes(params);
    params_ = std::move(params);
  }

  std::size_t input_dim() const { return input_dim_; }
  std::size_t output_dim() const { return output_dim_; }
  std::size_t depth() const { return depth_; }
  LeafKind leaf_kind() const { return kind_; }

  std::size_t num_leaves() const { return std::size_t{1} << (depth_ - 1); }
  std::size_t num_internal() const { return num_leaves() - 1; }
  std::size_t num_nodes() const { return 2 * num_leaves() - 1; }

  static std::size_t left_child(std::size_t m) { return 2 * m + 1; }
  static std::size_t right_child(std::size_t m) { return 2 * m + 2; }
  static std::size_t parent(std::size_t m) { return (m - 1) / 2; }
  bool is_leaf(std::size_t m) const { return m >= num_internal(); }
  std::size_t leaf_index(std::size_t node) const { return node - num_internal(); }
  std::size_t leaf_node(std::size_t leaf) const { return leaf + num_internal(); }

  GatingSplit<T>& split(std::size_t m) { return params_.splits.at(m); }
  const GatingSplit<T>& split(std::size_t m) const { return params_.splits.at(m); }
  LeafModel<T>& leaf(std::size_t l) { return params_.leaves.at(l); }
  const LeafModel<T>& leaf(std::size_t l) const { return params_.leaves.at(l); }

  TreeParams<T>& params() { return params_; }
  const TreeParams<T>& params() const { return params_; }

  /// Leaf response at an augmented input.
  void leaf_response(std::size_t l, ConstSpan<T> x_aug, MutSpan<T> out) const {
    const auto& lm = params_.leaves[l];
    if (const auto* c = std::get_if<ConstantLeaf<T>>(&lm)) {
      std::copy(c->rho.begin(), c->rho.end(), out.begin());
    } else {
      gemv<T>(std::get<LinearLeaf<T>>(lm).V, x_aug, out);
    }
  }

  void check_shapes(const TreeParams<T>& p) const {
    if (p.splits.size() != num_internal() || p.leaves.size() != num_leaves())
      throw StructuralError("parameter node count does not match tree depth");
    for (const auto& s : p.splits)
      if (s.w.size() != input_dim_ + 1) throw StructuralError("gating weight length mismatch");
    for (const auto& l : p.leaves) {
      if (kind_ == LeafKind::Constant) {
        const auto* c = std::get_if<ConstantLeaf<T>>(&l);
        if (!c) throw StructuralError("mixed leaf kinds in one tree");
        if (c->rho.size() != output_dim_) throw StructuralError("leaf response length mismatch");
      } else {
        const auto* lin = std::get_if<LinearLeaf<T>>(&l);
        if (!lin) throw StructuralError("mixed leaf kinds in one tree");
        if (lin->V.rows() != output_dim_ || lin->V.cols() != input_dim_ + 1)
          throw StructuralError("linear leaf shape mismatch");
      }
    }
  }

  friend bool operator==(const SoftTree&, const SoftTree&) = default;

 private:
  LeafModel<T> zero_leaf() const {
    if (kind_ == LeafKind::Constant) return ConstantLeaf<T>{Vector<T>(output_dim_, T{0})};
    return LinearLeaf<T>{Matrix<T>(output_dim_, input_dim_ + 1)};
  }

  std::size_t input_dim_ = 1;
  std::size_t output_dim_ = 1;
  std::size_t depth_ = 1;
  LeafKind kind_ = LeafKind::Constant;
  TreeParams<T> params_;
};

/// Cached per-node quantities from one forward pass.
template <std::floating_point T>
struct ForwardTrace {
  Vector<T> x_aug;  // input with trailing 1
  Vector<T> gate;   // g[m] for internal nodes
  Matrix<T> y;      // subtree output per node, num_nodes x d_out

  ConstSpan<T> output() const { return y.row(0); }
};

inline constexpr double kLogitClamp = 500.0;

template <std::floating_point T>
T sigmoid(T logit) {
  const T z = std::clamp(logit, T(-kLogitClamp), T(kLogitClamp));
  return T{1} / (T{1} + std::exp(-z));
}

template <std::floating_point T>
T gating_value(const GatingSplit<T>& split, ConstSpan<T> x_aug) {
  if (split.w.size() != x_aug.size())
    throw StructuralError("gating weights have length " + std::to_string(split.w.size()) +
                          " but augmented input has length " + std::to_string(x_aug.size()));
  return sigmoid(dot<T>(split.w, x_aug));
}

namespace detail {

template <std::floating_point T>
void check_input(const SoftTree<T>& tree, ConstSpan<T> x) {
  if (x.size() != tree.input_dim())
    throw StructuralError("input has length " + std::to_string(x.size()) + ", tree expects " +
                          std::to_string(tree.input_dim()));
  if (!all_finite<T>(x)) throw InputError("non-finite value in tree input");
}

template <std::floating_point T>
void check_trace(const SoftTree<T>& tree, const ForwardTrace<T>& trace, ConstSpan<T> delta_root) {
  if (trace.gate.size() != tree.num_internal() || trace.y.rows() != tree.num_nodes() ||
      trace.y.cols() != tree.output_dim() || trace.x_aug.size() != tree.input_dim() + 1)
    throw StructuralError("forward trace does not match tree shape");
  if (delta_root.size() != tree.output_dim())
    throw StructuralError("root responsibility length does not match tree output");
}

// Responsibilities for every node, root to leaves.
template <std::floating_point T>
Matrix<T> responsibilities(const SoftTree<T>& tree, const ForwardTrace<T>& trace,
                           ConstSpan<T> delta_root) {
  Matrix<T> delta(tree.num_nodes(), tree.output_dim());
  std::copy(delta_root.begin(), delta_root.end(), delta.row(0).begin());
  for (std::size_t m = 0; m < tree.num_internal(); ++m) {
    const T g = trace.gate[m];
    auto dm = delta.row(m);
    auto dl = delta.row(SoftTree<T>::left_child(m));
    auto dr = delta.row(SoftTree<T>::right_child(m));
    for (std::size_t j = 0; j < dm.size(); ++j) {
      dl[j] = g * dm[j];
      dr[j] = (T{1} - g) * dm[j];
    }
  }
  return delta;
}

// g_m (1 - g_m) delta_m . (y_left - y_right) for an internal node.
template <std::floating_point T>
T gate_coefficient(const ForwardTrace<T>& trace, const Matrix<T>& delta, std::size_t m) {
  const auto yl = trace.y.row(SoftTree<T>::left_child(m));
  const auto yr = trace.y.row(SoftTree<T>::right_child(m));
  const auto dm = delta.row(m);
  T s{0};
  for (std::size_t j = 0; j < dm.size(); ++j) s += dm[j] * (yl[j] - yr[j]);
  const T g = trace.gate[m];
  return g * (T{1} - g) * s;
}

}  // namespace detail

/// Evaluates the tree bottom-up and records every gate and subtree output.
template <std::floating_point T>
ForwardTrace<T> tree_forward(const SoftTree<T>& tree, ConstSpan<T> x) {
  detail::check_input(tree, x);
  ForwardTrace<T> tr;
  tr.x_aug = augment<T>(x);
  tr.gate.resize(tree.num_internal());
  tr.y = Matrix<T>(tree.num_nodes(), tree.output_dim());
  for (std::size_t l = 0; l < tree.num_leaves(); ++l)
    tree.leaf_response(l, tr.x_aug, tr.y.row(tree.leaf_node(l)));
  for (std::size_t m = tree.num_internal(); m-- > 0;) {
    const T g = gating_value(tree.split(m), tr.x_aug);
    tr.gate[m] = g;
    auto ym = tr.y.row(m);
    const auto yl = tr.y.row(SoftTree<T>::left_child(m));
    const auto yr = tr.y.row(SoftTree<T>::right_child(m));
    for (std::size_t j = 0; j < ym.size(); ++j) ym[j] = g * yl[j] + (T{1} - g) * yr[j];
  }
  return tr;
}

template <std::floating_point T>
Vector<T> tree_output(const SoftTree<T>& tree, ConstSpan<T> x) {
  auto tr = tree_forward(tree, x);
  auto out = tr.output();
  return {out.begin(), out.end()};
}

/// Soft membership of every node: product of gate values along its root path.
template <std::floating_point T>
Vector<T> node_path_weights(const SoftTree<T>& tree, const ForwardTrace<T>& trace) {
  Vector<T> w(tree.num_nodes());
  w[0] = T{1};
  for (std::size_t m = 0; m < tree.num_internal(); ++m) {
    w[SoftTree<T>::left_child(m)] = w[m] * trace.gate[m];
    w[SoftTree<T>::right_child(m)] = w[m] * (T{1} - trace.gate[m]);
  }
  return w;
}

template <std::floating_point T>
Vector<T> leaf_path_weights(const SoftTree<T>& tree, ConstSpan<T> x) {
  const auto all = node_path_weights(tree, tree_forward(tree, x));
  return {all.begin() + static_cast<std::ptrdiff_t>(tree.num_internal()), all.end()};
}

/// Gradient of the loss with respect to every tree parameter, given
/// delta_root = dE/dy at the root (prediction minus target for squared error).
template <std::floating_point T>
ParamGrads<T> backward_parameters(const SoftTree<T>& tree, const ForwardTrace<T>& trace,
                                  ConstSpan<T> delta_root) {
  detail::check_trace(tree, trace, delta_root);
  const auto delta = detail::responsibilities(tree, trace, delta_root);
  ParamGrads<T> grads = tree.params().zeros_like();
  for (std::size_t m = 0; m < tree.num_internal(); ++m) {
    const T coef = detail::gate_coefficient(trace, delta, m);
    auto& gw = grads.splits[m].w;
    for (std::size_t i = 0; i < gw.size(); ++i) gw[i] = coef * trace.x_aug[i];
  }
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    const auto dl = delta.row(tree.leaf_node(l));
    if (auto* c = std::get_if<ConstantLeaf<T>>(&grads.leaves[l])) {
      std::copy(dl.begin(), dl.end(), c->rho.begin());
    } else {
      rank1_add<T>(T{1}, dl, trace.x_aug, std::get<LinearLeaf<T>>(grads.leaves[l]).V);
    }
  }
  return grads;
}

/// Gradient of the loss with respect to the (unaugmented) tree input.
template <std::floating_point T>
Vector<T> backward_input(const SoftTree<T>& tree, const ForwardTrace<T>& trace,
                         ConstSpan<T> delta_root) {
  detail::check_trace(tree, trace, delta_root);
  const auto delta = detail::responsibilities(tree, trace, delta_root);
  Vector<T> dx(tree.input_dim() + 1, T{0});
  for (std::size_t m = 0; m < tree.num_internal(); ++m) {
    const T coef = detail::gate_coefficient(trace, delta, m);
    axpy<T>(coef, tree.split(m).w, dx);
  }
  if (tree.leaf_kind() == LeafKind::Linear) {
    for (std::size_t l = 0; l < tree.num_leaves(); ++l)
      gemv_t_add<T>(std::get<LinearLeaf<T>>(tree.leaf(l)).V, delta.row(tree.leaf_node(l)), dx);
  }
  dx.pop_back();  // bias coordinate
  return dx;
}

/// Grows the tree by one level. Each old leaf becomes a gate with weights
/// drawn from Normal(0, init_scale^2); both new children copy the old leaf's
/// parameters plus Normal(0, noise_scale^2) noise.
///
/// Draw order per old leaf (level order): gate weights, left child noise,
/// right child noise. Every draw is a standard normal scaled afterwards, so
/// the stream consumption does not depend on the scales.
template <std::floating_point T, class Rng>
SoftTree<T> split_all_leaves(const SoftTree<T>& tree, T noise_scale, Rng& rng, T init_scale = T(0.01)) {
  if (!(noise_scale >= T{0}) || !(init_scale >= T{0}))
    throw InputError("growth noise and gate scales must be non-negative");
  std::normal_distribution<T> normal(T{0}, T{1});
  SoftTree<T> grown(tree.input_dim(), tree.output_dim(), tree.depth() + 1, tree.leaf_kind());
  auto& gp = grown.params();
  for (std::size_t m = 0; m < tree.num_internal(); ++m) gp.splits[m] = tree.split(m);
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    auto& gate = gp.splits[tree.leaf_node(l)].w;
    for (auto& v : gate) v = init_scale * normal(rng);
    for (std::size_t child = 0; child < 2; ++child) {
      LeafModel<T> copy = tree.leaf(l);
      for (auto& v : param_span<T>(copy)) v += noise_scale * normal(rng);
      gp.leaves[2 * l + child] = std::move(copy);
    }
  }
  return grown;
}

/// Sum over leaves of path weight times leaf response, with each path product
/// formed by walking down from the root. Independent of the bottom-up
/// recursion in tree_forward; used to cross-check it.
template <std::floating_point T>
Vector<T> forward_by_path_enumeration(const SoftTree<T>& tree, ConstSpan<T> x) {
  detail::check_input(tree, x);
  const auto x_aug = augment<T>(x);
  const std::size_t depth = tree.depth();
  Vector<T> out(tree.output_dim(), T{0});
  Vector<T> response(tree.output_dim());
  for (std::size_t l = 0; l < tree.num_leaves(); ++l) {
    T weight{1};
    std::size_t node = 0;
    // Bits of the leaf index, most significant first, give the turns (0 = left).
    for (std::size_t level = depth - 1; level-- > 0;) {
      const bool right = (l >> level) & 1U;
      const T g = gating_value(tree.split(node), x_aug);
      weight *= right ? (T{1} - g) : g;
      node = right ? SoftTree<T>::right_child(node) : SoftTree<T>::left_child(node);
    }
    tree.leaf_response(tree.leaf_index(node), x_aug, response);
    axpy<T>(weight, response, out);
  }
  return out;
}

/// Random tree: gates from Normal(0, gate_scale^2), leaf entries from
/// Normal(0, leaf_scale^2).
template <std::floating_point T, class Rng>
SoftTree<T> make_random_tree(std::size_t input_dim, std::size_t output_dim, std::size_t depth, LeafKind kind,
                             T gate_scale, T leaf_scale, Rng& rng) {
  SoftTree<T> tree(input_dim, output_dim, depth, kind);
  std::normal_distribution<T> normal(T{0}, T{1});
  for (auto& s : tree.params().splits)
    for (auto& v : s.w) v = gate_scale * normal(rng);
  for (auto& l : tree.params().leaves)
    for (auto& v : param_span<T>(l)) v = leaf_scale * normal(rng);
  return tree;
}

}  // namespace treecoder
