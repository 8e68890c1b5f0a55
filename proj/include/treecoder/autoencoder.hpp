#pragma once

// Autoencoder made of two soft trees: the encoder maps x (d) to a code h (k),
// the decoder maps h back to a reconstruction of x. Both are trained jointly
// by online AdaGrad on the squared reconstruction error, starting at depth 2
// and splitting every leaf of both trees on a fixed epoch schedule.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "treecoder/dataset.hpp"
#include "treecoder/errors.hpp"
#include "treecoder/optimizer.hpp"
#include "treecoder/parallel.hpp"
#include "treecoder/soft_tree.hpp"

namespace treecoder {

using Rng = std::mt19937_64;

template <std::floating_point T>
struct TrainConfig {
  std::size_t total_epochs = 240;
  std::size_t grow_every = 40;
  std::size_t initial_depth = 2;
  std::size_t max_depth = 6;
  T learning_rate = T(0.01);
  T l2_strength = T(1e-4);
  T noise_scale = T(0.01);
  // Std. dev. of freshly drawn gate weights, at start and at every split.
  T init_scale = T(0.01);
  // Std. dev. of the initial leaf parameters.
  T leaf_init_scale = T(0.1);
  T epsilon = T(kAdaGradEpsilon);
  std::uint64_t seed = 0;
  LeafKind leaf_kind = LeafKind::Constant;
  std::size_t latent_dim = 2;

  void validate() const {
    if (total_epochs < 1) throw InputError("total_epochs must be at least 1");
    if (grow_every < 1) throw InputError("grow_every must be at least 1");
    if (initial_depth < 1) throw InputError("initial_depth must be at least 1");
    if (max_depth < 2) throw InputError("max_depth must be at least 2");
    if (max_depth < initial_depth) throw InputError("max_depth is below the initial depth");
    if (latent_dim < 1) throw InputError("latent dimension must be at least 1");
    if (!(learning_rate > T{0})) throw InputError("learning_rate must be positive");
    if (!(l2_strength >= T{0})) throw InputError("l2 strength must be non-negative");
    if (!(noise_scale >= T{0}) || !(init_scale >= T{0}) || !(leaf_init_scale >= T{0}))
      throw InputError("initialization scales must be non-negative");
    if (!(epsilon > T{0})) throw InputError("epsilon must be positive");
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_error = 0;
  double test_error = 0;
  std::size_t depth = 0;
  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using TrainHistory = std::vector<EpochRecord>;

template <std::floating_point T>
struct AutoencoderPair {
  SoftTree<T> encoder;  // d -> k
  SoftTree<T> decoder;  // k -> d

  AutoencoderPair() = default;
  AutoencoderPair(SoftTree<T> enc, SoftTree<T> dec) : encoder(std::move(enc)), decoder(std::move(dec)) {
    if (encoder.output_dim() != decoder.input_dim())
      throw StructuralError("encoder output dimension does not match decoder input dimension");
    if (encoder.input_dim() != decoder.output_dim())
      throw StructuralError("decoder output dimension does not match encoder input dimension");
  }

  /// Fresh depth-`cfg.initial_depth` pair for d-dimensional data.
  static AutoencoderPair initial(std::size_t data_dim, const TrainConfig<T>& cfg, Rng& rng) {
    cfg.validate();
    auto enc = make_random_tree<T>(data_dim, cfg.latent_dim, cfg.initial_depth, cfg.leaf_kind, cfg.init_scale,
                                   cfg.leaf_init_scale, rng);
    auto dec = make_random_tree<T>(cfg.latent_dim, data_dim, cfg.initial_depth, cfg.leaf_kind, cfg.init_scale,
                                   cfg.leaf_init_scale, rng);
    return {std::move(enc), std::move(dec)};
  }

  std::size_t data_dim() const { return encoder.input_dim(); }
  std::size_t latent_dim() const { return encoder.output_dim(); }

  friend bool operator==(const AutoencoderPair&, const AutoencoderPair&) = default;
};

template <std::floating_point T>
struct Reconstruction {
  ForwardTrace<T> encoder_trace;
  ForwardTrace<T> decoder_trace;

  ConstSpan<T> code() const { return encoder_trace.output(); }
  ConstSpan<T> output() const { return decoder_trace.output(); }
};

template <std::floating_point T>
Reconstruction<T> reconstruct(const AutoencoderPair<T>& pair, ConstSpan<T> x) {
  Reconstruction<T> r;
  r.encoder_trace = tree_forward(pair.encoder, x);
  r.decoder_trace = tree_forward(pair.decoder, r.encoder_trace.output());
  return r;
}

/// 1/2 ||x - x_hat||^2.
template <std::floating_point T>
T instance_loss(const AutoencoderPair<T>& pair, ConstSpan<T> x) {
  const auto r = reconstruct(pair, x);
  return squared_distance<T>(x, r.output()) / T{2};
}

template <std::floating_point T>
struct PairGrads {
  ParamGrads<T> encoder;
  ParamGrads<T> decoder;
  Vector<T> code_grad;  // dE/dh passed from decoder to encoder
  T loss{0};
};

/// Gradients of 1/2||x - x_hat||^2 + l2/2 ||theta||^2 for both trees.
template <std::floating_point T>
PairGrads<T> pair_gradients(const AutoencoderPair<T>& pair, ConstSpan<T> x, T l2_strength) {
  const auto r = reconstruct(pair, x);
  const auto x_hat = r.output();
  Vector<T> delta(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) delta[j] = x_hat[j] - x[j];

  PairGrads<T> out;
  out.loss = squared_distance<T>(x, x_hat) / T{2};
  out.decoder = backward_parameters(pair.decoder, r.decoder_trace, ConstSpan<T>(delta));
  out.code_grad = backward_input(pair.decoder, r.decoder_trace, ConstSpan<T>(delta));
  out.encoder = backward_parameters(pair.encoder, r.encoder_trace, ConstSpan<T>(out.code_grad));

  if (l2_strength > T{0}) {
    auto add_l2 = [&](ParamGrads<T>& g, const SoftTree<T>& tree) {
      auto gb = g.blocks();
      auto pb = tree.params().blocks();
      for (std::size_t b = 0; b < gb.size(); ++b) axpy<T>(l2_strength, pb[b], gb[b]);
    };
    add_l2(out.encoder, pair.encoder);
    add_l2(out.decoder, pair.decoder);
  }
  return out;
}

template <std::floating_point T>
struct OptimizerState {
  TreeAccumulator<T> encoder;
  TreeAccumulator<T> decoder;
  T epsilon = T(kAdaGradEpsilon);

  static OptimizerState for_pair(const AutoencoderPair<T>& pair, T epsilon = T(kAdaGradEpsilon)) {
    return {TreeAccumulator<T>::for_tree(pair.encoder), TreeAccumulator<T>::for_tree(pair.decoder), epsilon};
  }
};

namespace detail {

template <std::floating_point T>
bool grads_finite(const ParamGrads<T>& g) {
  for (auto b : g.blocks())
    if (!all_finite<T>(b)) return false;
  return true;
}

}  // namespace detail

/// One online update on a single instance. Returns the loss before the update.
template <std::floating_point T>
T train_step(AutoencoderPair<T>& pair, ConstSpan<T> x, OptimizerState<T>& opt, const TrainConfig<T>& cfg) {
  auto g = pair_gradients(pair, x, cfg.l2_strength);
  if (!std::isfinite(g.loss) || !detail::grads_finite(g.encoder) || !detail::grads_finite(g.decoder))
    throw TrainingDiverged("non-finite loss or gradient (loss = " + std::to_string(g.loss) +
                           ", encoder depth " + std::to_string(pair.encoder.depth()) + ")");
  opt.decoder.apply(pair.decoder, g.decoder, cfg.learning_rate, opt.epsilon);
  opt.encoder.apply(pair.encoder, g.encoder, cfg.learning_rate, opt.epsilon);
  return g.loss;
}

enum class ErrorScale { PerPixel, PerWord };

/// Per-dimension RMSE: sqrt(sum_i ||x_i - x_hat_i||^2 / (N d)). For PerWord the
/// data must carry the per-word normalizers it was divided by.
template <std::floating_point T>
double evaluate(const AutoencoderPair<T>& pair, const Dataset<T>& data, ErrorScale scale = ErrorScale::PerPixel,
                std::size_t threads = 1) {
  if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
  if (data.dim() != pair.data_dim()) throw StructuralError("dataset dimension does not match the model");
  if (scale == ErrorScale::PerWord && !data.dim_scale)
    throw InputError("per-word error needs max-count normalized data");
  std::vector<double> sq(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto x = data.instance(i);
    sq[i] = static_cast<double>(squared_distance<T>(x, reconstruct(pair, x).output()));
  });
  double total = 0;
  for (double v : sq) total += v;
  return std::sqrt(total / (static_cast<double>(data.size()) * static_cast<double>(data.dim())));
}

template <std::floating_point T>
struct TrainCallbacks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Called with the pair as it stands right before both trees are split.
  std::function<void(const AutoencoderPair<T>&, std::size_t epoch)> before_growth;
};

/// Grows both trees by one level and extends the optimizer state to match.
template <std::floating_point T>
void grow_pair(AutoencoderPair<T>& pair, OptimizerState<T>& opt, const TrainConfig<T>& cfg, Rng& rng) {
  pair.encoder = split_all_leaves(pair.encoder, cfg.noise_scale, rng, cfg.init_scale);
  pair.decoder = split_all_leaves(pair.decoder, cfg.noise_scale, rng, cfg.init_scale);
  opt.encoder = opt.encoder.grown_for(pair.encoder);
  opt.decoder = opt.decoder.grown_for(pair.decoder);
}

/// Depth in effect during a 1-based epoch under the growth schedule.
inline std::size_t scheduled_depth(std::size_t epoch, std::size_t grow_every, std::size_t initial_depth,
                                   std::size_t max_depth) {
  return std::min(max_depth, initial_depth + (epoch - 1) / grow_every);
}

/// Layer-wise online training. Both trees grow by one level after every
/// `grow_every` epochs until `max_depth`; no growth follows the last epoch.
/// The train error in each record is the per-dimension RMSE implied by the
/// pre-update instance losses of that epoch; the test error is evaluate() on
/// the frozen end-of-epoch model (NaN when the test set is empty).
template <std::floating_point T>
TrainHistory train(AutoencoderPair<T>& pair, const Dataset<T>& train_set, const Dataset<T>& test_set,
                   const TrainConfig<T>& cfg, Rng& rng, const TrainCallbacks<T>& callbacks = {},
                   std::size_t threads = 1) {
  cfg.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  if (train_set.dim() != pair.data_dim()) throw StructuralError("training data dimension does not match the model");
  if (pair.encoder.depth() != pair.decoder.depth())
    throw StructuralError("encoder and decoder depths differ");

  OptimizerState<T> opt = OptimizerState<T>::for_pair(pair, cfg.epsilon);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainHistory history;
  history.reserve(cfg.total_epochs);

  for (std::size_t epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t i : order) loss_sum += static_cast<double>(train_step(pair, train_set.instance(i), opt, cfg));

    EpochRecord rec;
    rec.epoch = epoch;
    rec.depth = pair.encoder.depth();
    rec.train_error =
        std::sqrt(2.0 * loss_sum / (static_cast<double>(train_set.size()) * static_cast<double>(train_set.dim())));
    rec.test_error = test_set.empty() ? std::nan("") : evaluate(pair, test_set, ErrorScale::PerPixel, threads);
    history.push_back(rec);
    if (callbacks.on_epoch) callbacks.on_epoch(rec);

    if (epoch % cfg.grow_every == 0 && epoch < cfg.total_epochs && pair.encoder.depth() < cfg.max_depth) {
      if (callbacks.before_growth) callbacks.before_growth(pair, epoch);
      grow_pair(pair, opt, cfg, rng);
    }
  }
  return history;
}

}  // namespace treecoder
