#pragma once

// Perceptron autoencoder baselines: h = tanh(W [x, 1]), x_hat = W' [h, 1].
// The stacked variant first reduces to 50 dimensions, then trains a second
// autoencoder on those codes.

#include <cmath>
#include <algorithm>
#include <concepts>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <utility>

#include "treecoder/autoencoder.hpp"
#include "treecoder/dataset.hpp"
#include "treecoder/linalg.hpp"
#include "treecoder/optimizer.hpp"

namespace treecoder {

template <std::floating_point T>
struct PerceptronAutoencoder {
  Matrix<T> W;        // k x (d + 1)
  Matrix<T> W_dec;    // d x (k + 1)

  PerceptronAutoencoder() = default;
  PerceptronAutoencoder(std::size_t data_dim, std::size_t latent_dim)
      : W(latent_dim, data_dim + 1), W_dec(data_dim, latent_dim + 1) {
    if (data_dim < 1 || latent_dim < 1) throw StructuralError("perceptron dimensions must be positive");
  }

  std::size_t data_dim() const { return W.cols() - 1; }
  std::size_t latent_dim() const { return W.rows(); }

  /// Weights from Normal(0, scale^2), bias columns zero.
  static PerceptronAutoencoder random(std::size_t data_dim, std::size_t latent_dim, T scale, Rng& rng) {
    PerceptronAutoencoder m(data_dim, latent_dim);
    std::normal_distribution<T> normal(T{0}, T{1});
    for (std::size_t r = 0; r < m.W.rows(); ++r)
      for (std::size_t c = 0; c < data_dim; ++c) m.W(r, c) = scale * normal(rng);
    for (std::size_t r = 0; r < m.W_dec.rows(); ++r)
      for (std::size_t c = 0; c < latent_dim; ++c) m.W_dec(r, c) = scale * normal(rng);
    return m;
  }

  friend bool operator==(const PerceptronAutoencoder&, const PerceptronAutoencoder&) = default;
};

template <std::floating_point T>
struct MlpForward {
  Vector<T> x_aug;
  Vector<T> h_aug;  // code with trailing 1
  Vector<T> x_hat;

  ConstSpan<T> code() const { return ConstSpan<T>(h_aug).first(h_aug.size() - 1); }
};

template <std::floating_point T>
MlpForward<T> mlp_reconstruct(const PerceptronAutoencoder<T>& model, ConstSpan<T> x) {
  if (x.size() != model.data_dim())
    throw StructuralError("input has length " + std::to_string(x.size()) + ", model expects " +
                          std::to_string(model.data_dim()));
  if (!all_finite<T>(x)) throw InputError("non-finite value in perceptron input");
  MlpForward<T> f;
  f.x_aug = augment<T>(x);
  f.h_aug.assign(model.latent_dim() + 1, T{1});
  gemv<T>(model.W, f.x_aug, MutSpan<T>(f.h_aug).first(model.latent_dim()));
  for (std::size_t i = 0; i < model.latent_dim(); ++i) f.h_aug[i] = std::tanh(f.h_aug[i]);
  f.x_hat.resize(model.data_dim());
  gemv<T>(model.W_dec, f.h_aug, f.x_hat);
  return f;
}

template <std::floating_point T>
struct MlpGrads {
  Matrix<T> W;
  Matrix<T> W_dec;
  T loss{0};
};

/// Gradients of 1/2||x - x_hat||^2 + l2/2 ||weights||^2.
template <std::floating_point T>
MlpGrads<T> mlp_gradients(const PerceptronAutoencoder<T>& model, ConstSpan<T> x, T l2_strength) {
  const auto f = mlp_reconstruct(model, x);
  const std::size_t k = model.latent_dim();
  Vector<T> delta(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) delta[j] = f.x_hat[j] - x[j];

  MlpGrads<T> g{Matrix<T>(model.W.rows(), model.W.cols()), Matrix<T>(model.W_dec.rows(), model.W_dec.cols()),
                squared_distance<T>(x, f.x_hat) / T{2}};
  rank1_add<T>(T{1}, delta, f.h_aug, g.W_dec);

  Vector<T> dh(k + 1, T{0});
  gemv_t_add<T>(model.W_dec, delta, dh);
  for (std::size_t i = 0; i < k; ++i) dh[i] *= T{1} - f.h_aug[i] * f.h_aug[i];
  rank1_add<T>(T{1}, ConstSpan<T>(dh).first(k), f.x_aug, g.W);

  if (l2_strength > T{0}) {
    axpy<T>(l2_strength, model.W.flat(), g.W.flat());
    axpy<T>(l2_strength, model.W_dec.flat(), g.W_dec.flat());
  }
  return g;
}

template <std::floating_point T>
struct MlpOptimizerState {
  Matrix<T> W;
  Matrix<T> W_dec;
  T epsilon = T(kAdaGradEpsilon);

  static MlpOptimizerState for_model(const PerceptronAutoencoder<T>& m, T epsilon = T(kAdaGradEpsilon)) {
    return {Matrix<T>(m.W.rows(), m.W.cols()), Matrix<T>(m.W_dec.rows(), m.W_dec.cols()), epsilon};
  }
};

template <std::floating_point T>
T mlp_train_step(PerceptronAutoencoder<T>& model, ConstSpan<T> x, MlpOptimizerState<T>& opt,
                 const TrainConfig<T>& cfg) {
  auto g = mlp_gradients(model, x, cfg.l2_strength);
  if (!std::isfinite(g.loss) || !all_finite<T>(g.W.flat()) || !all_finite<T>(g.W_dec.flat()))
    throw TrainingDiverged("non-finite perceptron loss or gradient (loss = " + std::to_string(g.loss) + ")");
  adagrad_update<T>(model.W_dec.flat(), g.W_dec.flat(), opt.W_dec.flat(), cfg.learning_rate, opt.epsilon);
  adagrad_update<T>(model.W.flat(), g.W.flat(), opt.W.flat(), cfg.learning_rate, opt.epsilon);
  return g.loss;
}

template <std::floating_point T>
double mlp_evaluate(const PerceptronAutoencoder<T>& model, const Dataset<T>& data) {
  if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
  double total = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto x = data.instance(i);
    total += static_cast<double>(squared_distance<T>(x, mlp_reconstruct(model, x).x_hat));
  }
  return std::sqrt(total / (static_cast<double>(data.size()) * static_cast<double>(data.dim())));
}

/// Fraction of code components with |h| > threshold.
template <std::floating_point T>
double saturation_fraction(const PerceptronAutoencoder<T>& model, const Dataset<T>& data, T threshold = T(0.99)) {
  if (data.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = mlp_reconstruct(model, data.instance(i));
    for (T h : f.code()) hits += std::abs(h) > threshold;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size() * model.latent_dim());
}

template <std::floating_point T>
Dataset<T> mlp_encode(const PerceptronAutoencoder<T>& model, const Dataset<T>& data) {
  Dataset<T> out(Matrix<T>(data.size(), model.latent_dim()));
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto f = mlp_reconstruct(model, data.instance(i));
    const auto h = f.code();
    std::copy(h.begin(), h.end(), out.instances.row(i).begin());
  }
  out.labels = data.labels;
  return out;
}

/// Online AdaGrad training; records use depth 0. Train error is the RMSE
/// implied by the epoch's pre-update losses.
template <std::floating_point T>
TrainHistory train_perceptron(PerceptronAutoencoder<T>& model, const Dataset<T>& train_set,
                              const Dataset<T>& test_set, const TrainConfig<T>& cfg, Rng& rng,
                              const std::function<void(const EpochRecord&)>& on_epoch = {},
                              std::size_t epoch_offset = 0, std::size_t stage = 0) {
  cfg.validate();
  if (train_set.empty()) throw InputError("training set is empty");
  auto opt = MlpOptimizerState<T>::for_model(model, cfg.epsilon);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  TrainHistory history;
  for (std::size_t epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (std::size_t i : order) loss_sum += static_cast<double>(mlp_train_step(model, train_set.instance(i), opt, cfg));
    EpochRecord rec{epoch_offset + epoch,
                    std::sqrt(2.0 * loss_sum / (static_cast<double>(train_set.size() * train_set.dim()))),
                    test_set.empty() ? std::nan("") : mlp_evaluate(model, test_set), stage};
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return history;
}

inline constexpr std::size_t kStackedIntermediateDim = 50;
inline constexpr double kPerceptronInitScale = 0.01;

template <std::floating_point T>
struct StackedAutoencoder {
  PerceptronAutoencoder<T> stage1;  // d -> 50
  PerceptronAutoencoder<T> stage2;  // 50 -> k

  Vector<T> reconstruct(ConstSpan<T> x) const {
    const auto f1 = mlp_reconstruct(stage1, x);
    const auto f2 = mlp_reconstruct(stage2, f1.code());
    Vector<T> h1_aug(f2.x_hat);
    h1_aug.push_back(T{1});
    Vector<T> x_hat(stage1.data_dim());
    gemv<T>(stage1.W_dec, h1_aug, x_hat);
    return x_hat;
  }

  double evaluate(const Dataset<T>& data) const {
    if (data.empty()) throw InputError("cannot evaluate on an empty dataset");
    double total = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
      total += static_cast<double>(squared_distance<T>(data.instance(i), reconstruct(data.instance(i))));
    return std::sqrt(total / (static_cast<double>(data.size()) * static_cast<double>(data.dim())));
  }
};

/// Stage 1 (d -> 50) trains on the raw data for cfg.total_epochs; stage 2
/// (50 -> k) trains on stage-1 codes for another cfg.total_epochs. The history
/// holds 2 * total_epochs records numbered consecutively with depth = stage.
/// Stage-2 records report errors of the full stack in input space, both
/// measured on the frozen end-of-epoch model.
template <std::floating_point T>
std::pair<StackedAutoencoder<T>, TrainHistory> stacked_train(const Dataset<T>& train_set, const Dataset<T>& test_set,
                                                             const TrainConfig<T>& cfg,
                                                             const std::function<void(const EpochRecord&)>& on_epoch = {}) {
  cfg.validate();
  Rng rng(cfg.seed);
  StackedAutoencoder<T> model;
  model.stage1 = PerceptronAutoencoder<T>::random(train_set.dim(), kStackedIntermediateDim, T(kPerceptronInitScale), rng);
  auto history = train_perceptron(model.stage1, train_set, test_set, cfg, rng, on_epoch, 0, 1);

  const auto codes = mlp_encode(model.stage1, train_set);
  model.stage2 = PerceptronAutoencoder<T>::random(kStackedIntermediateDim, cfg.latent_dim, T(kPerceptronInitScale), rng);
  auto opt = MlpOptimizerState<T>::for_model(model.stage2, cfg.epsilon);
  std::vector<std::size_t> order(codes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t epoch = 1; epoch <= cfg.total_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) mlp_train_step(model.stage2, codes.instance(i), opt, cfg);
    EpochRecord rec{cfg.total_epochs + epoch, model.evaluate(train_set),
                    test_set.empty() ? std::nan("") : model.evaluate(test_set), 2};
    history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  return {std::move(model), std::move(history)};
}

}  // namespace treecoder
