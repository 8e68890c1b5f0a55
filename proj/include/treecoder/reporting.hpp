#pragma once

// Figure data exporters. Numbers go to CSV with 17 significant digits,
// images to binary PGM (P5, maxval 255).

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "treecoder/autoencoder.hpp"
#include "treecoder/bag_of_words.hpp"
#include "treecoder/dataset.hpp"
#include "treecoder/errors.hpp"
#include "treecoder/idx.hpp"
#include "treecoder/soft_tree.hpp"

namespace treecoder {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  return out;
}

inline void finish(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw IoError("write failed for '" + path + "'");
}

}  // namespace detail

// ---- error curves ----------------------------------------------------------

inline void write_error_curve(const TrainHistory& history, std::ostream& out) {
  out << "epoch,train_error,test_error,depth\n";
  for (const auto& r : history)
    out << r.epoch << ',' << format_real(r.train_error) << ',' << format_real(r.test_error) << ',' << r.depth << '\n';
}

inline void export_error_curve(const TrainHistory& history, const std::string& path) {
  auto out = detail::open_for_write(path);
  write_error_curve(history, out);
  detail::finish(out, path);
}

inline TrainHistory read_error_curve(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "epoch,train_error,test_error,depth")
    throw FormatError("error curve is missing its header");
  TrainHistory h;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    EpochRecord r;
    char tr[64], te[64];
    if (std::sscanf(line.c_str(), "%zu,%63[^,],%63[^,],%zu", &r.epoch, tr, te, &r.depth) != 4)
      throw FormatError("bad error curve row '" + line + "'");
    r.train_error = std::strtod(tr, nullptr);
    r.test_error = std::strtod(te, nullptr);
    if (!h.empty() && r.epoch <= h.back().epoch) throw FormatError("error curve epochs are not increasing");
    h.push_back(r);
  }
  return h;
}

inline TrainHistory load_error_curve(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_error_curve(in);
}

// ---- latent codes ----------------------------------------------------------

/// Codes of every instance as rows h_1..h_k[,label], instance order kept.
template <std::floating_point T>
Matrix<T> encode_dataset(const AutoencoderPair<T>& pair, const Dataset<T>& data, std::size_t threads = 1) {
  if (data.dim() != pair.data_dim()) throw StructuralError("dataset dimension does not match the model");
  Matrix<T> codes(data.size(), pair.latent_dim());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto tr = tree_forward(pair.encoder, data.instance(i));
    const auto h = tr.output();
    std::copy(h.begin(), h.end(), codes.row(i).begin());
  });
  return codes;
}

template <std::floating_point T>
void write_latent_scatter(const Matrix<T>& codes, const std::optional<std::vector<int>>& labels, std::ostream& out) {
  for (std::size_t j = 0; j < codes.cols(); ++j) out << (j ? "," : "") << 'h' << (j + 1);
  if (labels) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < codes.rows(); ++i) {
    for (std::size_t j = 0; j < codes.cols(); ++j) out << (j ? "," : "") << format_real(codes(i, j));
    if (labels) out << ',' << (*labels)[i];
    out << '\n';
  }
}

template <std::floating_point T>
void export_latent_scatter(const AutoencoderPair<T>& pair, const Dataset<T>& data, const std::string& path,
                           std::size_t threads = 1) {
  const auto codes = encode_dataset(pair, data, threads);
  auto out = detail::open_for_write(path);
  write_latent_scatter(codes, data.labels, out);
  detail::finish(out, path);
}

// ---- soft class counts -----------------------------------------------------

/// counts(node, c): sum over instances of class c of the node's path weight.
struct SoftClassCounts {
  Matrix<double> counts;  // num_nodes x num_classes

  std::size_t num_nodes() const { return counts.rows(); }
  std::size_t num_classes() const { return counts.cols(); }
  double node_total(std::size_t m) const {
    double s = 0;
    for (double v : counts.row(m)) s += v;
    return s;
  }
};

/// Inputs are routed through `tree` as given; pass codes for a decoder.
template <std::floating_point T>
SoftClassCounts compute_soft_class_counts(const SoftTree<T>& tree, const Dataset<T>& data) {
  if (!data.labels) throw InputError("soft class counts need labelled data");
  const auto C = static_cast<std::size_t>(data.num_classes());
  SoftClassCounts sc{Matrix<double>(tree.num_nodes(), C)};
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto w = node_path_weights(tree, tree_forward(tree, data.instance(i)));
    const auto c = static_cast<std::size_t>((*data.labels)[i]);
    for (std::size_t m = 0; m < w.size(); ++m) sc.counts(m, c) += static_cast<double>(w[m]);
  }
  return sc;
}

inline std::size_t node_level(std::size_t m) {
  std::size_t level = 0;
  for (++m; m > 1; m >>= 1) ++level;
  return level;
}

inline void write_soft_class_counts(const SoftClassCounts& sc, std::ostream& out) {
  out << "node,level";
  for (std::size_t c = 0; c < sc.num_classes(); ++c) out << ",class_" << c;
  out << '\n';
  for (std::size_t m = 0; m < sc.num_nodes(); ++m) {
    out << m << ',' << node_level(m);
    for (double v : sc.counts.row(m)) out << ',' << format_real(v);
    out << '\n';
  }
}

inline void export_soft_class_counts(const SoftClassCounts& sc, const std::string& path) {
  auto out = detail::open_for_write(path);
  write_soft_class_counts(sc, out);
  detail::finish(out, path);
}

// ---- images ----------------------------------------------------------------

/// clamp(v, 0, 1) * 255, rounded half up.
template <std::floating_point T>
std::uint8_t to_pixel(T v) {
  const double c = std::clamp(static_cast<double>(v), 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

inline std::vector<std::uint8_t> encode_pgm(std::size_t width, std::size_t height, const std::vector<std::uint8_t>& px) {
  if (px.size() != width * height) throw StructuralError("pixel count does not match image size");
  const std::string header = "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), px.begin(), px.end());
  return out;
}

inline std::string leaf_image_path(const std::string& prefix, std::size_t node) {
  return prefix + "_leaf" + std::to_string(node) + ".pgm";
}

/// One PGM per leaf, named by the leaf's level-order node index. Returns the
/// paths in leaf order.
template <std::floating_point T>
std::vector<std::string> export_decoder_leaf_images(const SoftTree<T>& decoder, std::size_t rows, std::size_t cols,
                                                    const std::string& prefix) {
  if (decoder.leaf_kind() != LeafKind::Constant)
    throw UnsupportedExport("leaf images need constant leaves; linear leaf responses depend on the input");
  if (rows * cols != decoder.output_dim())
    throw StructuralError("rows * cols = " + std::to_string(rows * cols) + " but decoder output has " +
                          std::to_string(decoder.output_dim()) + " dimensions");
  std::vector<std::string> paths;
  for (std::size_t l = 0; l < decoder.num_leaves(); ++l) {
    const auto& rho = std::get<ConstantLeaf<T>>(decoder.leaf(l)).rho;
    std::vector<std::uint8_t> px(rho.size());
    std::transform(rho.begin(), rho.end(), px.begin(), [](T v) { return to_pixel(v); });
    paths.push_back(leaf_image_path(prefix, decoder.leaf_node(l)));
    write_file_bytes(paths.back(), encode_pgm(cols, rows, px));
  }
  return paths;
}

/// Picks n distinct instances with a seeded shuffle and lays them out one per
/// band: original on the left, reconstruction on the right.
template <std::floating_point T>
std::vector<std::uint8_t> reconstruction_grid(const AutoencoderPair<T>& pair, const Dataset<T>& data,
                                              std::size_t n_samples, std::size_t rows, std::size_t cols,
                                              std::uint64_t seed) {
  if (rows * cols != data.dim()) throw StructuralError("rows * cols does not match the data dimension");
  if (n_samples > data.size())
    throw InputError("asked for " + std::to_string(n_samples) + " samples from " + std::to_string(data.size()) +
                     " instances");
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);

  const std::size_t width = 2 * cols;
  std::vector<std::uint8_t> px(n_samples * rows * width);
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto x = data.instance(idx[s]);
    const auto rec = reconstruct(pair, x);
    const auto x_hat = rec.output();
    for (std::size_t r = 0; r < rows; ++r) {
      std::uint8_t* line = px.data() + (s * rows + r) * width;
      for (std::size_t c = 0; c < cols; ++c) {
        line[c] = to_pixel(x[r * cols + c]);
        line[cols + c] = to_pixel(x_hat[r * cols + c]);
      }
    }
  }
  return encode_pgm(width, n_samples * rows, px);
}

template <std::floating_point T>
void export_reconstruction_grid(const AutoencoderPair<T>& pair, const Dataset<T>& data, std::size_t n_samples,
                                std::size_t rows, std::size_t cols, std::uint64_t seed, const std::string& path) {
  write_file_bytes(path, reconstruction_grid(pair, data, n_samples, rows, cols, seed));
}

// ---- words -----------------------------------------------------------------

/// Word indices of one leaf by descending coefficient, ties by word.
template <std::floating_point T>
std::vector<std::size_t> top_word_indices(ConstSpan<T> rho, const Vocabulary& vocab, std::size_t top_n) {
  std::vector<std::size_t> idx(rho.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const std::size_t n = std::min(top_n, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (rho[a] != rho[b]) return rho[a] > rho[b];
                      return vocab.words[a] < vocab.words[b];
                    });
  idx.resize(n);
  return idx;
}

template <std::floating_point T>
void write_top_words_per_leaf(const SoftTree<T>& decoder, const Vocabulary& vocab, std::size_t top_n,
                              std::ostream& out) {
  if (decoder.leaf_kind() != LeafKind::Constant)
    throw UnsupportedExport("top words need constant leaves; linear leaf responses depend on the input");
  if (vocab.size() != decoder.output_dim())
    throw StructuralError("vocabulary size does not match decoder output dimension");
  for (std::size_t l = 0; l < decoder.num_leaves(); ++l) {
    const auto& rho = std::get<ConstantLeaf<T>>(decoder.leaf(l)).rho;
    const auto top = top_word_indices<T>(rho, vocab, top_n);
    for (std::size_t i = 0; i < top.size(); ++i) out << (i ? "\t" : "") << vocab.words[top[i]];
    out << '\n';
  }
}

template <std::floating_point T>
void export_top_words_per_leaf(const SoftTree<T>& decoder, const Vocabulary& vocab, std::size_t top_n,
                               const std::string& path) {
  std::ostringstream buf;
  write_top_words_per_leaf(decoder, vocab, top_n, buf);
  auto out = detail::open_for_write(path);
  out << buf.str();
  detail::finish(out, path);
}

// ---- vocabulary files ------------------------------------------------------

/// word<TAB>frequency<TAB>max_count, one word per line in selection order.
inline void save_vocabulary(const Vocabulary& v, const std::string& path) {
  auto out = detail::open_for_write(path);
  for (std::size_t i = 0; i < v.size(); ++i)
    out << v.words[i] << '\t' << v.frequency[i] << '\t' << v.max_count[i] << '\n';
  detail::finish(out, path);
}

inline Vocabulary load_vocabulary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Vocabulary v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string word;
    std::size_t freq = 0, mx = 0;
    if (!std::getline(ss, word, '\t') || !(ss >> freq >> mx)) throw FormatError("bad vocabulary line '" + line + "'");
    if (!v.index.emplace(word, v.size()).second) throw FormatError("duplicate vocabulary word '" + word + "'");
    v.words.push_back(word);
    v.frequency.push_back(freq);
    v.max_count.push_back(mx);
  }
  return v;
}

}  // namespace treecoder
