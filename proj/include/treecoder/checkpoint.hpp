#pragma once

// Model checkpoints as JSON (format_version 1).
//
// Every real array is stored twice: "<name>" holds decimal numbers for
// reading, "<name>_hex" holds the same values as C99 hex-float strings, which
// are what the loader uses so parameters round-trip bit for bit. Trees are
// stored as level-order node lists.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "treecoder/autoencoder.hpp"
#include "treecoder/errors.hpp"
#include "treecoder/perceptron.hpp"
#include "treecoder/soft_tree.hpp"

namespace treecoder {

inline constexpr int kCheckpointVersion = 1;

using json = nlohmann::ordered_json;

inline std::string hex_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hex_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw CorruptionError("bad hex float '" + s + "'");
  return v;
}

namespace detail {

inline void put_reals(json& j, const std::string& name, ConstSpan<double> v) {
  json dec = json::array(), hex = json::array();
  for (double x : v) {
    dec.push_back(x);
    hex.push_back(hex_real(x));
  }
  j[name] = std::move(dec);
  j[name + "_hex"] = std::move(hex);
}

inline const json& field(const json& j, const std::string& name) {
  if (!j.is_object() || !j.contains(name)) throw CorruptionError("checkpoint is missing field '" + name + "'");
  return j.at(name);
}

template <class Int>
Int get_count(const json& j, const std::string& name) {
  const auto& f = field(j, name);
  if (!f.is_number_unsigned()) throw CorruptionError("field '" + name + "' must be a non-negative integer");
  return f.get<Int>();
}

inline void get_reals(const json& j, const std::string& name, MutSpan<double> out) {
  const auto& hex = field(j, name + "_hex");
  const auto& dec = field(j, name);
  if (!hex.is_array() || !dec.is_array() || hex.size() != out.size() || dec.size() != out.size())
    throw CorruptionError("array '" + name + "' has " + std::to_string(hex.size()) + " entries, expected " +
                          std::to_string(out.size()));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!hex[i].is_string()) throw CorruptionError("array '" + name + "_hex' holds a non-string");
    out[i] = parse_hex_real(hex[i].get<std::string>());
    if (!std::isfinite(out[i])) throw CorruptionError("non-finite value in '" + name + "'");
  }
}

inline json matrix_to_json(const Matrix<double>& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  put_reals(j, "values", m.flat());
  return j;
}

inline Matrix<double> matrix_from_json(const json& j, std::size_t rows, std::size_t cols) {
  if (get_count<std::size_t>(j, "rows") != rows || get_count<std::size_t>(j, "cols") != cols)
    throw CorruptionError("matrix shape does not match the model dimensions");
  Matrix<double> m(rows, cols);
  get_reals(j, "values", m.flat());
  return m;
}

}  // namespace detail

inline json tree_to_json(const SoftTree<double>& tree) {
  json j;
  j["input_dim"] = tree.input_dim();
  j["output_dim"] = tree.output_dim();
  j["depth"] = tree.depth();
  j["leaf_kind"] = to_string(tree.leaf_kind());
  json nodes = json::array();
  for (std::size_t m = 0; m < tree.num_nodes(); ++m) {
    json n;
    n["index"] = m;
    if (!tree.is_leaf(m)) {
      n["type"] = "split";
      detail::put_reals(n, "w", tree.split(m).w);
    } else if (const auto* c = std::get_if<ConstantLeaf<double>>(&tree.leaf(tree.leaf_index(m)))) {
      n["type"] = "constant_leaf";
      detail::put_reals(n, "rho", c->rho);
    } else {
      n["type"] = "linear_leaf";
      n["V"] = detail::matrix_to_json(std::get<LinearLeaf<double>>(tree.leaf(tree.leaf_index(m))).V);
    }
    nodes.push_back(std::move(n));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

inline SoftTree<double> tree_from_json(const json& j) {
  const auto d_in = detail::get_count<std::size_t>(j, "input_dim");
  const auto d_out = detail::get_count<std::size_t>(j, "output_dim");
  const auto depth = detail::get_count<std::size_t>(j, "depth");
  const auto& kind_field = detail::field(j, "leaf_kind");
  if (!kind_field.is_string()) throw CorruptionError("leaf_kind must be a string");
  LeafKind kind;
  try {
    kind = leaf_kind_from_string(kind_field.get<std::string>());
  } catch (const InputError& e) {
    throw CorruptionError(e.what());
  }
  if (depth < 1 || depth > 30 || d_in < 1 || d_out < 1) throw CorruptionError("tree dimensions out of range");

  SoftTree<double> tree(d_in, d_out, depth, kind);
  const auto& nodes = detail::field(j, "nodes");
  if (!nodes.is_array() || nodes.size() != tree.num_nodes())
    throw CorruptionError("tree of depth " + std::to_string(depth) + " needs " + std::to_string(tree.num_nodes()) +
                          " nodes, checkpoint has " + std::to_string(nodes.is_array() ? nodes.size() : 0));
  for (std::size_t m = 0; m < tree.num_nodes(); ++m) {
    const auto& n = nodes[m];
    if (detail::get_count<std::size_t>(n, "index") != m) throw CorruptionError("nodes are not in level order");
    const auto& type = detail::field(n, "type");
    if (!tree.is_leaf(m)) {
      if (type != "split") throw CorruptionError("node " + std::to_string(m) + " should be a split");
      detail::get_reals(n, "w", tree.split(m).w);
    } else if (kind == LeafKind::Constant) {
      if (type != "constant_leaf") throw CorruptionError("node " + std::to_string(m) + " should be a constant leaf");
      detail::get_reals(n, "rho", std::get<ConstantLeaf<double>>(tree.leaf(tree.leaf_index(m))).rho);
    } else {
      if (type != "linear_leaf") throw CorruptionError("node " + std::to_string(m) + " should be a linear leaf");
      std::get<LinearLeaf<double>>(tree.leaf(tree.leaf_index(m))).V =
          detail::matrix_from_json(detail::field(n, "V"), d_out, d_in + 1);
    }
  }
  return tree;
}

inline json config_to_json(const TrainConfig<double>& c) {
  json j;
  j["total_epochs"] = c.total_epochs;
  j["grow_every"] = c.grow_every;
  j["initial_depth"] = c.initial_depth;
  j["max_depth"] = c.max_depth;
  j["latent_dim"] = c.latent_dim;
  j["leaf_kind"] = to_string(c.leaf_kind);
  j["seed"] = c.seed;
  for (auto [name, v] : {std::pair{"learning_rate", c.learning_rate}, std::pair{"l2_strength", c.l2_strength},
                         std::pair{"noise_scale", c.noise_scale}, std::pair{"init_scale", c.init_scale},
                         std::pair{"leaf_init_scale", c.leaf_init_scale}, std::pair{"epsilon", c.epsilon}}) {
    j[name] = v;
    j[std::string(name) + "_hex"] = hex_real(v);
  }
  return j;
}

inline TrainConfig<double> config_from_json(const json& j) {
  TrainConfig<double> c;
  c.total_epochs = detail::get_count<std::size_t>(j, "total_epochs");
  c.grow_every = detail::get_count<std::size_t>(j, "grow_every");
  c.initial_depth = detail::get_count<std::size_t>(j, "initial_depth");
  c.max_depth = detail::get_count<std::size_t>(j, "max_depth");
  c.latent_dim = detail::get_count<std::size_t>(j, "latent_dim");
  c.seed = detail::get_count<std::uint64_t>(j, "seed");
  try {
    c.leaf_kind = leaf_kind_from_string(detail::field(j, "leaf_kind").get<std::string>());
  } catch (const std::exception& e) {
    throw CorruptionError(std::string("config leaf_kind: ") + e.what());
  }
  auto real = [&](const char* name) {
    const auto& f = detail::field(j, std::string(name) + "_hex");
    if (!f.is_string()) throw CorruptionError(std::string(name) + "_hex must be a string");
    return parse_hex_real(f.get<std::string>());
  };
  c.learning_rate = real("learning_rate");
  c.l2_strength = real("l2_strength");
  c.noise_scale = real("noise_scale");
  c.init_scale = real("init_scale");
  c.leaf_init_scale = real("leaf_init_scale");
  c.epsilon = real("epsilon");
  return c;
}

inline json history_to_json(const TrainHistory& h) {
  json arr = json::array();
  for (const auto& r : h) {
    json j;
    j["epoch"] = r.epoch;
    j["depth"] = r.depth;
    j["train_error_hex"] = hex_real(r.train_error);
    j["test_error_hex"] = hex_real(r.test_error);
    arr.push_back(std::move(j));
  }
  return arr;
}

inline TrainHistory history_from_json(const json& arr) {
  if (!arr.is_array()) throw CorruptionError("history must be an array");
  TrainHistory h;
  for (const auto& j : arr) {
    EpochRecord r;
    r.epoch = detail::get_count<std::size_t>(j, "epoch");
    r.depth = detail::get_count<std::size_t>(j, "depth");
    r.train_error = std::strtod(detail::field(j, "train_error_hex").get<std::string>().c_str(), nullptr);
    r.test_error = std::strtod(detail::field(j, "test_error_hex").get<std::string>().c_str(), nullptr);
    h.push_back(r);
  }
  return h;
}

struct Checkpoint {
  AutoencoderPair<double> pair;
  TrainConfig<double> config;
  TrainHistory history;
};

inline json checkpoint_to_json(const Checkpoint& ck) {
  if (ck.pair.encoder.leaf_kind() != ck.pair.decoder.leaf_kind())
    throw StructuralError("encoder and decoder leaf kinds differ");
  json j;
  j["format_version"] = kCheckpointVersion;
  j["model"] = "autoencoder_tree";
  j["leaf_kind"] = to_string(ck.pair.encoder.leaf_kind());
  j["seed"] = ck.config.seed;
  j["config"] = config_to_json(ck.config);
  j["encoder"] = tree_to_json(ck.pair.encoder);
  j["decoder"] = tree_to_json(ck.pair.decoder);
  j["history"] = history_to_json(ck.history);
  return j;
}

inline void check_version(const json& j) {
  const auto& v = detail::field(j, "format_version");
  if (!v.is_number_integer() || v.get<long long>() != kCheckpointVersion)
    throw VersionError("unsupported checkpoint format_version " + v.dump() + " (expected " +
                       std::to_string(kCheckpointVersion) + ")");
}

inline Checkpoint checkpoint_from_json(const json& j) {
  check_version(j);
  if (detail::field(j, "model") != "autoencoder_tree") throw CorruptionError("checkpoint is not an autoencoder tree");
  Checkpoint ck;
  auto enc = tree_from_json(detail::field(j, "encoder"));
  auto dec = tree_from_json(detail::field(j, "decoder"));
  if (to_string(enc.leaf_kind()) != detail::field(j, "leaf_kind").get<std::string>() ||
      enc.leaf_kind() != dec.leaf_kind())
    throw CorruptionError("leaf kinds disagree");
  try {
    ck.pair = AutoencoderPair<double>(std::move(enc), std::move(dec));
  } catch (const StructuralError& e) {
    throw CorruptionError(e.what());
  }
  ck.config = config_from_json(detail::field(j, "config"));
  if (j.contains("history")) ck.history = history_from_json(j.at("history"));
  return ck;
}

inline std::string dump_json(const json& j) { return j.dump(1) + "\n"; }

inline json parse_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CorruptionError("'" + path + "' is not valid JSON: " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path + "'");
  out << text;
  if (!out.flush()) throw IoError("write failed for '" + path + "'");
}

inline void save_model(const AutoencoderPair<double>& pair, const TrainConfig<double>& cfg, const std::string& path,
                       const TrainHistory& history = {}) {
  write_text_file(path, dump_json(checkpoint_to_json({pair, cfg, history})));
}

inline Checkpoint load_checkpoint(const std::string& path) {
  const auto j = parse_json_file(path);
  try {
    return checkpoint_from_json(j);
  } catch (const json::exception& e) {
    throw CorruptionError("malformed checkpoint '" + path + "': " + e.what());
  }
}

inline AutoencoderPair<double> load_model(const std::string& path) { return load_checkpoint(path).pair; }

// Perceptron baselines share the array encoding.

inline json perceptron_to_json(const PerceptronAutoencoder<double>& m) {
  json j;
  j["data_dim"] = m.data_dim();
  j["latent_dim"] = m.latent_dim();
  j["W"] = detail::matrix_to_json(m.W);
  j["W_dec"] = detail::matrix_to_json(m.W_dec);
  return j;
}

inline PerceptronAutoencoder<double> perceptron_from_json(const json& j) {
  const auto d = detail::get_count<std::size_t>(j, "data_dim");
  const auto k = detail::get_count<std::size_t>(j, "latent_dim");
  PerceptronAutoencoder<double> m(d, k);
  m.W = detail::matrix_from_json(detail::field(j, "W"), k, d + 1);
  m.W_dec = detail::matrix_from_json(detail::field(j, "W_dec"), d, k + 1);
  return m;
}

}  // namespace treecoder
