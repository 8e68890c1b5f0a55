#pragma once

// Bag-of-words pipeline: tokenize, rank words by corpus frequency, drop the
// most frequent ones, keep the next block, count per document and scale each
// word by its largest per-document count in the training split.

#include <algorithm>
#include <cctype>
#include <concepts>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "treecoder/dataset.hpp"
#include "treecoder/errors.hpp"

namespace treecoder {

using Document = std::vector<std::string>;

/// Lowercase, split on runs of non-alphanumeric ASCII, keep tokens of length >= 2.
inline Document tokenize(std::string_view text) {
  Document out;
  std::string cur;
  auto flush = [&] {
    if (cur.size() >= 2) out.push_back(cur);
    cur.clear();
  };
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c))
      cur.push_back(static_cast<char>(std::tolower(c)));
    else
      flush();
  }
  flush();
  return out;
}

struct Vocabulary {
  std::vector<std::string> words;       // selection order
  std::vector<std::size_t> frequency;   // total training-corpus count
  std::vector<std::size_t> max_count;   // largest count within one training document
  std::unordered_map<std::string, std::size_t> index;

  std::size_t size() const { return words.size(); }
  bool empty() const { return words.empty(); }
};

struct VocabularyOptions {
  std::size_t drop_top = 100;
  std::size_t keep = 2000;
};

inline Vocabulary build_bow_vocabulary(const std::vector<Document>& docs, VocabularyOptions opt = {}) {
  std::map<std::string, std::pair<std::size_t, std::size_t>> stats;  // word -> (total, max per doc)
  std::size_t tokens = 0;
  for (const auto& doc : docs) {
    std::unordered_map<std::string_view, std::size_t> local;
    for (const auto& w : doc) ++local[w];
    for (const auto& [w, c] : local) {
      auto& s = stats[std::string(w)];
      s.first += c;
      s.second = std::max(s.second, c);
    }
    tokens += doc.size();
  }
  if (tokens == 0) throw InputError("cannot build a vocabulary from an empty corpus");

  std::vector<const decltype(stats)::value_type*> ranked;
  ranked.reserve(stats.size());
  for (const auto& e : stats) ranked.push_back(&e);
  // std::map iteration is lexicographic, so a stable sort on frequency breaks ties lexicographically.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto* a, const auto* b) { return a->second.first > b->second.first; });

  Vocabulary v;
  for (std::size_t r = opt.drop_top; r < ranked.size() && v.size() < opt.keep; ++r) {
    v.index.emplace(ranked[r]->first, v.size());
    v.words.push_back(ranked[r]->first);
    v.frequency.push_back(ranked[r]->second.first);
    v.max_count.push_back(ranked[r]->second.second);
  }
  return v;
}

/// Per-document word counts divided by each word's training max count.
/// Out-of-vocabulary tokens are ignored; test documents may exceed 1.
template <std::floating_point T = double>
Dataset<T> vectorize_documents(const std::vector<Document>& docs, const Vocabulary& vocab) {
  if (vocab.empty()) throw InputError("cannot vectorize with an empty vocabulary");
  Dataset<T> ds(Matrix<T>(docs.size(), vocab.size()));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto row = ds.instances.row(i);
    for (const auto& w : docs[i])
      if (auto it = vocab.index.find(w); it != vocab.index.end()) row[it->second] += T{1};
  }
  Vector<T> scale(vocab.size());
  for (std::size_t j = 0; j < vocab.size(); ++j) scale[j] = static_cast<T>(std::max<std::size_t>(1, vocab.max_count[j]));
  for (std::size_t i = 0; i < docs.size(); ++i) {
    auto row = ds.instances.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] /= scale[j];
  }
  ds.dim_scale = std::move(scale);
  return ds;
}

struct Corpus {
  std::vector<Document> docs;
  std::vector<std::string> names;          // file path or line number
  std::optional<std::vector<int>> labels;  // set when documents come from class subdirectories
  std::vector<std::string> class_names;
};

/// One document per line.
inline Corpus read_corpus_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  Corpus c;
  std::string line;
  for (std::size_t n = 1; std::getline(in, line); ++n) {
    c.docs.push_back(tokenize(line));
    c.names.push_back(std::to_string(n));
  }
  return c;
}

/// One document per file. If `root` holds subdirectories, each is a class
/// (sorted by name) and its regular files are that class's documents;
/// otherwise the regular files in `root` form an unlabeled corpus.
inline Corpus read_corpus_dir(const std::string& root) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw IoError("'" + root + "' is not a directory");
  auto sorted_entries = [](const fs::path& p, bool dirs) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(p))
      if (dirs ? e.is_directory() : e.is_regular_file()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  };
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open '" + p.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };

  Corpus c;
  const auto classes = sorted_entries(root, true);
  if (classes.empty()) {
    for (const auto& f : sorted_entries(root, false)) {
      c.docs.push_back(tokenize(slurp(f)));
      c.names.push_back(f.string());
    }
    return c;
  }
  c.labels.emplace();
  for (std::size_t k = 0; k < classes.size(); ++k) {
    c.class_names.push_back(classes[k].filename().string());
    for (const auto& f : sorted_entries(classes[k], false)) {
      c.docs.push_back(tokenize(slurp(f)));
      c.names.push_back(f.string());
      c.labels->push_back(static_cast<int>(k));
    }
  }
  return c;
}

/// Seeded shuffle of [0, n) cut at round(n * train_fraction).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(std::size_t n,
                                                                                      double train_fraction,
                                                                                      std::uint64_t seed) {
  if (!(train_fraction >= 0.0 && train_fraction <= 1.0)) throw InputError("train fraction must be in [0, 1]");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto cut = static_cast<std::size_t>(std::llround(static_cast<double>(n) * train_fraction));
  return {{idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(cut)},
          {idx.begin() + static_cast<std::ptrdiff_t>(cut), idx.end()}};
}

}  // namespace treecoder
