#pragma once

// Command-line front end. run_cli() is the whole program; tools/treecoder.cpp
// only forwards argv to it.
//
// Exit codes: 0 success, 1 usage or invalid configuration, 2 data / format /
// I/O error, 3 training diverged.

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "treecoder/autoencoder.hpp"
#include "treecoder/bag_of_words.hpp"
#include "treecoder/checkpoint.hpp"
#include "treecoder/csv_dataset.hpp"
#include "treecoder/errors.hpp"
#include "treecoder/idx.hpp"
#include "treecoder/parallel.hpp"
#include "treecoder/perceptron.hpp"
#include "treecoder/reporting.hpp"

namespace treecoder {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitDiverged = 3 };

class UsageError : public Error {
 public:
  using Error::Error;
};

namespace cli {

struct DataOptions {
  std::string format = "idx";
  std::string train_images, train_labels, test_images, test_labels;
  std::string train_data, test_data;
  std::string vocab_in, vocab_out;
  double train_fraction = 0.6;
  std::uint64_t split_seed = 0;
  std::size_t limit_train = 0;
  std::size_t limit_test = 0;
  std::size_t rows = 0, cols = 0;

  void add_to(CLI::App& app) {
    app.add_option("--data-format", format, "idx | csv | corpus-lines | corpus-dir")
        ->check(CLI::IsMember({"idx", "csv", "corpus-lines", "corpus-dir"}));
    app.add_option("--train-images", train_images, "IDX training images");
    app.add_option("--train-labels", train_labels, "IDX training labels");
    app.add_option("--test-images", test_images, "IDX test images");
    app.add_option("--test-labels", test_labels, "IDX test labels");
    app.add_option("--train-data", train_data, "CSV training data, or the corpus for corpus formats");
    app.add_option("--test-data", test_data, "CSV test data");
    app.add_option("--vocab", vocab_in, "vocabulary TSV to use instead of building one");
    app.add_option("--vocab-out", vocab_out, "write the vocabulary built from the training split");
    app.add_option("--train-fraction", train_fraction, "corpus train share of the seeded split")
        ->check(CLI::Range(0.0, 1.0));
    app.add_option("--split-seed", split_seed, "seed of the corpus train/test split");
    app.add_option("--limit-train", limit_train, "keep only the first N training instances (0 = all)");
    app.add_option("--limit-test", limit_test, "keep only the first N test instances (0 = all)");
    app.add_option("--rows", rows, "image height (IDX sets it)");
    app.add_option("--cols", cols, "image width (IDX sets it)");
  }
};

struct LoadedData {
  Dataset<double> train;
  Dataset<double> test;
  std::optional<Vocabulary> vocab;
  std::size_t rows = 0, cols = 0;
};

inline Dataset<double> load_idx_pair(const std::string& images, const std::string& labels, std::size_t& rows,
                                     std::size_t& cols) {
  const auto bytes = read_file_bytes(images);
  auto ds = parse_idx_images<double>(bytes);
  if (bytes.size() >= 16 && rows == 0 && cols == 0) {
    rows = detail::read_be32(bytes, 8);
    cols = detail::read_be32(bytes, 12);
  }
  if (!labels.empty()) ds.attach_labels(load_idx_labels(labels));
  return ds;
}

inline LoadedData load_data(DataOptions opt) {
  LoadedData out;
  out.rows = opt.rows;
  out.cols = opt.cols;
  if (opt.format == "idx") {
    if (opt.train_images.empty() && opt.test_images.empty())
      throw UsageError("idx data needs --train-images and/or --test-images");
    if (!opt.train_images.empty()) out.train = load_idx_pair(opt.train_images, opt.train_labels, out.rows, out.cols);
    if (!opt.test_images.empty()) out.test = load_idx_pair(opt.test_images, opt.test_labels, out.rows, out.cols);
  } else if (opt.format == "csv") {
    if (opt.train_data.empty() && opt.test_data.empty())
      throw UsageError("csv data needs --train-data and/or --test-data");
    if (!opt.train_data.empty()) out.train = load_csv_dataset<double>(opt.train_data);
    if (!opt.test_data.empty()) out.test = load_csv_dataset<double>(opt.test_data);
  } else {
    if (opt.train_data.empty()) throw UsageError("corpus formats need --train-data");
    const Corpus corpus =
        opt.format == "corpus-lines" ? read_corpus_lines(opt.train_data) : read_corpus_dir(opt.train_data);
    const auto [train_idx, test_idx] = train_test_split(corpus.docs.size(), opt.train_fraction, opt.split_seed);
    auto pick = [&](const std::vector<std::size_t>& idx, std::vector<int>* labels) {
      std::vector<Document> docs;
      for (auto i : idx) {
        docs.push_back(corpus.docs[i]);
        if (labels && corpus.labels) labels->push_back((*corpus.labels)[i]);
      }
      return docs;
    };
    std::vector<int> train_labels, test_labels;
    const auto train_docs = pick(train_idx, &train_labels);
    const auto test_docs = pick(test_idx, &test_labels);
    out.vocab = opt.vocab_in.empty() ? build_bow_vocabulary(train_docs) : load_vocabulary(opt.vocab_in);
    if (!opt.vocab_out.empty()) save_vocabulary(*out.vocab, opt.vocab_out);
    out.train = vectorize_documents<double>(train_docs, *out.vocab);
    out.test = vectorize_documents<double>(test_docs, *out.vocab);
    if (corpus.labels) {
      out.train.attach_labels(std::move(train_labels));
      out.test.attach_labels(std::move(test_labels));
    }
  }
  if (opt.limit_train && out.train.size() > opt.limit_train) out.train = out.train.head(opt.limit_train);
  if (opt.limit_test && out.test.size() > opt.limit_test) out.test = out.test.head(opt.limit_test);
  return out;
}

/// The dataset a non-training subcommand works on.
inline const Dataset<double>& pick_split(const LoadedData& d, const std::string& which) {
  if (which == "train") return d.train;
  if (which == "test") return d.test;
  return d.test.empty() ? d.train : d.test;
}

inline void require_dim(const Dataset<double>& data, std::size_t dim) {
  if (data.empty()) throw InputError("no instances to work on");
  if (data.dim() != dim)
    throw StructuralError("data has " + std::to_string(data.dim()) + " dimensions, model expects " +
                          std::to_string(dim));
}

inline void require_image_shape(const LoadedData& d, std::size_t dim) {
  if (d.rows == 0 || d.cols == 0) throw UsageError("image exports need --rows and --cols");
  if (d.rows * d.cols != dim) throw UsageError("--rows * --cols must equal the data dimension");
}

struct TrainOptions {
  std::size_t epochs = 240;
  std::size_t grow_every = 40;
  std::size_t initial_depth = 2;
  std::size_t max_depth = 6;
  std::size_t latent = 2;
  std::string leaf = "constant";
  double lr = 0.01;
  double l2 = 1e-4;
  double noise = 0.01;
  double init_scale = 0.01;
  double leaf_init = 0.1;
  std::uint64_t seed = 0;

  void add_to(CLI::App& app, bool tree) {
    app.add_option("--epochs", epochs, "training epochs")->capture_default_str();
    app.add_option("--latent", latent, "code dimension")->capture_default_str();
    app.add_option("--lr", lr, "AdaGrad learning rate")->capture_default_str();
    app.add_option("--l2", l2, "L2 regularization strength")->capture_default_str();
    app.add_option("--seed", seed, "random seed")->capture_default_str();
    if (!tree) return;
    app.add_option("--grow-every", grow_every, "epochs between depth increments")->capture_default_str();
    app.add_option("--initial-depth", initial_depth, "depth before the first growth")->capture_default_str();
    app.add_option("--max-depth", max_depth, "final tree depth")->capture_default_str();
    app.add_option("--leaf", leaf, "leaf model")->check(CLI::IsMember({"constant", "linear"}))->capture_default_str();
    app.add_option("--noise", noise, "std. dev. of noise added to inherited leaves")->capture_default_str();
    app.add_option("--init-scale", init_scale, "std. dev. of new gate weights")->capture_default_str();
    app.add_option("--leaf-init", leaf_init, "std. dev. of initial leaf parameters")->capture_default_str();
  }

  TrainConfig<double> config() const {
    TrainConfig<double> c;
    c.total_epochs = epochs;
    c.grow_every = grow_every;
    c.initial_depth = initial_depth;
    c.max_depth = max_depth;
    c.latent_dim = latent;
    c.leaf_kind = leaf_kind_from_string(leaf);
    c.learning_rate = lr;
    c.l2_strength = l2;
    c.noise_scale = noise;
    c.init_scale = init_scale;
    c.leaf_init_scale = leaf_init;
    c.seed = seed;
    try {
      c.validate();
    } catch (const InputError& e) {
      throw UsageError(std::string("invalid configuration: ") + e.what());
    }
    return c;
  }
};

inline void progress(std::ostream& err, bool quiet, const char* tag, const EpochRecord& r) {
  if (quiet) return;
  err << tag << " epoch " << r.epoch << " depth " << r.depth << " train " << format_real(r.train_error) << " test "
      << format_real(r.test_error) << '\n';
}

}  // namespace cli

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Autoencoders built from soft decision trees", "treecoder"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  std::size_t threads = 0;
  bool quiet = false;
  app.add_option("--threads", threads, "worker threads for evaluation and encoding (default: TREECODER_THREADS or 1)");
  app.add_flag("-q,--quiet", quiet, "no per-epoch progress on stderr");

  cli::DataOptions data;
  cli::TrainOptions topt;
  std::string model_path, out_path, log_path, snapshot_prefix, split = "auto";

  auto* train_cmd = app.add_subcommand("train", "train an autoencoder tree pair");
  data.add_to(*train_cmd);
  topt.add_to(*train_cmd, true);
  train_cmd->add_option("--out", out_path, "checkpoint to write")->required();
  train_cmd->add_option("--log", log_path, "per-epoch error curve CSV");
  train_cmd->add_option("--snapshot-prefix", snapshot_prefix, "decoder leaf PGMs before each split and at the end");

  auto* eval = app.add_subcommand("eval", "reconstruction RMSE per dimension");
  auto* encode = app.add_subcommand("encode", "write codes h for every instance");
  auto* recon = app.add_subcommand("reconstruct", "write reconstructions for every instance");
  for (auto* sc : {eval, encode, recon}) {
    data.add_to(*sc);
    sc->add_option("--model", model_path, "checkpoint")->required();
    sc->add_option("--split", split, "train | test | auto (test when given)")
        ->check(CLI::IsMember({"train", "test", "auto"}));
  }
  eval->add_option("--out", out_path, "result file (stdout when omitted)");
  encode->add_option("--out", out_path, "codes CSV")->required();
  recon->add_option("--out", out_path, "reconstructions CSV")->required();

  std::string export_kind, tree_choice = "encoder";
  std::size_t top_n = 10, samples = 10;
  std::uint64_t grid_seed = 0;
  auto* exp = app.add_subcommand("export", "figure data");
  data.add_to(*exp);
  exp->add_option("--kind", export_kind, "curve | scatter | leaves | histograms | topwords | grid")
      ->required()
      ->check(CLI::IsMember({"curve", "scatter", "leaves", "histograms", "topwords", "grid"}));
  exp->add_option("--model", model_path, "checkpoint")->required();
  exp->add_option("--out", out_path, "output file, or file prefix for leaves")->required();
  exp->add_option("--split", split, "train | test | auto")->check(CLI::IsMember({"train", "test", "auto"}));
  exp->add_option("--tree", tree_choice, "tree for histograms")->check(CLI::IsMember({"encoder", "decoder"}));
  exp->add_option("--top", top_n, "words per leaf");
  exp->add_option("--samples", samples, "instances in the reconstruction grid");
  exp->add_option("--grid-seed", grid_seed, "seed for picking grid instances");

  std::string baseline_kind;
  auto* base = app.add_subcommand("baseline", "perceptron autoencoder baselines");
  data.add_to(*base);
  topt.add_to(*base, false);
  base->add_option("--kind", baseline_kind, "single | stacked")->required()->check(CLI::IsMember({"single", "stacked"}));
  base->add_option("--log", log_path, "per-epoch error curve CSV");
  base->add_option("--out", out_path, "model JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  if (threads == 0) threads = threads_from_env();

  try {
    if (train_cmd->parsed()) {
      const auto cfg = topt.config();
      const auto d = cli::load_data(data);
      if (d.train.empty()) throw InputError("training set is empty");
      Rng rng(cfg.seed);
      auto pair = AutoencoderPair<double>::initial(d.train.dim(), cfg, rng);
      TrainCallbacks<double> cb;
      cb.on_epoch = [&](const EpochRecord& r) { cli::progress(err, quiet, "train", r); };
      if (!snapshot_prefix.empty()) {
        cli::require_image_shape(d, d.train.dim());
        if (cfg.leaf_kind != LeafKind::Constant) throw UsageError("--snapshot-prefix needs --leaf constant");
        cb.before_growth = [&](const AutoencoderPair<double>& p, std::size_t) {
          export_decoder_leaf_images(p.decoder, d.rows, d.cols, snapshot_prefix);
        };
      }
      if (!d.test.empty()) cli::require_dim(d.test, d.train.dim());
      const auto history = train(pair, d.train, d.test, cfg, rng, cb, threads);
      save_model(pair, cfg, out_path, history);
      if (!log_path.empty()) export_error_curve(history, log_path);
      if (!snapshot_prefix.empty()) export_decoder_leaf_images(pair.decoder, d.rows, d.cols, snapshot_prefix);
      return kExitOk;
    }

    if (eval->parsed() || encode->parsed() || recon->parsed()) {
      const auto ck = load_checkpoint(model_path);
      const auto d = cli::load_data(data);
      const auto& ds = cli::pick_split(d, split);
      cli::require_dim(ds, ck.pair.data_dim());
      if (eval->parsed()) {
        const double rmse = evaluate(ck.pair, ds, ds.dim_scale ? ErrorScale::PerWord : ErrorScale::PerPixel, threads);
        const std::string line = "rmse," + format_real(rmse) + "\n";
        if (out_path.empty())
          out << line;
        else
          write_text_file(out_path, line);
      } else if (encode->parsed()) {
        export_latent_scatter(ck.pair, ds, out_path, threads);
      } else {
        Matrix<double> rec(ds.size(), ds.dim());
        parallel_for(ds.size(), threads, [&](std::size_t i) {
          const auto r = reconstruct(ck.pair, ds.instance(i));
          std::copy(r.output().begin(), r.output().end(), rec.row(i).begin());
        });
        std::ostringstream os;
        for (std::size_t j = 0; j < rec.cols(); ++j) os << (j ? "," : "") << 'x' << (j + 1);
        os << '\n';
        for (std::size_t i = 0; i < rec.rows(); ++i) {
          for (std::size_t j = 0; j < rec.cols(); ++j) os << (j ? "," : "") << format_real(rec(i, j));
          os << '\n';
        }
        write_text_file(out_path, os.str());
      }
      return kExitOk;
    }

    if (exp->parsed()) {
      const auto ck = load_checkpoint(model_path);
      if (export_kind == "curve") {
        export_error_curve(ck.history, out_path);
        return kExitOk;
      }
      if (export_kind == "leaves") {
        std::size_t rows = data.rows, cols = data.cols;
        if (rows == 0 || cols == 0) throw UsageError("leaf images need --rows and --cols");
        export_decoder_leaf_images(ck.pair.decoder, rows, cols, out_path);
        return kExitOk;
      }
      if (export_kind == "topwords") {
        if (data.vocab_in.empty()) throw UsageError("topwords needs --vocab");
        export_top_words_per_leaf(ck.pair.decoder, load_vocabulary(data.vocab_in), top_n, out_path);
        return kExitOk;
      }
      const auto d = cli::load_data(data);
      const auto& ds = cli::pick_split(d, split);
      cli::require_dim(ds, ck.pair.data_dim());
      if (export_kind == "scatter") {
        export_latent_scatter(ck.pair, ds, out_path, threads);
      } else if (export_kind == "histograms") {
        if (tree_choice == "encoder") {
          export_soft_class_counts(compute_soft_class_counts(ck.pair.encoder, ds), out_path);
        } else {
          Dataset<double> codes(encode_dataset(ck.pair, ds, threads));
          codes.labels = ds.labels;
          export_soft_class_counts(compute_soft_class_counts(ck.pair.decoder, codes), out_path);
        }
      } else {
        cli::require_image_shape(d, ds.dim());
        export_reconstruction_grid(ck.pair, ds, samples, d.rows, d.cols, grid_seed, out_path);
      }
      return kExitOk;
    }

    if (base->parsed()) {
      const auto cfg = topt.config();
      const auto d = cli::load_data(data);
      if (d.train.empty()) throw InputError("training set is empty");
      if (!d.test.empty()) cli::require_dim(d.test, d.train.dim());
      auto report = [&](const EpochRecord& r) { cli::progress(err, quiet, "baseline", r); };
      TrainHistory history;
      json model;
      model["format_version"] = kCheckpointVersion;
      if (baseline_kind == "single") {
        Rng rng(cfg.seed);
        auto m = PerceptronAutoencoder<double>::random(d.train.dim(), cfg.latent_dim, kPerceptronInitScale, rng);
        history = train_perceptron(m, d.train, d.test, cfg, rng, report);
        model["model"] = "perceptron";
        model["stages"] = json::array({perceptron_to_json(m)});
      } else {
        auto [m, h] = stacked_train(d.train, d.test, cfg, report);
        history = std::move(h);
        model["model"] = "stacked_perceptron";
        model["stages"] = json::array({perceptron_to_json(m.stage1), perceptron_to_json(m.stage2)});
      }
      model["config"] = config_to_json(cfg);
      if (!log_path.empty()) export_error_curve(history, log_path);
      if (!out_path.empty()) write_text_file(out_path, dump_json(model));
      return kExitOk;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const TrainingDiverged& e) {
    err << "error: training diverged: " << e.what() << '\n';
    return kExitDiverged;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace treecoder
