#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "treecoder/cli.hpp"

using namespace treecoder;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  fs::path dir;
  std::string out_text, err_text;

  void SetUp() override {
    dir = fs::temp_directory_path() /
          ("treecoder_test_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    // 10-image fixture cut from the shipped MNIST subset.
    const std::string data = TREECODER_TEST_DATA;
    const auto images = load_idx_images<double>(data + "/mnist-train-images.idx3").head(10);
    auto labels = load_idx_labels(data + "/mnist-train-labels.idx1");
    labels.resize(10);
    write_file_bytes(p("t.idx"), encode_idx_images(images, 28, 28));
    write_file_bytes(p("l.idx"), encode_idx_labels(labels));
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "treecoder");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    out_text = out.str();
    err_text = err.str();
    return rc;
  }

  std::vector<std::string> idx_args() const {
    return {"--data-format", "idx", "--train-images", p("t.idx"), "--train-labels", p("l.idx")};
  }

  int train(const std::string& model, const std::string& log, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"train"};
    for (const auto& s : idx_args()) a.push_back(s);
    for (const auto& s : {"--latent", "2", "--max-depth", "4", "--leaf", "constant", "--seed", "42", "--epochs",
                          "5", "--grow-every", "2", "-q"})
      a.push_back(s);
    a.push_back("--out");
    a.push_back(p(model));
    a.push_back("--log");
    a.push_back(p(log));
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  }
};

}  // namespace

TEST_F(Cli, TrainSmokeRunWritesCheckpointAndLog) {
  std::vector<std::string> a{"train"};
  for (const auto& s : idx_args()) a.push_back(s);
  for (const auto& s : {"--latent", "2", "--max-depth", "6", "--leaf", "constant", "--seed", "42", "--epochs", "3",
                        "--grow-every", "1", "--out"})
    a.push_back(s);
  a.push_back(p("m.json"));
  a.push_back("--log");
  a.push_back(p("e.csv"));
  ASSERT_EQ(run(a), kExitOk) << err_text;
  const auto ck = load_checkpoint(p("m.json"));
  EXPECT_EQ(ck.pair.encoder.depth(), 4u);
  EXPECT_EQ(ck.config.seed, 42u);
  EXPECT_EQ(load_error_curve(p("e.csv")).size(), 3u);
  EXPECT_NE(err_text.find("epoch 3"), std::string::npos);
}

TEST_F(Cli, InitialDepthShiftsTheSchedule) {
  ASSERT_EQ(train("m.json", "e.csv", {"--initial-depth", "3", "--max-depth", "5"}), kExitOk) << err_text;
  const auto h = load_error_curve(p("e.csv"));
  ASSERT_EQ(h.size(), 5u);
  EXPECT_EQ(h[0].depth, 3u);
  EXPECT_EQ(h[4].depth, 5u);
  EXPECT_EQ(load_checkpoint(p("m.json")).config.initial_depth, 3u);
  EXPECT_EQ(train("m.json", "e.csv", {"--initial-depth", "5", "--max-depth", "4"}), kExitUsage);
}

TEST_F(Cli, TrainIsBitReproducible) {
  ASSERT_EQ(train("a.json", "a.csv", {"--snapshot-prefix", p("sa")}), kExitOk) << err_text;
  ASSERT_EQ(train("b.json", "b.csv", {"--snapshot-prefix", p("sb")}), kExitOk) << err_text;
  EXPECT_EQ(slurp(p("a.json")), slurp(p("b.json")));
  EXPECT_EQ(slurp(p("a.csv")), slurp(p("b.csv")));
  EXPECT_EQ(slurp(p("sa_leaf7.pgm")), slurp(p("sb_leaf7.pgm")));
  // Leaves before the growth after epoch 2 (nodes 1-2), before the one after
  // epoch 4 (nodes 3-6), and the final depth-4 leaves (nodes 7-14).
  for (int node = 1; node <= 14; ++node) EXPECT_TRUE(fs::exists(p("sa_leaf" + std::to_string(node) + ".pgm")));
  ASSERT_EQ(train("c.json", "c.csv", {"--seed", "43"}), kExitOk);
  EXPECT_NE(slurp(p("a.json")), slurp(p("c.json")));
}

TEST_F(Cli, MissingModelIsDataError) {
  std::vector<std::string> a{"encode", "--model", p("missing.json"), "--out", p("codes.csv")};
  for (const auto& s : idx_args()) a.push_back(s);
  EXPECT_EQ(run(a), kExitData);
  EXPECT_NE(err_text.find("missing.json"), std::string::npos);
}

TEST_F(Cli, InvalidConfigIsUsageError) {
  EXPECT_EQ(train("m.json", "e.csv", {"--latent", "0"}), kExitUsage);
  EXPECT_NE(err_text.find("latent"), std::string::npos);
  EXPECT_FALSE(fs::exists(p("m.json")));
}

TEST_F(Cli, UnknownFlagPrintsHelp) {
  EXPECT_EQ(run({"train", "--bogus"}), kExitUsage);
  EXPECT_NE(err_text.find("Usage"), std::string::npos);
  EXPECT_EQ(run({}), kExitUsage);
  EXPECT_EQ(run({"--help"}), kExitOk);
  EXPECT_NE(out_text.find("baseline"), std::string::npos);
}

TEST_F(Cli, DataErrorsExitTwo) {
  write_file_bytes(p("bad.idx"), {0, 0, 8, 1, 0, 0, 0, 1});
  EXPECT_EQ(run({"train", "--train-images", p("bad.idx"), "--out", p("m.json")}), kExitData);
  EXPECT_EQ(run({"train", "--train-images", p("t.idx"), "--train-labels", p("bad.idx"), "--out", p("m.json")}),
            kExitData);
  EXPECT_EQ(run({"train", "--out", p("m.json")}), kExitUsage);
}

TEST_F(Cli, EvalEncodeReconstruct) {
  ASSERT_EQ(train("m.json", "e.csv"), kExitOk) << err_text;
  std::vector<std::string> data{"--test-images", p("t.idx"), "--test-labels", p("l.idx")};
  auto with = [&](std::vector<std::string> a) {
    a.insert(a.end(), data.begin(), data.end());
    return a;
  };
  ASSERT_EQ(run(with({"eval", "--model", p("m.json")})), kExitOk) << err_text;
  const auto ck = load_checkpoint(p("m.json"));
  EXPECT_EQ(out_text, "rmse," + format_real(evaluate<double>(ck.pair, load_idx_images<double>(p("t.idx")))) + "\n");

  ASSERT_EQ(run(with({"encode", "--model", p("m.json"), "--out", p("codes.csv")})), kExitOk) << err_text;
  const auto codes = slurp(p("codes.csv"));
  EXPECT_EQ(codes.substr(0, 12), "h1,h2,label\n");
  EXPECT_EQ(std::count(codes.begin(), codes.end(), '\n'), 11);

  ASSERT_EQ(run(with({"reconstruct", "--model", p("m.json"), "--out", p("rec.csv"), "--threads", "3"})), kExitOk);
  const auto rec = load_csv_dataset<double>(p("rec.csv"));
  EXPECT_EQ(rec.size(), 10u);
  EXPECT_EQ(rec.dim(), 784u);
}

TEST_F(Cli, ExportKinds) {
  ASSERT_EQ(train("m.json", "e.csv"), kExitOk) << err_text;
  std::vector<std::string> data{"--test-images", p("t.idx"), "--test-labels", p("l.idx")};
  auto exp = [&](const std::string& kind, const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> a{"export", "--kind", kind, "--model", p("m.json"), "--out", p(out)};
    a.insert(a.end(), data.begin(), data.end());
    a.insert(a.end(), extra.begin(), extra.end());
    return run(a);
  };
  ASSERT_EQ(exp("curve", "curve.csv"), kExitOk) << err_text;
  EXPECT_EQ(slurp(p("curve.csv")), slurp(p("e.csv")));
  ASSERT_EQ(exp("scatter", "s.csv"), kExitOk) << err_text;
  ASSERT_EQ(exp("histograms", "h.csv"), kExitOk) << err_text;
  ASSERT_EQ(exp("histograms", "hd.csv", {"--tree", "decoder"}), kExitOk) << err_text;
  const auto hist = slurp(p("h.csv"));
  EXPECT_EQ(std::count(hist.begin(), hist.end(), '\n'), 16);  // header + 15 nodes
  ASSERT_EQ(exp("leaves", "leaf", {"--rows", "28", "--cols", "28"}), kExitOk) << err_text;
  for (int node = 7; node <= 14; ++node) EXPECT_TRUE(fs::exists(p("leaf_leaf" + std::to_string(node) + ".pgm")));
  EXPECT_EQ(exp("leaves", "leaf"), kExitUsage);
  ASSERT_EQ(exp("grid", "g.pgm", {"--samples", "4", "--grid-seed", "5"}), kExitOk) << err_text;
  const auto grid = slurp(p("g.pgm"));
  EXPECT_EQ(grid.substr(0, 14), "P5\n56 112\n255\n");
  EXPECT_EQ(grid.size(), 14u + 56 * 112);
  ASSERT_EQ(exp("grid", "g2.pgm", {"--samples", "4", "--grid-seed", "5"}), kExitOk);
  EXPECT_EQ(slurp(p("g2.pgm")), grid);
  EXPECT_EQ(exp("grid", "g3.pgm", {"--samples", "11"}), kExitData);
  EXPECT_EQ(exp("topwords", "w.tsv"), kExitUsage);
  EXPECT_EQ(exp("sideways", "x"), kExitUsage);
}

TEST_F(Cli, LinearLeavesCannotExportImages) {
  ASSERT_EQ(train("m.json", "e.csv", {"--leaf", "linear"}), kExitOk) << err_text;
  EXPECT_EQ(run({"export", "--kind", "leaves", "--model", p("m.json"), "--out", p("x"), "--rows", "28", "--cols",
                 "28"}),
            kExitData);
  EXPECT_NE(err_text.find("constant"), std::string::npos);
}

TEST_F(Cli, CorruptAndWrongVersionCheckpoints) {
  ASSERT_EQ(train("m.json", "e.csv"), kExitOk);
  auto j = parse_json_file(p("m.json"));
  j["format_version"] = 2;
  write_text_file(p("v2.json"), dump_json(j));
  write_text_file(p("junk.json"), "{not json");
  for (const auto* name : {"v2.json", "junk.json"})
    EXPECT_EQ(run({"eval", "--model", p(name), "--test-images", p("t.idx")}), kExitData) << name;
}

TEST_F(Cli, DimensionMismatchIsDataError) {
  ASSERT_EQ(train("m.json", "e.csv"), kExitOk);
  write_text_file(p("small.csv"), "a,b\n1,2\n");
  EXPECT_EQ(run({"eval", "--model", p("m.json"), "--data-format", "csv", "--test-data", p("small.csv")}), kExitData);
}

TEST_F(Cli, CorpusPipelineAndTopWords) {
  std::ofstream corpus(p("docs.txt"));
  for (int i = 0; i < 30; ++i) {
    for (int w = 0; w < 100; ++w) corpus << "common" << w << ' ';
    corpus << (i % 2 ? "orbit launch rocket" : "engine wheel brake") << ' ' << "word" << i % 7 << '\n';
  }
  corpus.close();
  std::vector<std::string> data{"--data-format", "corpus-lines", "--train-data", p("docs.txt"), "--split-seed", "1"};
  std::vector<std::string> a{"train", "--epochs", "2", "--grow-every", "1", "--max-depth", "3", "-q",
                             "--out", p("m.json"), "--vocab-out", p("v.tsv")};
  a.insert(a.end(), data.begin(), data.end());
  ASSERT_EQ(run(a), kExitOk) << err_text;
  const auto vocab = load_vocabulary(p("v.tsv"));
  EXPECT_GE(vocab.size(), 6u);
  EXPECT_LE(vocab.size(), 13u);
  ASSERT_EQ(run({"export", "--kind", "topwords", "--model", p("m.json"), "--vocab", p("v.tsv"), "--top", "3", "--out",
                 p("w.tsv")}),
            kExitOk)
      << err_text;
  const auto words = slurp(p("w.tsv"));
  EXPECT_EQ(std::count(words.begin(), words.end(), '\n'), 4);
  std::vector<std::string> e{"eval", "--model", p("m.json"), "--vocab", p("v.tsv")};
  e.insert(e.end(), data.begin(), data.end());
  ASSERT_EQ(run(e), kExitOk) << err_text;
  EXPECT_EQ(out_text.substr(0, 5), "rmse,");
}

TEST_F(Cli, Baselines) {
  for (const auto* kind : {"single", "stacked"}) {
    std::vector<std::string> a{"baseline", "--kind", kind, "--epochs", "2", "--latent", "2", "-q",
                               "--out", p(std::string(kind) + ".json"), "--log", p(std::string(kind) + ".csv")};
    for (const auto& s : idx_args()) a.push_back(s);
    ASSERT_EQ(run(a), kExitOk) << err_text;
    EXPECT_EQ(load_error_curve(p(std::string(kind) + ".csv")).size(), std::string(kind) == "single" ? 2u : 4u);
    const auto j = parse_json_file(p(std::string(kind) + ".json"));
    EXPECT_EQ(j["stages"].size(), std::string(kind) == "single" ? 1u : 2u);
  }
}

TEST_F(Cli, BinaryRunsFromTheShell) {
  const std::string cmd = std::string(TREECODER_CLI) + " train -q --train-images " + p("t.idx") +
                          " --epochs 1 --out " + p("m.json") + " > /dev/null 2>&1";
  EXPECT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(p("m.json")));
  const std::string bad = std::string(TREECODER_CLI) + " train --latent 0 --out x > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  EXPECT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), kExitUsage);
}
