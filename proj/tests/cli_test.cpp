// SPDX-License-Identifier: Apache-2.0
#include <sstream>

#include <gtest/gtest.h>

#include "camlab/cli/commands.hpp"

using namespace camlab;
using namespace camlab::cli;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Fresh directory per test under the system temp dir.
struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("camlab_cli_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& rel) const { return (path / rel).string(); }
};

Config small(const TempDir& dir, std::vector<std::string> extra = {}) {
  std::vector<std::string> o{"data.n=7",          "data.d=0.45",         "data.count=60",
                             "model.max_n=8",     "model.d_model=8",     "model.heads=2",
                             "model.layers=2",    "train.epochs=2",      "train.batch_size=8",
                             "diffusion.T=20",    "vae.latent_dim=2",    "vae.encoder_layers=1",
                             "data.dir=" + (dir / "data"), "train.data=" + (dir / "data/train.jsonl"),
                             "train.out=" + (dir / "run"), "sample.run=" + (dir / "run"),
                             "sample.input=" + (dir / "data/test.jsonl"),
                             "sample.out=" + (dir / "run/samples/pred.jsonl"),
                             "eval.split=" + (dir / "data/test.jsonl"), "eval.out=" + (dir / "run/eval")};
  for (auto& e : extra) o.push_back(std::move(e));
  return load_config("", o);
}

}  // namespace

TEST(Generate, SplitCountsAndWeights) {
  auto c = split_counts(1000, "80,10,10");
  EXPECT_EQ(c.train, 800u);
  EXPECT_EQ(c.val, 100u);
  EXPECT_EQ(c.test, 100u);
  auto d = split_counts(6000, "10,1,1");
  EXPECT_EQ(d.train + d.val + d.test, 6000u);
  EXPECT_EQ(d.val, 500u);
  EXPECT_THROW(split_counts(10, "1,1"), ConfigError);
  EXPECT_THROW(split_counts(10, "a,1,1"), ConfigError);
}

TEST(Generate, ReproducibleWithDisjointSplits) {
  TempDir dir("generate");
  std::ostringstream log;
  auto cfg = small(dir);
  cmd_generate(cfg, {2}, log);
  const auto first = slurp(dir / "data/train.jsonl");
  const auto test_file = slurp(dir / "data/test.jsonl");
  cmd_generate(cfg, {1}, log);
  EXPECT_EQ(first, slurp(dir / "data/train.jsonl"));
  EXPECT_EQ(test_file, slurp(dir / "data/test.jsonl"));
  auto train = read_records(dir / "data/train.jsonl");
  auto test = read_records(dir / "data/test.jsonl");
  EXPECT_EQ(train.size() + test.size() + read_records(dir / "data/val.jsonl").size(), 60u);
  for (const auto& a : test)
    for (const auto& b : train) ASSERT_NE(a.instance.coords, b.instance.coords);
  auto m = read_manifest(manifest_path(dir / "data/train.jsonl"));
  EXPECT_GT(m.edge_marginal, 0.0);
  EXPECT_LT(m.edge_marginal, 1.0);
  EXPECT_TRUE(fs::exists(dir / "data/generate.resolved.cfg"));
}

TEST(Config, UnknownKeysAndFamiliesAreRejected) {
  EXPECT_THROW(load_config("", {"model.famliy=gt"}), ConfigError);
  EXPECT_THROW(load_config("", {"no_equals_sign"}), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/x.cfg", {}), IoError);
  TempDir dir("family");
  std::ostringstream log;
  cmd_generate(small(dir), {}, log);
  EXPECT_THROW(cmd_train(small(dir, {"model.family=mlp"}), {}, log), ConfigError);
  EXPECT_THROW(cmd_train(small(dir, {"train.mode=gan"}), {}, log), ConfigError);
  EXPECT_THROW(cmd_train(small(dir, {"train.mode=diffusion", "model.family=att"}), {}, log), ConfigError);
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  for (const char* mode : {"supervised", "diffusion", "vae"}) {
    TempDir dir(std::string("resume_") + mode);
    std::ostringstream log;
    const std::string m = std::string("train.mode=") + mode;
    cmd_generate(small(dir), {}, log);
    cmd_train(small(dir, {m, "train.epochs=4"}), {}, log);
    const auto full_log = slurp(dir / "run/train_log.jsonl");
    const auto full_ck = slurp(dir / "run/model.ckpt");

    fs::remove_all(dir.path / "run");
    cmd_train(small(dir, {m, "train.epochs=2"}), {}, log);
    cmd_train(small(dir, {m, "train.epochs=4"}), {1, true}, log);
    EXPECT_EQ(full_log, slurp(dir / "run/train_log.jsonl")) << mode;
    EXPECT_EQ(full_ck, slurp(dir / "run/model.ckpt")) << mode;
  }
}

TEST(Sample, EveryModeWritesValidDeterministicRecords) {
  for (const char* mode : {"supervised", "diffusion", "vae"}) {
    TempDir dir(std::string("sample_") + mode);
    std::ostringstream log;
    const std::string m = std::string("train.mode=") + mode;
    cmd_generate(small(dir), {}, log);
    cmd_train(small(dir, {m}), {}, log);
    cmd_sample(small(dir, {"seed=3"}), {1}, log);
    const auto first = slurp(dir / "run/samples/pred.jsonl");
    cmd_sample(small(dir, {"seed=3"}), {3}, log);
    EXPECT_EQ(first, slurp(dir / "run/samples/pred.jsonl")) << mode;
    auto preds = read_records(dir / "run/samples/pred.jsonl");
    auto input = read_records(dir / "data/test.jsonl");
    ASSERT_EQ(preds.size(), input.size());
    for (const auto& r : preds) {
      EXPECT_TRUE(r.instance.label.is_symmetric());
      EXPECT_FALSE(r.instance.label.has_self_loops());
      bool has_source = false;
      for (const auto& [k, v] : r.extra) has_source |= k == "source";
      EXPECT_TRUE(has_source);
    }
    EXPECT_TRUE(fs::exists(dir / "run/samples/sample.resolved.cfg"));
    auto ev = cmd_eval(small(dir, {"eval.predictions=" + (dir / "run/samples/pred.jsonl")}), {}, log);
    EXPECT_EQ(ev.per_instance.size(), input.size());
  }
}

TEST(Eval, LabelsAgainstThemselvesArePerfect) {
  TempDir dir("eval");
  std::ostringstream log;
  cmd_generate(small(dir), {}, log);
  auto ev = cmd_eval(small(dir, {"eval.predictions=" + (dir / "data/test.jsonl")}), {}, log);
  EXPECT_EQ(ev.report.accuracy, 1.0);
  EXPECT_EQ(ev.report.saturated_pct, 0.0);
  EXPECT_EQ(ev.report.link_validity_pct, 1.0);
  EXPECT_EQ(ev.report.link_count_ratio, 1.0);
  const auto report = slurp(dir / "run/eval/report.txt");
  std::istringstream lines(report);
  std::string line;
  std::vector<std::string> keys;
  while (std::getline(lines, line)) keys.push_back(line.substr(0, line.find(" = ")));
  EXPECT_EQ(keys, metrics::report_keys());
  EXPECT_TRUE(fs::exists(dir / "run/eval/breakdown.jsonl"));
  EXPECT_TRUE(fs::exists(dir / "run/eval/eval.resolved.cfg"));

  EXPECT_THROW(cmd_eval(small(dir, {"eval.predictions=" + (dir / "missing.jsonl")}), {}, log), IoError);
  EXPECT_THROW(cmd_eval(small(dir), {}, log), ConfigError);
}

TEST(Eval, CheckpointPathUsesOneShotPredictions) {
  TempDir dir("eval_ck");
  std::ostringstream log;
  cmd_generate(small(dir), {}, log);
  cmd_train(small(dir), {}, log);
  auto a = cmd_eval(small(dir, {"eval.run=" + (dir / "run")}), {1}, log);
  auto b = cmd_eval(small(dir, {"eval.run=" + (dir / "run")}), {4}, log);
  EXPECT_EQ(metrics::report_text(a.report), metrics::report_text(b.report));
}
