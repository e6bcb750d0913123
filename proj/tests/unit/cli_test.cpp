// Copyright 2026 The GRN Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Drives the grn binary end to end.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "grn/temporal_graph.hpp"
#include "json.hpp"

namespace {

namespace fs = std::filesystem;

struct Result {
  int code = -1;
  std::string out;
};

Result grn(const std::string& args) {
  const std::string cmd = std::string(GRN_CLI_PATH) + " " + args + " 2>/dev/null";
  Result r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("grn_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) + "_" +
            std::to_string(::getpid()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const std::string& data_section) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << "[data]\n" << data_section
                     << "\n[model]\n# Layers = 1\nNode Embedding Size = 16\nTime Embedding Dimension = 16\n"
                        "# Graph Retention Heads = 2\nDropout = 0.1\n"
                        "[train]\nEpochs = 2\nBatch Size = 50\nLearning Rate = 0.001\nSeed = 5\n"
                        "[output]\ncheckpoint = "
                     << (dir_ / (name + ".ckpt")).string() << "\nmetrics = " << (dir_ / (name + ".jsonl")).string()
                     << "\n";
    return p;
  }
  fs::path minimal_config(const std::string& name) {
    return write_config(name, "Synthetic Users = 8\nSynthetic Items = 8\nSynthetic Period = 40\nSynthetic Events = 400");
  }

  fs::path dir_;
};

std::vector<nlohmann::json> lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string l;
  while (std::getline(in, l))
    if (!l.empty()) out.push_back(nlohmann::json::parse(l));
  return out;
}

TEST_F(Cli, TrainWritesMetricsCheckpointAndIsRepeatable) {
  const fs::path cfg = minimal_config("a.cfg");
  ASSERT_EQ(grn("train --quiet --config " + cfg.string()).code, 0);
  const std::string first = slurp(dir_ / "a.cfg.jsonl");
  const auto recs = lines(first);
  ASSERT_GE(recs.size(), 2u);
  EXPECT_EQ(recs.front()["phase"], "epoch");
  EXPECT_EQ(recs.back()["phase"], "test");
  EXPECT_TRUE(fs::exists(dir_ / "a.cfg.ckpt"));
  EXPECT_TRUE(fs::exists(dir_ / "a.cfg.jsonl.timing.json"));
  const std::string ckpt = slurp(dir_ / "a.cfg.ckpt");
  ASSERT_EQ(grn("train --quiet --config " + cfg.string()).code, 0);
  EXPECT_EQ(slurp(dir_ / "a.cfg.jsonl"), first);
  EXPECT_EQ(slurp(dir_ / "a.cfg.ckpt"), ckpt);
}

TEST_F(Cli, MissingDatasetIsValidationFailureWithNoOutputs) {
  const fs::path cfg = write_config("b.cfg", "path = " + (dir_ / "absent.csv").string());
  EXPECT_EQ(grn("train --config " + cfg.string()).code, 1);
  EXPECT_FALSE(fs::exists(dir_ / "b.cfg.jsonl"));
  EXPECT_FALSE(fs::exists(dir_ / "b.cfg.ckpt"));
  EXPECT_EQ(grn("train --config " + (dir_ / "nope.cfg").string()).code, 1);
  EXPECT_EQ(grn("train").code, 1);
  EXPECT_EQ(grn("frobnicate").code, 1);
}

TEST_F(Cli, EvalMatchesTrainTestRecordAndParadigmsAgree) {
  const fs::path cfg = minimal_config("c.cfg");
  ASSERT_EQ(grn("train --quiet --config " + cfg.string()).code, 0);
  const auto test = lines(slurp(dir_ / "c.cfg.jsonl")).back();
  const std::string ck = (dir_ / "c.cfg.ckpt").string();
  const Result rec = grn("eval --checkpoint " + ck);
  ASSERT_EQ(rec.code, 0);
  const auto r = lines(rec.out).at(0);
  EXPECT_EQ(r["ap"], test["ap"]);
  EXPECT_EQ(r["auc_roc"], test["auc_roc"]);
  EXPECT_EQ(r["loss"], test["loss"]);
  const Result c1 = grn("eval --checkpoint " + ck + " --paradigm chunkwise --chunk-size 1");
  ASSERT_EQ(c1.code, 0);
  const auto rc = lines(c1.out).at(0);
  EXPECT_NEAR(rc["ap"].get<double>(), r["ap"].get<double>(), 1e-9);
  EXPECT_NEAR(rc["auc_roc"].get<double>(), r["auc_roc"].get<double>(), 1e-9);
  const Result par = grn("eval --checkpoint " + ck + " --paradigm parallel --out " + (dir_ / "e.json").string());
  ASSERT_EQ(par.code, 0);
  EXPECT_NEAR(lines(par.out).at(0)["ap"].get<double>(), r["ap"].get<double>(), 1e-9);
  EXPECT_TRUE(fs::exists(dir_ / "e.json"));
  EXPECT_EQ(grn("eval --checkpoint " + ck + " --paradigm chunkwise").code, 1);
  EXPECT_EQ(grn("eval --checkpoint " + ck + " --paradigm sideways").code, 1);
  EXPECT_EQ(grn("eval --checkpoint " + (dir_ / "none.ckpt").string()).code, 2);
}

TEST_F(Cli, InductiveEvalNeedsUnobservedNodes) {
  const fs::path cfg = minimal_config("d.cfg");
  {
    std::ofstream(cfg, std::ios::app) << "[data]\nUnobservable Node Fraction = 0\n";
  }
  ASSERT_EQ(grn("train --quiet --config " + cfg.string()).code, 0);
  EXPECT_EQ(grn("eval --checkpoint " + (dir_ / "d.cfg.ckpt").string() + " --setting inductive").code, 1);
  EXPECT_EQ(grn("eval --checkpoint " + (dir_ / "d.cfg.ckpt").string() + " --setting sideways").code, 1);
}

TEST_F(Cli, EvalRejectsEdgeFeatureMismatch) {
  const fs::path cfg = minimal_config("f.cfg");
  ASSERT_EQ(grn("train --quiet --config " + cfg.string()).code, 0);
  const fs::path csv = dir_ / "feat.csv";
  std::ofstream(csv) << "src,dst,timestamp,label,f0,f1\na,x,1,0,0.1,0.2\nb,y,2,0,0.3,0.4\na,y,3,0,0.5,0.6\n";
  EXPECT_EQ(grn("eval --checkpoint " + (dir_ / "f.cfg.ckpt").string() + " --data " + csv.string()).code, 1);
}

TEST_F(Cli, SynthRoundTripsAndIsDeterministic) {
  const fs::path a = dir_ / "a.csv", b = dir_ / "b.csv", m = dir_ / "ids.csv";
  ASSERT_EQ(grn("synth --out " + a.string() + " --id-map " + m.string() + " --events 300 --seed 4").code, 0);
  ASSERT_EQ(grn("synth --out " + b.string() + " --events 300 --seed 4").code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
  EXPECT_EQ(grn::load_csv(a.string()).size(), 300u);
  EXPECT_TRUE(fs::exists(m));
  EXPECT_EQ(grn("synth --out /nonexistent/dir/x.csv").code, 1);
  EXPECT_EQ(grn("synth --out " + a.string() + " --noise 2").code, 1);
}

TEST_F(Cli, TrainFromSynthCsvPath) {
  const fs::path csv = dir_ / "s.csv";
  ASSERT_EQ(grn("synth --out " + csv.string() + " --users 6 --items 6 --period 30 --events 300").code, 0);
  const fs::path cfg = write_config("g.cfg", "path = s.csv");
  EXPECT_EQ(grn("train --quiet --config " + cfg.string()).code, 0);
  EXPECT_TRUE(fs::exists(dir_ / "g.cfg.ckpt"));
}

TEST_F(Cli, VerifyPassesAndCatchesInjectedFault) {
  const Result ok = grn("verify");
  EXPECT_EQ(ok.code, 0);
  EXPECT_NE(ok.out.find("properties passed across"), std::string::npos);
  EXPECT_EQ(ok.out.find("FAIL"), std::string::npos);
  const Result bad = grn("verify --inject-fault");
  EXPECT_EQ(bad.code, 1);
  EXPECT_NE(bad.out.find("FAIL retention_core/paradigm_equivalence"), std::string::npos);
}

TEST_F(Cli, BenchValidatesAndReports) {
  EXPECT_EQ(grn("bench --repeats 2").code, 1);
  EXPECT_EQ(grn("bench --lengths 0").code, 1);
  const fs::path out = dir_ / "bench.json";
  const Result r = grn("bench --paradigms recurrent,parallel,chunkwise --chunk-sizes 4 --lengths 10,40 --repeats 3 "
                       "--dim 4 --json --out " + out.string());
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(slurp(out));
  ASSERT_EQ(j["rows"].size(), 6u);
  double min_ratio = 1e300;
  for (const auto& row : j["rows"]) min_ratio = std::min(min_ratio, row["ratio_to_fastest"].get<double>());
  EXPECT_DOUBLE_EQ(min_ratio, 1.0);
  EXPECT_TRUE(j.contains("constant_time_check"));
}

}  // namespace
