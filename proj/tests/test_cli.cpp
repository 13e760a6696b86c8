#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "fixtures.hpp"
#include "phenomnn/phenomnn.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;  ///< stdout and stderr interleaved
};

Run cli(const std::string& args) {
  const std::string cmd = std::string("'") + PHENOMNN_CLI + "' " + args + " 2>&1";
  Run r;
  FILE* p = popen(cmd.c_str(), "r");
  if (!p) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) r.out += buf.data();
  const int st = pclose(p);
  r.status = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
  return r;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("phenomnn_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string toy() { return fixture::data_dir("toy"); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, HelpDocumentsEverySubcommand) {
  const auto r = cli("--help");
  EXPECT_EQ(r.status, 0);
  for (const char* sub : {"train", "eval", "energy-trace", "check-gradients", "step-bound", "expand", "gen-synthetic"})
    EXPECT_NE(r.out.find(sub), std::string::npos) << sub;
  const auto t = cli("train --help");
  for (const char* flag : {"--config", "--preset", "--seed", "--out", "--repeats", "--set", "--dataset", "--parallel"})
    EXPECT_NE(t.out.find(flag), std::string::npos) << flag;
}

TEST(Cli, UnknownFlagIsAnError) {
  const auto r = cli("step-bound --dataset " + toy() + " --bogus 1");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("error"), std::string::npos);
}

TEST(Cli, StepBoundOnToyWithoutGraphTermsIsOne) {
  const auto r = cli("step-bound --dataset " + toy() + " --set lambda0=0 --set lambda1=0");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("bound 1.0\n"), std::string::npos) << r.out;
}

TEST(Cli, StepBoundGeneralVariantReportsSigmaMax) {
  const auto r = cli("step-bound --hypergraph " + toy() + "/hypergraph.txt --set variant=general --set hidden=2");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("sigma_max"), std::string::npos);
}

TEST(Cli, ExpandWritesHandComputedMatrices) {
  const auto out = scratch("expand");
  const auto r = cli("expand --dataset " + toy() + " --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.out;
  std::ifstream in(out / "clique_adj.mtx");
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "%%MatrixMarket matrix coordinate real general");
  std::size_t rows = 0, cols = 0, nnz = 0;
  in >> rows >> cols >> nnz;
  phenomnn::DenseMat a(rows, cols);
  for (std::size_t k = 0; k < nnz; ++k) {
    std::size_t i = 0, j = 0;
    double v = 0;
    in >> i >> j >> v;
    a(i - 1, j - 1) = v;
  }
  EXPECT_EQ(a, phenomnn::DenseMat::from_rows({{1, 1, 0}, {1, 2, 1}, {0, 1, 1}}));
  const auto star = slurp(out / "star_adj.mtx");
  EXPECT_NE(star.find("2 2 1\n"), std::string::npos);
  EXPECT_NE(star.find("1 1 0.5\n"), std::string::npos);
  EXPECT_TRUE(fs::exists(out / "star_deg.mtx"));
  EXPECT_TRUE(fs::exists(out / "clique_deg.mtx"));
  EXPECT_TRUE(fs::exists(out / "incidence.mtx"));
}

TEST(Cli, MissingDatasetIsReportedOnOneLine) {
  const auto r = cli("train --dataset /nonexistent/dir --out " + scratch("missing").string());
  EXPECT_EQ(r.status, 1);
  EXPECT_EQ(r.out.rfind("error: ", 0), 0u) << r.out;
}

TEST(Cli, UnknownConfigKeyIsRejected) {
  const auto r = cli("train --dataset " + toy() + " --set learning_rate=0.1");
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("learning_rate"), std::string::npos);
}

TEST(Cli, GenSyntheticTrainEvalPipeline) {
  const auto data = scratch("pipeline_data"), out = scratch("pipeline_out");
  auto r = cli("gen-synthetic --out " + data.string() + " --nodes-per-community 20 --edges 30 --seed 3");
  ASSERT_EQ(r.status, 0) << r.out;
  r = cli("train --dataset " + data.string() + " --out " + out.string() +
          " --set epochs=20 --set hidden=8 --set prop_step=4 --seed 5");
  ASSERT_EQ(r.status, 0) << r.out;
  for (const char* f : {"metrics.json", "epochs.csv", "checkpoint.json", "config.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const auto metrics = nlohmann::json::parse(slurp(out / "metrics.json"));
  const auto cfg = nlohmann::json::parse(slurp(out / "config.json"));
  EXPECT_EQ(cfg.at("seed").get<int>(), 5);
  EXPECT_EQ(cfg.at("hidden").get<int>(), 8);

  r = cli("eval --checkpoint " + (out / "checkpoint.json").string() + " --dataset " + data.string() + " --split test");
  ASSERT_EQ(r.status, 0) << r.out;
  std::istringstream line(r.out);
  std::string word;
  double acc = -1;
  line >> word >> acc;
  EXPECT_EQ(word, "accuracy");
  EXPECT_DOUBLE_EQ(acc, metrics.at("test_acc").get<double>());

  r = cli("energy-trace --dataset " + data.string() + " --checkpoint " + (out / "checkpoint.json").string());
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out.rfind("iteration,energy,feasible,grad_norm\n", 0), 0u) << r.out;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1 + 4 + 1);
}

TEST(Cli, TrainIsIdempotentForFixedSeed) {
  const auto a = scratch("idem_a"), b = scratch("idem_b");
  const std::string common = "train --dataset " + toy() + " --set epochs=5 --set hidden=4 --set prop_step=2 --seed 9";
  ASSERT_EQ(cli(common + " --out " + a.string()).status, 0);
  ASSERT_EQ(cli(common + " --out " + b.string()).status, 0);
  EXPECT_EQ(slurp(a / "checkpoint.json"), slurp(b / "checkpoint.json"));
  auto ma = nlohmann::json::parse(slurp(a / "metrics.json")), mb = nlohmann::json::parse(slurp(b / "metrics.json"));
  ma.erase("seconds");
  mb.erase("seconds");
  EXPECT_EQ(ma, mb);
}

TEST(Cli, RepeatsWriteSummaryWithMeanAndStd) {
  const auto data = scratch("repeat_data"), out = scratch("repeat_out");
  ASSERT_EQ(cli("gen-synthetic --out " + data.string() + " --nodes-per-community 20 --edges 30").status, 0);
  const auto r = cli("train --dataset " + data.string() + " --out " + out.string() +
                     " --repeats 3 --parallel --set resplit=true --set epochs=10 --set hidden=4 --set prop_step=2");
  ASSERT_EQ(r.status, 0) << r.out;
  const auto s = nlohmann::json::parse(slurp(out / "summary.json"));
  ASSERT_EQ(s.at("test_acc").size(), 3u);
  double mean = 0;
  for (double v : s.at("test_acc")) mean += v / 3.0;
  EXPECT_NEAR(s.at("mean_test_acc").get<double>(), mean, 1e-12);
  EXPECT_GE(s.at("std_test_acc").get<double>(), 0.0);
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(out / ("run_" + std::to_string(k)) / "metrics.json"));
}

TEST(Cli, PresetAndConfigPrecedence) {
  const auto out = scratch("precedence"), cfgdir = scratch("precedence_cfg");
  fs::create_directories(cfgdir);
  std::ofstream(cfgdir / "c.json") << R"({"hidden": 6, "lr": 0.02, "epochs": 2, "prop_step": 2})";
  const auto r = cli("train --dataset " + toy() + " --preset cora_coauthorship_simple --config " +
                     (cfgdir / "c.json").string() + " --set lr=0.03 --out " + out.string());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto cfg = nlohmann::json::parse(slurp(out / "config.json"));
  EXPECT_EQ(cfg.at("hidden").get<int>(), 6);
  EXPECT_EQ(cfg.at("lr").get<double>(), 0.03);
  EXPECT_EQ(cfg.at("lambda0").get<double>(), 20.0);
  EXPECT_EQ(cli("train --dataset " + toy() + " --preset no_such_preset").status, 1);
}

TEST(Cli, CheckGradientsPassesOnSeededModel) {
  const auto r = cli("check-gradients --set variant=general --set hidden=3 --set prop_step=3 --samples 64");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("\"passed\": true"), std::string::npos) << r.out;
}
