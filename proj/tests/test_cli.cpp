#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "strucsim/cli.hpp"

namespace strucsim {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

const fs::path kDataDir = STRUCSIM_DATA_DIR;

struct Outcome {
  int code = 0;
  std::string out;
  std::string err;
};

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("strucsim_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const std::string& name, const json& j) {
    const fs::path p = dir_ / name;
    std::ofstream(p) << j.dump(2);
    return p;
  }

  Outcome run(std::vector<std::string> args) {
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
  }

  Outcome run_config(const std::string& command, json config, const std::string& out_name = "out") {
    config["output"] = (dir_ / out_name).string();
    return run({command, "--config", write_config(command + "_" + out_name + ".json", config).string()});
  }

  json read_json(const fs::path& p) {
    std::ifstream in(p);
    return json::parse(in);
  }

  std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  }

  fs::path dir_;
};

json line_circle_config(int n_per_class) {
  return {{"dataset", {{"source", "line_circle"}, {"n_per_class", n_per_class}}},
          {"kernel", {{"type", "linear"}}},
          {"lambda", {{"rule", "relative"}, {"value", 0.1}}}};
}

TEST_F(CliTest, MissingSubcommandIsAValidationError) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"transmogrify"}).code, 1);
}

TEST_F(CliTest, HelpExitsCleanly) {
  const Outcome o = run({"--help"});
  EXPECT_EQ(o.code, 0);
  EXPECT_NE(o.out.find("anomaly"), std::string::npos);
}

TEST_F(CliTest, UnknownConfigKeyNamesItsPath) {
  json c = line_circle_config(10);
  c["graph"] = {{"k", 3}, {"neighbours", 4}};
  const Outcome o = run_config("graph", c);
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("graph.neighbours"), std::string::npos) << o.err;
}

TEST_F(CliTest, OutOfRangeValueIsAValidationError) {
  json c = line_circle_config(10);
  c["lambda"] = {{"rule", "relative"}, {"value", 1.5}};
  const Outcome o = run_config("fit", c);
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.err.find("lambda"), std::string::npos) << o.err;
}

TEST_F(CliTest, MissingConfigFileIsAValidationError) {
  EXPECT_EQ(run({"fit", "--config", (dir_ / "nope.json").string()}).code, 1);
}

TEST_F(CliTest, MissingCsvIsAValidationError) {
  json c = line_circle_config(10);
  c["dataset"] = {{"source", "csv"}, {"path", (dir_ / "absent.csv").string()}};
  EXPECT_EQ(run_config("fit", c).code, 1);
}

TEST_F(CliTest, FitWritesModelAndReport) {
  const Outcome o = run_config("fit", line_circle_config(10));
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(dir_ / "out" / "model.json"));
  const json report = read_json(dir_ / "out" / "fit_report.json");
  EXPECT_EQ(report.at("seed"), 0);
  EXPECT_FALSE(report.at("config_hash").get<std::string>().empty());
}

TEST_F(CliTest, LambdaAboveTopEigenvalueWarnsAndKeepsRankZero) {
  json c = line_circle_config(10);
  c["lambda"] = {{"rule", "absolute"}, {"value", 1e9}};
  const Outcome o = run_config("fit", c);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_NE(o.err.find("warning"), std::string::npos);
  const json model = read_json(dir_ / "out" / "model.json");
  EXPECT_EQ(model.at("rank"), 0);
}

TEST_F(CliTest, RepeatedRunsAreByteIdentical) {
  json c = {{"dataset", {{"source", "clusters"}}},
            {"kernel", {{"type", "rbf"}, {"bandwidth", "median"}}},
            {"lambda", {{"rule", "relative"}, {"value", 0.1}}},
            {"anomaly", {{"repeats", 5}}},
            {"seed", 17}};
  ASSERT_EQ(run_config("anomaly", c, "a").code, 0);
  ASSERT_EQ(run_config("anomaly", c, "b").code, 0);
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(dir_ / "a")) {
    EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "b" / entry.path().filename())) << entry.path();
    ++compared;
  }
  EXPECT_GE(compared, 5);
}

TEST_F(CliTest, SeedFlagOverridesConfig) {
  json c = line_circle_config(10);
  c["seed"] = 1;
  c["output"] = (dir_ / "out").string();
  const fs::path cfg = write_config("fit.json", c);
  ASSERT_EQ(run({"fit", "--config", cfg.string(), "--seed", "42"}).code, 0);
  EXPECT_EQ(read_json(dir_ / "out" / "fit_report.json").at("seed"), 42);
}

TEST_F(CliTest, ShuffledLabelsGiveChanceLevelArea) {
  json c = {{"dataset", {{"source", "clusters"}}},
            {"kernel", {{"type", "rbf"}, {"bandwidth", 1.0}}},
            {"lambda", {{"rule", "relative"}, {"value", 0.05}}},
            {"anomaly", {{"repeats", 100}, {"shuffle_labels", true}}}};
  ASSERT_EQ(run_config("anomaly", c).code, 0);
  const json m = read_json(dir_ / "out" / "metrics.json");
  EXPECT_NEAR(m.at("auc_klrr").get<double>(), 0.5, 0.05);
  EXPECT_NEAR(m.at("auc_knn").get<double>(), 0.5, 0.05);
}

TEST_F(CliTest, LinearSubspaceKlrrBeatsNearestNeighbors) {
  json c = {{"dataset", {{"source", "linear_subspace"}}},
            {"kernel", {{"type", "linear"}}},
            {"lambda", {{"rule", "relative"}, {"value", 0.01}}},
            {"anomaly", {{"repeats", 100}}}};
  ASSERT_EQ(run_config("anomaly", c).code, 0);
  const json m = read_json(dir_ / "out" / "metrics.json");
  EXPECT_GT(m.at("auc_klrr").get<double>(), m.at("auc_knn").get<double>());
  EXPECT_TRUE(fs::exists(dir_ / "out" / "roc_mean_klrr.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "roc_per_repeat.csv"));
}

TEST_F(CliTest, CompleteGraphCrossFractionIsTheBaseRate) {
  json c = line_circle_config(10);
  c["graph"] = {{"k", 19}};
  ASSERT_EQ(run_config("graph", c).code, 0);
  const json r = read_json(dir_ / "out" / "graph_report.json");
  EXPECT_EQ(r.at("euclidean_edges"), 190);
  EXPECT_NEAR(r.at("euclidean_cross_fraction").get<double>(), 100.0 / 190.0, 1e-9);
  EXPECT_NEAR(r.at("structural_cross_fraction").get<double>(), 100.0 / 190.0, 1e-9);
}

TEST_F(CliTest, GraphKMustLeaveANeighbor) {
  json c = line_circle_config(10);
  c["graph"] = {{"k", 20}};
  EXPECT_EQ(run_config("graph", c).code, 1);
}

TEST_F(CliTest, ClusterWritesSummary) {
  json c = line_circle_config(20);
  c["cluster"] = {{"trials", 3},
                  {"runs", json::array({{{"representation", "observation"}},
                                        {{"representation", "similarity-W"}, {"algorithm", "spectral"}}})}};
  const Outcome o = run_config("cluster", c);
  ASSERT_EQ(o.code, 0) << o.err;
  const std::string csv = slurp(dir_ / "out" / "cluster_summary.csv");
  EXPECT_EQ(csv.rfind("dataset,representation,algorithm,k,mean_error,std_error,trials\n", 0), 0u);
  EXPECT_NE(csv.find("line_circle,observation,kmeans,2,"), std::string::npos);
  EXPECT_NE(csv.find("line_circle,similarity-W,spectral,2,"), std::string::npos);
}

TEST_F(CliTest, BenchRunsASmallSweep) {
  json c = {{"bench", {{"sizes", {10, 40}}, {"budget_size", 40}, {"oracle_size", 20}, {"oracle_iterations", 50}}}};
  const Outcome o = run_config("bench", c);
  ASSERT_EQ(o.code, 0) << o.err;
  EXPECT_TRUE(fs::exists(dir_ / "out" / "bench_results.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "out" / "bench_timing.csv"));
}

TEST_F(CliTest, IrisSimilarityKmeansErrorIsLow) {
  const fs::path iris = kDataDir / "iris.csv";
  if (!fs::exists(iris)) GTEST_SKIP() << "run tools/prepare_datasets.py first";
  json c = {{"dataset", {{"source", "csv"}, {"path", iris.string()}, {"has_header", true}, {"label_column", -1}}},
            {"kernel", {{"type", "rbf"}, {"bandwidth", 1.5}}},
            {"lambda", {{"rule", "relative"}, {"value", 0.01}}},
            {"cluster", {{"trials", 100}}}};
  ASSERT_EQ(run_config("cluster", c).code, 0);
  const json s = read_json(dir_ / "out" / "cluster_summary.json");
  EXPECT_LE(s.at("rows").at(0).at("mean_error").get<double>(), 0.14);
}

}  // namespace
}  // namespace strucsim
