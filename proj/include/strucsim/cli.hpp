#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "strucsim/anomaly.hpp"
#include "strucsim/clustering.hpp"
#include "strucsim/dataset.hpp"
#include "strucsim/klrr.hpp"

namespace strucsim::cli {

enum class ExitCode : int { ok = 0, validation = 1, runtime = 2 };

struct DatasetConfig {
  std::string source;  // csv | line_circle | clusters | linear_subspace
  std::filesystem::path path;
  bool has_header = false;
  std::optional<std::variant<int, std::string>> label_column;
  std::string name;
  int n_per_class = 200;
  std::optional<double> noise_std;
  LinearSubspaceParams subspace;
  AnomalyCounts counts;
  /// csv anomaly runs: label text of the nominal class.
  std::optional<std::string> nominal_label;
  IonosphereSplitCounts split_counts;
};

struct GraphParams {
  int k = 5;
  SimilarityKind similarity = SimilarityKind::structured;
  std::optional<double> bandwidth;  // unset: median pairwise distance
};

struct ClusterParams {
  std::optional<int> k;  // unset: number of label classes
  int trials = 100;
  std::vector<std::pair<Representation, ClusterAlgorithm>> runs{{Representation::similarity_w, ClusterAlgorithm::kmeans}};
  std::optional<double> bandwidth;
};

struct AnomalyParams {
  int repeats = 100;
  double alpha = 0.05;
  AnomalyMode mode = AnomalyMode::full;
  int knn_neighbor = 2;
  bool shuffle_labels = false;
  DecisionRule rule = DecisionRule::lower_tail;
};

struct BenchParams {
  std::vector<int> sizes{10, 100, 200, 500, 1000};
  int dimension = 10;
  double budget_seconds = 10.0;
  int budget_size = 1000;
  int oracle_size = 500;
  int oracle_iterations = 5000;
  /// Oracle iterations actually timed; the full run is extrapolated.
  int oracle_timed_iterations = 10;
};

struct RunConfig {
  std::string experiment;
  std::optional<DatasetConfig> dataset;
  nlohmann::json kernel;
  LambdaRule lambda = LambdaRule::relative(0.1);
  std::uint64_t seed = 0;
  std::filesystem::path output = "out";
  GraphParams graph;
  ClusterParams cluster;
  AnomalyParams anomaly;
  BenchParams bench;
  /// FNV-1a of the effective configuration (output directory excluded).
  std::string hash;
};

/// Validates `j` for `experiment`, filling defaults. Unknown keys and
/// out-of-range values raise InputError naming the field path.
RunConfig parse_config(const nlohmann::json& j, const std::string& experiment);

std::string config_hash(const nlohmann::json& effective);

/// The dataset for fit, graph and cluster runs.
Dataset load_dataset(const RunConfig& config);

int cmd_fit(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_graph(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_cluster(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_anomaly(const RunConfig& config, std::ostream& out, std::ostream& err);
int cmd_bench(const RunConfig& config, std::ostream& out, std::ostream& err);

/// Entry point shared by the executable and the tests. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace strucsim::cli
