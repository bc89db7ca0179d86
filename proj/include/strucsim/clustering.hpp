#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strucsim/dataset.hpp"
#include "strucsim/kernel.hpp"
#include "strucsim/klrr.hpp"
#include "strucsim/similarity.hpp"

namespace strucsim {

inline constexpr int kKmeansMaxIterations = 300;

struct ClusterResult {
  std::vector<int> assignments;
  std::optional<double> error_rate;
  int iterations = 0;
  bool converged = false;
  std::uint64_t seed = 0;
  /// Within-cluster cost after each centroid update.
  std::vector<double> cost_history;
  /// Spectral clustering only: nodes with zero degree (regularized to 1).
  int isolated_nodes = 0;
};

/// Lloyd's algorithm on the rows of `rows` (n x m). Initialized by assigning
/// every observation to a uniformly random cluster; an emptied cluster is
/// refilled with the point farthest from its own centroid. A point only
/// moves to a strictly closer centroid, lowest index first.
ClusterResult kmeans(const Eigen::MatrixXd& rows, int k, std::uint64_t seed);

/// The same iteration with centroid distances computed from Gram entries.
ClusterResult kernel_kmeans(const Eigen::MatrixXd& gram, int k, std::uint64_t seed);

inline ClusterResult kernel_space_kmeans(const GramMatrixXd& gram, int k, std::uint64_t seed) {
  return kernel_kmeans(gram.values, k, seed);
}

/// k-means using row i of W as the feature vector of observation i.
ClusterResult similarity_kmeans(const SimilarityMatrixXd& w, int k, std::uint64_t seed);

/// Normalized spectral clustering on |affinity| with a zeroed diagonal:
/// top-k eigenvectors of D^-1/2 A D^-1/2, rows scaled to unit length, then
/// k-means on the rows.
ClusterResult spectral_cluster(const Eigen::MatrixXd& affinity, int k, std::uint64_t seed);

/// 1 - (best cluster-to-class matching) / n. Exhaustive over permutations
/// when max(k, classes) <= 8, Hungarian otherwise.
double error_rate(std::span<const int> assignments, std::span<const int> labels, int k);

/// Maximum total weight of a one-to-one row/column matching in a square
/// matrix (Hungarian method).
double max_weight_matching(const Eigen::MatrixXd& weight);

/// Same quantity by enumerating every permutation; for small matrices.
double max_weight_matching_exhaustive(const Eigen::MatrixXd& weight);

enum class Representation { observation, kernel, similarity_w, structured_kernel };
enum class ClusterAlgorithm { kmeans, spectral };

std::string to_string(Representation r);
std::string to_string(ClusterAlgorithm a);
Representation parse_representation(const std::string& text);
ClusterAlgorithm parse_algorithm(const std::string& text);

struct PipelineSpec {
  Representation representation = Representation::similarity_w;
  ClusterAlgorithm algorithm = ClusterAlgorithm::kmeans;
  int k = 2;
  KernelSpec kernel = KernelSpec::linear();
  LambdaRule lambda = LambdaRule::relative(0.1);
  /// Structured-kernel bandwidth; the median pairwise distance when unset.
  std::optional<double> structured_bandwidth;
  /// Sign convention of W for the similarity-W representation. k-means on
  /// signed rows separates a point from its negation even inside one
  /// subspace, so magnitudes are the default.
  CosineSign w_sign = CosineSign::absolute;
};

struct TrialSummary {
  std::string dataset;
  Representation representation = Representation::observation;
  ClusterAlgorithm algorithm = ClusterAlgorithm::kmeans;
  int k = 0;
  double mean_error = 0;
  double std_error = 0;  // population standard deviation over trials
  int trials = 0;
  std::vector<double> errors;
};

/// Runs the pipeline with seeds base_seed .. base_seed + n_trials - 1. The
/// representation is computed once; only the clustering initialization
/// varies between trials.
TrialSummary run_trials(const Dataset& data, const PipelineSpec& spec, int n_trials, std::uint64_t base_seed);

/// `dataset,representation,algorithm,k,mean_error,std_error,trials`
void write_trial_csv(std::ostream& out, std::span<const TrialSummary> rows);

}  // namespace strucsim
