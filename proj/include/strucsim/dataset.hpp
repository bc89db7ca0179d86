#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "strucsim/rng.hpp"

namespace strucsim {

/// Observations stored one per column (d x n). Files use one observation
/// per row and are transposed on load.
struct Dataset {
  Eigen::MatrixXd points;
  std::optional<std::vector<int>> labels;
  /// Original label text for each label id, when labels came from a file.
  std::vector<std::string> label_names;
  std::string name;

  Eigen::Index dimension() const { return points.rows(); }
  Eigen::Index size() const { return points.cols(); }
  bool has_labels() const { return labels.has_value(); }
  std::span<const int> label_span() const;

  /// Stable hash of the matrix contents.
  std::string fingerprint() const;

  /// Throws InputError on non-finite entries or a label count mismatch.
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
};

struct CsvOptions {
  bool has_header = false;
  /// Column holding class labels: an index (negative counts from the end)
  /// or, when the file has a header, a column name.
  std::optional<std::variant<int, std::string>> label_column;
};

Dataset parse_csv(std::istream& in, const CsvOptions& options, std::string name = "csv");
Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options);

// Synthetic generators. All geometry constants live here and nowhere else.

struct LineCircleGeometry {
  double line_x_min = -2.2;
  double line_x_max = 2.2;
  double line_y = -0.83;
  double circle_center_x = 0.0;
  double circle_center_y = 0.0;
  double circle_radius = 0.6;
  /// Default noise, as a fraction of the radius.
  double relative_noise = 0.05;
};

/// Label 0: uniform on a horizontal segment; label 1: uniform in angle on
/// a circle passing close to the segment. Isotropic Gaussian noise added.
Dataset gen_line_circle(int n_per_class, double noise_std, std::uint64_t seed, const LineCircleGeometry& geometry = {});

/// Fit settings tuned for the default geometry: kernel
/// poly(degree 3, offset 1) times rbf(kLineCircleBandwidth), with
/// lambda = kLineCircleRelativeLambda * largest eigenvalue.
inline constexpr double kLineCircleBandwidth = 20.0;
inline constexpr double kLineCircleRelativeLambda = 2.5e-5;

struct AnomalyCounts {
  int train = 20;
  int nominal_test = 50;
  int anomalous_test = 50;
};

/// Nominal training set plus a test set labelled 0 (nominal) / 1 (anomalous).
struct AnomalyData {
  Dataset train;
  Dataset test;
};

struct ClustersGeometry {
  double first_mean_x = 0.0;
  double first_mean_y = 0.0;
  double first_std = 0.25;
  double second_mean_x = 2.5;
  double second_mean_y = 1.5;
  double second_std = 0.6;
  /// Anomalies are uniform on the box spanning both components' 3-sigma extent.
  double box_sigmas = 3.0;
};

/// n nominal draws from the two-component Gaussian mixture (equal weights).
Eigen::MatrixXd sample_clusters_nominal(Eigen::Index n, Rng& rng, const ClustersGeometry& geometry = {});
Eigen::MatrixXd sample_clusters_anomalous(Eigen::Index n, Rng& rng, const ClustersGeometry& geometry = {});
AnomalyData gen_clusters(std::uint64_t seed, const AnomalyCounts& counts = {}, const ClustersGeometry& geometry = {});

struct LinearSubspaceParams {
  int ambient_dim = 3;
  int subspace_dim = 2;
  double coefficient_std = 1.0;
  double nominal_std = 0.05;
  double anomalous_std = 0.75;
};

/// Points on a random subspace; nominal points get small isotropic
/// perturbations, anomalous points large ones.
AnomalyData gen_linear_subspace(std::uint64_t seed, const LinearSubspaceParams& params = {},
                                const AnomalyCounts& counts = {});

/// Points on independent (generally non-orthogonal) linear subspaces of
/// R^ambient_dim: block b spans ranks[b] Gaussian directions and holds
/// points_per_block Gaussian combinations of them. Labels are block ids.
Dataset gen_independent_subspaces(int ambient_dim, std::span<const int> ranks, int points_per_block,
                                  std::uint64_t seed);

struct SplitPlan {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  /// 1 for test entries drawn from the anomalous class.
  std::vector<int> test_anomalous;
  std::uint64_t seed = 0;
  int nominal_train = 0;
  int nominal_test = 0;
  int anomalous_test = 0;
};

struct IonosphereSplitCounts {
  int nominal_train = 175;
  int nominal_test = 15;
  int anomalous_test = 15;
};

/// Index of the nominal ("good") class: the label named "g" when present,
/// otherwise the majority class.
int ionosphere_nominal_label(const Dataset& data);

/// Nominal training and test indices drawn from `nominal_label`; anomalous
/// test indices from every other label.
SplitPlan split_nominal(const Dataset& data, int nominal_label, std::uint64_t seed,
                        const IonosphereSplitCounts& counts);

/// Nominal training indices from the "good" class plus a mixed test set.
/// Expects the 351 x 34 binary-labelled dataset.
SplitPlan split_ionosphere(const Dataset& data, std::uint64_t seed, const IonosphereSplitCounts& counts = {});

}  // namespace strucsim
