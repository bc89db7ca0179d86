#pragma once

// Manifold anomaly detection by rank-based p-values.
//
// Each reference observation i gets the score G_i = mean_weight_i *
// exp(-residual_i), where the residual is the kernel-space distance to the
// fitted low-rank span and the mean weight is the average |cosine| between
// its representation and the other reference representations. A test point
// receives p = fraction of reference scores strictly below its own score;
// small p means anomalous.

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "strucsim/kernel.hpp"
#include "strucsim/klrr.hpp"

namespace strucsim {

enum class AnomalyMode {
  full,   // fit on all training points, reference = training set
  split,  // fit on a random half S1, reference = the other half S2
};

struct AnomalyModel {
  KlrrModelXd klrr;
  KernelSpec kernel;
  AnomalyMode mode = AnomalyMode::split;
  std::uint64_t seed = 0;

  Eigen::MatrixXd fit_points;        // columns the KLRR was fitted on
  Eigen::MatrixXd reference_points;  // columns of the reference set
  std::vector<std::size_t> fit_indices;
  std::vector<std::size_t> reference_indices;

  Eigen::MatrixXd reference_representations;  // one column per reference point
  Eigen::VectorXd reference_residuals;
  Eigen::VectorXd reference_weights;
  Eigen::VectorXd reference_scores;
  double zero_norm = 0;  // representation norms at or below count as zero

  Eigen::Index dimension() const { return fit_points.rows(); }
  Eigen::Index reference_size() const { return reference_scores.size(); }
};

/// Full mode fits on every column; split mode draws |S1| = floor(n/2)
/// columns uniformly without replacement from the seeded stream.
AnomalyModel fit_anomaly(const Eigen::MatrixXd& points, const KernelSpec& kernel, const LambdaRule& rule,
                         AnomalyMode mode, std::uint64_t seed = 0);

/// Split mode with explicit, disjoint index sets.
AnomalyModel fit_anomaly_split(const Eigen::MatrixXd& points, const KernelSpec& kernel, const LambdaRule& rule,
                               std::span<const std::size_t> fit_indices,
                               std::span<const std::size_t> reference_indices);

struct AnomalyScore {
  double p = 0;
  double residual = 0;
  double mean_weight = 0;
  double score = 0;  // mean_weight * exp(-residual)
};

/// Reference entries whose coordinates equal x exactly are left out of the
/// test point's mean weight, so a reference point scores as it did in-sample.
AnomalyScore score(const AnomalyModel& model, const Eigen::VectorXd& x);
std::vector<AnomalyScore> score_all(const AnomalyModel& model, const Eigen::MatrixXd& points);

/// Fraction of reference scores strictly below `value`.
double rank_pvalue(std::span<const double> reference, double value);

enum class DecisionRule {
  lower_tail,  // anomalous iff p <= alpha
  literal,     // anomalous iff p > alpha
};

bool decide(double p, double alpha, DecisionRule rule = DecisionRule::lower_tail);

/// Euclidean k-NN p-value baseline: each training point is scored by the
/// distance to its K-th nearest other training point; a test point by the
/// distance to its K-th nearest training point. p = fraction of training
/// distances strictly larger than the test distance.
struct KnnBaseline {
  Eigen::MatrixXd train;
  int neighbor = 2;
  Eigen::VectorXd train_distances;
};

KnnBaseline fit_knn_baseline(const Eigen::MatrixXd& train, int neighbor);
double knn_pvalue(const KnnBaseline& baseline, const Eigen::VectorXd& x);
double knn_pvalue_baseline(const Eigen::MatrixXd& train, const Eigen::VectorXd& x, int neighbor);

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1), nondecreasing
  double auc = 0;
};

/// A test point is flagged when p <= threshold; the threshold sweeps every
/// distinct p-value.
RocCurve roc(std::span<const double> nominal_p, std::span<const double> anomalous_p);

double trapezoid_auc(std::span<const RocPoint> points);

/// TPR at a given FPR: the highest TPR reached exactly at that FPR, otherwise
/// linear interpolation between the neighboring points.
double interpolate_tpr(const RocCurve& curve, double fpr);

/// Pointwise mean of the curves on a uniform FPR grid.
RocCurve mean_roc(std::span<const RocCurve> curves, int grid_points = 101);

/// Header `fpr,tpr`, one point per line, 9 significant digits.
void write_roc_csv(std::ostream& out, const RocCurve& curve);

/// Kolmogorov-Smirnov distance between the empirical distribution of the
/// values and Uniform[0, 1].
double ks_uniform_statistic(std::span<const double> values);

}  // namespace strucsim
