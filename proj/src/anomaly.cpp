#include "strucsim/anomaly.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "strucsim/error.hpp"
#include "strucsim/format.hpp"
#include "strucsim/rng.hpp"
#include "strucsim/similarity.hpp"

namespace strucsim {

namespace {

Eigen::MatrixXd gather(const Eigen::MatrixXd& points, std::span<const std::size_t> indices) {
  Eigen::MatrixXd out(points.rows(), static_cast<Eigen::Index>(indices.size()));
  for (std::size_t c = 0; c < indices.size(); ++c) {
    out.col(static_cast<Eigen::Index>(c)) = points.col(static_cast<Eigen::Index>(indices[c]));
  }
  return out;
}

/// Mean |cosine| of each reference representation against the others.
Eigen::VectorXd leave_one_out_weights(const Eigen::MatrixXd& reps, double zero_norm) {
  const Eigen::Index m = reps.cols();
  const Eigen::MatrixXd c = column_cosines(reps, reps, zero_norm).cwiseAbs();
  Eigen::VectorXd w(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    w(i) = m > 1 ? (c.row(i).sum() - c(i, i)) / static_cast<double>(m - 1) : 0.0;
  }
  return w;
}

void finish_reference(AnomalyModel& model) {
  model.zero_norm = zero_column_threshold(model.reference_representations);
  model.reference_weights = leave_one_out_weights(model.reference_representations, model.zero_norm);
  model.reference_scores =
      model.reference_weights.array() * (-model.reference_residuals.array()).exp();
}

}  // namespace

AnomalyModel fit_anomaly(const Eigen::MatrixXd& points, const KernelSpec& kernel, const LambdaRule& rule,
                         AnomalyMode mode, std::uint64_t seed) {
  const Eigen::Index n = points.cols();
  if (n < 4) throw InputError("fit_anomaly: need at least 4 training observations");
  if (!points.allFinite()) throw InputError("fit_anomaly: training data contains non-finite entries");

  if (mode == AnomalyMode::split) {
    Rng rng(seed);
    std::vector<std::size_t> order = rng.permutation(static_cast<std::size_t>(n));
    const auto half = static_cast<std::ptrdiff_t>(n / 2);
    std::vector<std::size_t> first(order.begin(), order.begin() + half);
    std::vector<std::size_t> second(order.begin() + half, order.end());
    std::sort(first.begin(), first.end());
    std::sort(second.begin(), second.end());
    AnomalyModel model = fit_anomaly_split(points, kernel, rule, first, second);
    model.seed = seed;
    return model;
  }

  AnomalyModel model;
  model.kernel = kernel;
  model.mode = AnomalyMode::full;
  model.seed = seed;
  model.fit_indices.resize(static_cast<std::size_t>(n));
  std::iota(model.fit_indices.begin(), model.fit_indices.end(), std::size_t{0});
  model.reference_indices = model.fit_indices;
  model.fit_points = points;
  model.reference_points = points;
  model.klrr = fit(gram(kernel, points), rule);
  model.reference_representations = model.klrr.representation;
  model.reference_residuals = in_sample_residuals(model.klrr);
  finish_reference(model);
  return model;
}

AnomalyModel fit_anomaly_split(const Eigen::MatrixXd& points, const KernelSpec& kernel, const LambdaRule& rule,
                               std::span<const std::size_t> fit_indices,
                               std::span<const std::size_t> reference_indices) {
  const auto n = static_cast<std::size_t>(points.cols());
  if (fit_indices.empty() || reference_indices.empty()) {
    throw InputError("fit_anomaly: both halves of the split must be nonempty");
  }
  std::vector<char> seen(n, 0);
  for (auto idx : {fit_indices, reference_indices}) {
    for (std::size_t i : idx) {
      if (i >= n) throw InputError("fit_anomaly: split index out of range");
      if (seen[i]) throw InputError("fit_anomaly: split halves must be disjoint");
      seen[i] = 1;
    }
  }

  AnomalyModel model;
  model.kernel = kernel;
  model.mode = AnomalyMode::split;
  model.fit_indices.assign(fit_indices.begin(), fit_indices.end());
  model.reference_indices.assign(reference_indices.begin(), reference_indices.end());
  model.fit_points = gather(points, fit_indices);
  model.reference_points = gather(points, reference_indices);
  model.klrr = fit(gram(kernel, model.fit_points), rule);

  const Eigen::MatrixXd cross = cross_gram(kernel, model.fit_points, model.reference_points);
  const Eigen::Index m = model.reference_points.cols();
  model.reference_representations.resize(model.fit_points.cols(), m);
  model.reference_residuals.resize(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto x = model.reference_points.col(i);
    const auto rep = project_test(model.klrr, cross.col(i), eval_kernel(kernel, x, x));
    model.reference_representations.col(i) = rep.z;
    model.reference_residuals(i) = rep.residual;
  }
  finish_reference(model);
  return model;
}

std::vector<AnomalyScore> score_all(const AnomalyModel& model, const Eigen::MatrixXd& points) {
  if (points.rows() != model.dimension()) throw InputError("score: test dimension does not match the model");
  const Eigen::MatrixXd cross = cross_gram(model.kernel, model.fit_points, points);
  const std::span<const double> reference(model.reference_scores.data(),
                                          static_cast<std::size_t>(model.reference_scores.size()));
  const Eigen::Index m = model.reference_size();
  std::vector<AnomalyScore> out;
  out.reserve(static_cast<std::size_t>(points.cols()));
  for (Eigen::Index t = 0; t < points.cols(); ++t) {
    const auto x = points.col(t);
    const auto rep = project_test(model.klrr, cross.col(t), eval_kernel(model.kernel, x, x));
    const Eigen::RowVectorXd cosines =
        column_cosines(rep.z, model.reference_representations, model.zero_norm).cwiseAbs();
    double total = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if ((model.reference_points.col(j).array() == x.array()).all()) continue;
      total += cosines(j);
      ++count;
    }
    AnomalyScore s;
    s.residual = rep.residual;
    s.mean_weight = count ? total / static_cast<double>(count) : 0.0;
    s.score = s.mean_weight * std::exp(-s.residual);
    s.p = rank_pvalue(reference, s.score);
    out.push_back(s);
  }
  return out;
}

AnomalyScore score(const AnomalyModel& model, const Eigen::VectorXd& x) {
  if (x.size() != model.dimension()) throw InputError("score: test dimension does not match the model");
  return score_all(model, x).front();
}

double rank_pvalue(std::span<const double> reference, double value) {
  if (reference.empty()) throw InputError("rank_pvalue: empty reference set");
  const auto below = std::count_if(reference.begin(), reference.end(), [value](double g) { return g < value; });
  return static_cast<double>(below) / static_cast<double>(reference.size());
}

bool decide(double p, double alpha, DecisionRule rule) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("decide: alpha must lie in (0, 1)");
  return rule == DecisionRule::lower_tail ? p <= alpha : p > alpha;
}

namespace {

double kth_smallest(std::vector<double>& values, int k) {
  std::nth_element(values.begin(), values.begin() + (k - 1), values.end());
  return values[static_cast<std::size_t>(k - 1)];
}

}  // namespace

KnnBaseline fit_knn_baseline(const Eigen::MatrixXd& train, int neighbor) {
  const Eigen::Index n = train.cols();
  if (neighbor < 1 || neighbor > n - 1) throw InputError("knn baseline: neighbor index must lie in [1, n-1]");
  KnnBaseline out{train, neighbor, Eigen::VectorXd(n)};
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < n; ++i) {
    dist.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) dist.push_back((train.col(i) - train.col(j)).norm());
    }
    out.train_distances(i) = kth_smallest(dist, neighbor);
  }
  return out;
}

double knn_pvalue(const KnnBaseline& baseline, const Eigen::VectorXd& x) {
  if (x.size() != baseline.train.rows()) throw InputError("knn baseline: test dimension does not match");
  std::vector<double> dist(static_cast<std::size_t>(baseline.train.cols()));
  for (Eigen::Index j = 0; j < baseline.train.cols(); ++j) {
    dist[static_cast<std::size_t>(j)] = (baseline.train.col(j) - x).norm();
  }
  const double mine = kth_smallest(dist, baseline.neighbor);
  const auto worse = (baseline.train_distances.array() > mine).count();
  return static_cast<double>(worse) / static_cast<double>(baseline.train_distances.size());
}

double knn_pvalue_baseline(const Eigen::MatrixXd& train, const Eigen::VectorXd& x, int neighbor) {
  return knn_pvalue(fit_knn_baseline(train, neighbor), x);
}

RocCurve roc(std::span<const double> nominal_p, std::span<const double> anomalous_p) {
  if (nominal_p.empty() || anomalous_p.empty()) throw InputError("roc: both score lists must be nonempty");
  std::vector<double> nominal(nominal_p.begin(), nominal_p.end());
  std::vector<double> anomalous(anomalous_p.begin(), anomalous_p.end());
  std::sort(nominal.begin(), nominal.end());
  std::sort(anomalous.begin(), anomalous.end());
  std::vector<double> thresholds(nominal);
  thresholds.insert(thresholds.end(), anomalous.begin(), anomalous.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  RocCurve curve;
  curve.points.push_back({0.0, 0.0});
  const auto flagged = [](const std::vector<double>& sorted, double t) {
    return static_cast<double>(std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin()) /
           static_cast<double>(sorted.size());
  };
  for (double t : thresholds) curve.points.push_back({flagged(nominal, t), flagged(anomalous, t)});
  curve.auc = trapezoid_auc(curve.points);
  return curve;
}

double trapezoid_auc(std::span<const RocPoint> points) {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i) {
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) / 2.0;
  }
  return area;
}

double interpolate_tpr(const RocCurve& curve, double fpr) {
  const auto& pts = curve.points;
  if (pts.empty()) throw InputError("interpolate_tpr: empty curve");
  std::size_t a = 0;
  while (a + 1 < pts.size() && pts[a + 1].fpr <= fpr) ++a;
  if (pts[a].fpr == fpr || a + 1 == pts.size()) return pts[a].tpr;
  const RocPoint& lo = pts[a];
  const RocPoint& hi = pts[a + 1];
  return lo.tpr + (hi.tpr - lo.tpr) * (fpr - lo.fpr) / (hi.fpr - lo.fpr);
}

RocCurve mean_roc(std::span<const RocCurve> curves, int grid_points) {
  if (curves.empty()) throw InputError("mean_roc: no curves");
  if (grid_points < 2) throw InputError("mean_roc: need at least two grid points");
  RocCurve out;
  for (int g = 0; g < grid_points; ++g) {
    const double f = static_cast<double>(g) / static_cast<double>(grid_points - 1);
    double sum = 0.0;
    for (const auto& c : curves) sum += interpolate_tpr(c, f);
    const double tpr = sum / static_cast<double>(curves.size());
    if (g == 0 && tpr > 0.0) out.points.push_back({0.0, 0.0});
    out.points.push_back({f, tpr});
  }
  out.auc = trapezoid_auc(out.points);
  return out;
}

void write_roc_csv(std::ostream& out, const RocCurve& curve) {
  out << "fpr,tpr\n";
  for (const auto& p : curve.points) out << format_real(p.fpr) << ',' << format_real(p.tpr) << '\n';
}

double ks_uniform_statistic(std::span<const double> values) {
  if (values.empty()) throw InputError("ks_uniform_statistic: no values");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double m = static_cast<double>(v.size());
  double d = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double x = std::clamp(v[i], 0.0, 1.0);
    d = std::max({d, static_cast<double>(i + 1) / m - x, x - static_cast<double>(i) / m});
  }
  return d;
}

}  // namespace strucsim
