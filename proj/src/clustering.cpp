#include "strucsim/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include "strucsim/error.hpp"
#include "strucsim/format.hpp"
#include "strucsim/rng.hpp"

namespace strucsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Centroids in input space.
class EuclideanDistances {
 public:
  explicit EuclideanDistances(const Eigen::MatrixXd& rows) : rows_(rows) {}

  Eigen::Index size() const { return rows_.rows(); }

  void update(const std::vector<int>& assign, int k) {
    centroids_ = Eigen::MatrixXd::Zero(k, rows_.cols());
    counts_ = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < size(); ++i) {
      centroids_.row(assign[static_cast<std::size_t>(i)]) += rows_.row(i);
      ++counts_(assign[static_cast<std::size_t>(i)]);
    }
    for (int c = 0; c < k; ++c) {
      if (counts_(c) > 0) centroids_.row(c) /= static_cast<double>(counts_(c));
    }
  }

  double distance(Eigen::Index i, int c) const {
    if (counts_(c) == 0) return kInf;
    return (rows_.row(i) - centroids_.row(c)).squaredNorm();
  }

 private:
  const Eigen::MatrixXd& rows_;
  Eigen::MatrixXd centroids_;
  Eigen::VectorXi counts_;
};

/// Centroids in feature space, touched only through Gram entries:
/// |phi(x_i) - m_c|^2 = K_ii - 2/|c| sum_j K_ij + 1/|c|^2 sum_jl K_jl.
class KernelDistances {
 public:
  explicit KernelDistances(const Eigen::MatrixXd& gram) : gram_(gram) {}

  Eigen::Index size() const { return gram_.rows(); }

  void update(const std::vector<int>& assign, int k) {
    const Eigen::Index n = size();
    Eigen::MatrixXd indicator = Eigen::MatrixXd::Zero(n, k);
    counts_ = Eigen::VectorXi::Zero(k);
    for (Eigen::Index i = 0; i < n; ++i) {
      indicator(i, assign[static_cast<std::size_t>(i)]) = 1.0;
      ++counts_(assign[static_cast<std::size_t>(i)]);
    }
    point_sums_ = gram_ * indicator;
    cluster_sums_ = (indicator.transpose() * point_sums_).diagonal();
  }

  double distance(Eigen::Index i, int c) const {
    if (counts_(c) == 0) return kInf;
    const double size = static_cast<double>(counts_(c));
    return gram_(i, i) - 2.0 * point_sums_(i, c) / size + cluster_sums_(c) / (size * size);
  }

 private:
  const Eigen::MatrixXd& gram_;
  Eigen::MatrixXd point_sums_;
  Eigen::VectorXd cluster_sums_;
  Eigen::VectorXi counts_;
};

template <typename Distances>
void repair_empty(std::vector<int>& assign, int k, const Distances& dist) {
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  for (int a : assign) ++counts[static_cast<std::size_t>(a)];
  std::vector<char> moved(assign.size(), 0);
  for (int c = 0; c < k; ++c) {
    if (counts[static_cast<std::size_t>(c)] > 0) continue;
    std::size_t pick = assign.size();
    double farthest = -1.0;
    for (std::size_t i = 0; i < assign.size(); ++i) {
      if (moved[i] || counts[static_cast<std::size_t>(assign[i])] < 2) continue;
      const double d = dist.distance(static_cast<Eigen::Index>(i), assign[i]);
      if (d > farthest) {
        farthest = d;
        pick = i;
      }
    }
    --counts[static_cast<std::size_t>(assign[pick])];
    assign[pick] = c;
    counts[static_cast<std::size_t>(c)] = 1;
    moved[pick] = 1;
  }
}

template <typename Distances>
double total_cost(const std::vector<int>& assign, const Distances& dist) {
  double cost = 0.0;
  for (std::size_t i = 0; i < assign.size(); ++i) cost += dist.distance(static_cast<Eigen::Index>(i), assign[i]);
  return cost;
}

template <typename Distances>
ClusterResult lloyd(Distances& dist, int k, std::uint64_t seed) {
  const Eigen::Index n = dist.size();
  if (k < 1) throw InputError("k-means: k must be >= 1");
  if (k > n) throw InputError("k-means: k exceeds the number of observations");

  ClusterResult result;
  result.seed = seed;
  Rng rng(seed);
  std::vector<int> assign(static_cast<std::size_t>(n));
  for (auto& a : assign) a = static_cast<int>(rng.index(static_cast<std::size_t>(k)));
  dist.update(assign, k);
  repair_empty(assign, k, dist);

  for (int it = 0; it < kKmeansMaxIterations; ++it) {
    dist.update(assign, k);
    result.cost_history.push_back(total_cost(assign, dist));
    std::vector<int> next(assign);
    for (Eigen::Index i = 0; i < n; ++i) {
      int best = assign[static_cast<std::size_t>(i)];
      double best_d = dist.distance(i, best);
      for (int c = 0; c < k; ++c) {
        const double d = dist.distance(i, c);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      next[static_cast<std::size_t>(i)] = best;
    }
    repair_empty(next, k, dist);
    result.iterations = it + 1;
    if (next == assign) {
      result.converged = true;
      break;
    }
    assign = std::move(next);
  }
  result.assignments = std::move(assign);
  return result;
}

}  // namespace

ClusterResult kmeans(const Eigen::MatrixXd& rows, int k, std::uint64_t seed) {
  if (rows.cols() < 1) throw InputError("kmeans: observations must have at least one coordinate");
  EuclideanDistances dist(rows);
  return lloyd(dist, k, seed);
}

ClusterResult kernel_kmeans(const Eigen::MatrixXd& gram, int k, std::uint64_t seed) {
  if (gram.rows() != gram.cols()) throw InputError("kernel_kmeans: Gram matrix must be square");
  KernelDistances dist(gram);
  return lloyd(dist, k, seed);
}

ClusterResult similarity_kmeans(const SimilarityMatrixXd& w, int k, std::uint64_t seed) {
  return kmeans(w.values, k, seed);
}

ClusterResult spectral_cluster(const Eigen::MatrixXd& affinity, int k, std::uint64_t seed) {
  const Eigen::Index n = affinity.rows();
  if (affinity.cols() != n) throw InputError("spectral_cluster: affinity must be square");
  if (k < 1 || k > n) throw InputError("spectral_cluster: k must lie in [1, n]");
  if (relative_asymmetry(affinity) > 1e-8) throw InputError("spectral_cluster: affinity must be symmetric");

  Eigen::MatrixXd a = affinity.cwiseAbs();
  a.diagonal().setZero();
  Eigen::VectorXd inv_sqrt_degree(n);
  int isolated = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double degree = a.row(i).sum();
    if (degree <= 0.0) {
      degree = 1.0;
      ++isolated;
    }
    inv_sqrt_degree(i) = 1.0 / std::sqrt(degree);
  }
  Eigen::MatrixXd normalized = inv_sqrt_degree.asDiagonal() * a * inv_sqrt_degree.asDiagonal();
  normalized = (0.5 * (normalized + normalized.transpose())).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(normalized);
  if (es.info() != Eigen::Success) throw NumericalError("spectral_cluster: eigendecomposition failed");

  Eigen::MatrixXd embedding = es.eigenvectors().rightCols(k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double norm = embedding.row(i).norm();
    if (norm > 0.0) embedding.row(i) /= norm;
  }
  ClusterResult result = kmeans(embedding, k, seed);
  result.isolated_nodes = isolated;
  return result;
}

double max_weight_matching_exhaustive(const Eigen::MatrixXd& weight) {
  const Eigen::Index m = weight.rows();
  if (weight.cols() != m) throw InputError("matching: weight matrix must be square");
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  double best = -kInf;
  do {
    double total = 0.0;
    for (Eigen::Index r = 0; r < m; ++r) total += weight(r, perm[static_cast<std::size_t>(r)]);
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return m == 0 ? 0.0 : best;
}

double max_weight_matching(const Eigen::MatrixXd& weight) {
  const Eigen::Index m = weight.rows();
  if (weight.cols() != m) throw InputError("matching: weight matrix must be square");
  if (m == 0) return 0.0;
  // Shortest augmenting path Hungarian method on cost = -weight, 1-based
  // potentials u (rows), v (columns); way[] records the alternating path.
  const auto sz = static_cast<std::size_t>(m + 1);
  std::vector<double> u(sz, 0.0), v(sz, 0.0), minv(sz);
  std::vector<std::size_t> p(sz, 0), way(sz, 0);
  std::vector<char> used(sz);
  for (std::size_t i = 1; i < sz; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j < sz; ++j) {
        if (used[j]) continue;
        const double cur = -weight(static_cast<Eigen::Index>(i0 - 1), static_cast<Eigen::Index>(j - 1)) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j < sz; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j < sz; ++j) {
    total += weight(static_cast<Eigen::Index>(p[j] - 1), static_cast<Eigen::Index>(j - 1));
  }
  return total;
}

double error_rate(std::span<const int> assignments, std::span<const int> labels, int k) {
  if (assignments.size() != labels.size()) throw InputError("error_rate: assignments and labels differ in length");
  if (assignments.empty()) throw InputError("error_rate: no observations");
  if (k < 1) throw InputError("error_rate: k must be >= 1");
  std::map<int, int> classes;
  for (int l : labels) classes.emplace(l, 0);
  int next = 0;
  for (auto& [label, id] : classes) id = next++;

  const int m = std::max(k, next);
  Eigen::MatrixXd confusion = Eigen::MatrixXd::Zero(m, m);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (assignments[i] < 0 || assignments[i] >= k) throw InputError("error_rate: cluster id out of range");
    confusion(assignments[i], classes.at(labels[i])) += 1.0;
  }
  const double matched = m <= 8 ? max_weight_matching_exhaustive(confusion) : max_weight_matching(confusion);
  return 1.0 - matched / static_cast<double>(labels.size());
}

std::string to_string(Representation r) {
  switch (r) {
    case Representation::observation: return "observation";
    case Representation::kernel: return "kernel";
    case Representation::similarity_w: return "similarity-W";
    case Representation::structured_kernel: return "structured-kernel";
  }
  return "?";
}

std::string to_string(ClusterAlgorithm a) { return a == ClusterAlgorithm::kmeans ? "kmeans" : "spectral"; }

Representation parse_representation(const std::string& text) {
  for (auto r : {Representation::observation, Representation::kernel, Representation::similarity_w,
                 Representation::structured_kernel}) {
    if (text == to_string(r)) return r;
  }
  throw InputError("unknown representation '" + text +
                   "' (expected observation, kernel, similarity-W or structured-kernel)");
}

ClusterAlgorithm parse_algorithm(const std::string& text) {
  if (text == "kmeans") return ClusterAlgorithm::kmeans;
  if (text == "spectral") return ClusterAlgorithm::spectral;
  throw InputError("unknown algorithm '" + text + "' (expected kmeans or spectral)");
}

TrialSummary run_trials(const Dataset& data, const PipelineSpec& spec, int n_trials, std::uint64_t base_seed) {
  if (n_trials < 1) throw InputError("run_trials: n_trials must be >= 1");
  data.validate();
  const auto labels = data.label_span();

  // Prepared once: observation rows, a Gram matrix, or an affinity.
  Eigen::MatrixXd prepared;
  switch (spec.representation) {
    case Representation::observation:
      if (spec.algorithm == ClusterAlgorithm::spectral) {
        throw InputError("run_trials: spectral clustering needs a kernel or similarity representation");
      }
      prepared = data.points.transpose();
      break;
    case Representation::kernel:
      prepared = gram(spec.kernel, data.points).values;
      break;
    case Representation::similarity_w:
    case Representation::structured_kernel: {
      const auto model = fit(gram(spec.kernel, data.points), spec.lambda);
      if (spec.representation == Representation::similarity_w) {
        prepared = cosine_similarity(model, spec.w_sign).values;
      } else {
        const double bw = spec.structured_bandwidth ? *spec.structured_bandwidth : median_bandwidth(data.points);
        prepared = structured_similarity(model, data.points, bw).values;
      }
      break;
    }
  }

  TrialSummary summary;
  summary.dataset = data.name;
  summary.representation = spec.representation;
  summary.algorithm = spec.algorithm;
  summary.k = spec.k;
  summary.trials = n_trials;
  for (int t = 0; t < n_trials; ++t) {
    const std::uint64_t seed = base_seed + static_cast<std::uint64_t>(t);
    ClusterResult r;
    if (spec.algorithm == ClusterAlgorithm::spectral) {
      r = spectral_cluster(prepared, spec.k, seed);
    } else if (spec.representation == Representation::kernel ||
               spec.representation == Representation::structured_kernel) {
      r = kernel_kmeans(prepared, spec.k, seed);
    } else {
      r = kmeans(prepared, spec.k, seed);
    }
    summary.errors.push_back(error_rate(r.assignments, labels, spec.k));
  }
  const double n = static_cast<double>(n_trials);
  summary.mean_error = std::accumulate(summary.errors.begin(), summary.errors.end(), 0.0) / n;
  double var = 0.0;
  for (double e : summary.errors) var += (e - summary.mean_error) * (e - summary.mean_error);
  summary.std_error = std::sqrt(var / n);
  return summary;
}

void write_trial_csv(std::ostream& out, std::span<const TrialSummary> rows) {
  out << "dataset,representation,algorithm,k,mean_error,std_error,trials\n";
  for (const auto& r : rows) {
    out << r.dataset << ',' << to_string(r.representation) << ',' << to_string(r.algorithm) << ',' << r.k << ','
        << format_real(r.mean_error) << ',' << format_real(r.std_error) << ',' << r.trials << '\n';
  }
}

}  // namespace strucsim
