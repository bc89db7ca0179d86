#pragma once

// Structural similarity from a fitted representation: cosine similarity of
// the columns of Z, its Gaussian-scaled variant, the distance it induces, and
// k-nearest-neighbor graphs over any weight matrix.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "strucsim/error.hpp"
#include "strucsim/format.hpp"
#include "strucsim/klrr.hpp"

namespace strucsim {

enum class SimilarityKind { cosine, structured };

/// Signed follows w_ij as a plain cosine; absolute stores |w_ij|.
enum class CosineSign { signed_cosine, absolute };

template <typename Scalar>
struct SimilarityMatrix {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> values;
  SimilarityKind kind = SimilarityKind::cosine;
  CosineSign sign = CosineSign::signed_cosine;
  std::optional<Scalar> bandwidth;  // structured only

  Eigen::Index size() const { return values.rows(); }
};

using SimilarityMatrixXd = SimilarityMatrix<double>;

/// Column norms at or below this fraction of the largest column norm count
/// as zero representations.
inline constexpr double kZeroColumnTolerance = 1e-12;

/// Cosine between columns of `left` and `right`; pairs involving a zero
/// column get 0.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> column_cosines(
    const Eigen::MatrixBase<DerivedA>& left, const Eigen::MatrixBase<DerivedB>& right,
    typename DerivedA::Scalar zero_norm) {
  using Scalar = typename DerivedA::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (left.rows() != right.rows()) throw InputError("column_cosines: representation lengths differ");
  auto inverse_norms = [zero_norm](const auto& m) {
    Vector inv(m.cols());
    for (Eigen::Index i = 0; i < m.cols(); ++i) {
      const Scalar nrm = m.col(i).norm();
      inv(i) = nrm > zero_norm ? Scalar(1) / nrm : Scalar(0);
    }
    return inv;
  };
  const Vector a = inverse_norms(left);
  const Vector b = inverse_norms(right);
  Matrix out = a.asDiagonal() * (left.transpose() * right) * b.asDiagonal();
  return out.cwiseMax(Scalar(-1)).cwiseMin(Scalar(1));
}

/// Zero threshold for a representation matrix.
template <typename Derived>
typename Derived::Scalar zero_column_threshold(const Eigen::MatrixBase<Derived>& z) {
  using Scalar = typename Derived::Scalar;
  Scalar largest = 0;
  for (Eigen::Index i = 0; i < z.cols(); ++i) largest = std::max(largest, z.col(i).norm());
  return static_cast<Scalar>(kZeroColumnTolerance) * largest;
}

/// w_ij = z_i^T z_j / (|z_i| |z_j|), with w_ij = 0 when either column is zero.
template <typename Scalar>
SimilarityMatrix<Scalar> cosine_similarity(const KlrrModel<Scalar>& model,
                                           CosineSign sign = CosineSign::signed_cosine) {
  const auto& z = model.representation;
  SimilarityMatrix<Scalar> out;
  out.values = column_cosines(z, z, zero_column_threshold(z));
  // Exact symmetry and a unit diagonal for nonzero columns.
  out.values = (Scalar(0.5) * (out.values + out.values.transpose())).eval();
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    if (out.values(i, i) != Scalar(0)) out.values(i, i) = Scalar(1);
  }
  if (sign == CosineSign::absolute) out.values = out.values.cwiseAbs();
  out.kind = SimilarityKind::cosine;
  out.sign = sign;
  return out;
}

/// s_ij = w_ij exp(-|x_i - x_j|^2 / (2 bandwidth^2)); `points` must be the
/// d x n data the model was fitted on.
template <typename Scalar, typename Derived>
SimilarityMatrix<Scalar> structured_similarity(const KlrrModel<Scalar>& model, const Eigen::MatrixBase<Derived>& points,
                                               Scalar bandwidth) {
  if (!(bandwidth > Scalar(0)) || !std::isfinite(bandwidth)) {
    throw InputError("structured_similarity: bandwidth must be positive");
  }
  if (points.cols() != model.size()) throw InputError("structured_similarity: model was fitted on different data");
  if (model.gram.kernel && model.fingerprint() != matrix_fingerprint(points)) {
    throw InputError("structured_similarity: dataset fingerprint does not match the model");
  }
  SimilarityMatrix<Scalar> out = cosine_similarity(model, CosineSign::signed_cosine);
  const Eigen::Index n = out.size();
  const Scalar denom = Scalar(2) * bandwidth * bandwidth;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (i != j) out.values(i, j) *= std::exp(-(points.col(i) - points.col(j)).squaredNorm() / denom);
    }
  }
  out.kind = SimilarityKind::structured;
  out.bandwidth = bandwidth;
  return out;
}

/// sqrt(s_ii + s_jj - 2 s_ij), clamped at zero under the root.
template <typename Scalar>
Scalar structural_distance(const SimilarityMatrix<Scalar>& s, Eigen::Index i, Eigen::Index j) {
  if (i < 0 || j < 0 || i >= s.size() || j >= s.size()) throw InputError("structural_distance: index out of range");
  const auto& v = s.values;
  return std::sqrt(std::max(Scalar(0), v(i, i) + v(j, j) - Scalar(2) * v(i, j)));
}

template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> structural_distance_matrix(const SimilarityMatrix<Scalar>& s) {
  const Eigen::Index n = s.size();
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) d(i, j) = structural_distance(s, i, j);
  }
  return d;
}

/// Negated pairwise Euclidean distances between the columns of `points`,
/// usable as k-NN weights (larger is closer).
template <typename Derived>
Eigen::MatrixXd euclidean_weights(const Eigen::MatrixBase<Derived>& points) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXd w(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      w(i, j) = -static_cast<double>((points.col(i) - points.col(j)).norm());
    }
  }
  return w;
}

enum class GraphConstruction { euclidean_knn, structural_knn };

struct Edge {
  Eigen::Index a = 0;  // a < b
  Eigen::Index b = 0;
  double weight = 0;
};

struct NeighborGraph {
  Eigen::Index nodes = 0;
  int k = 0;
  GraphConstruction construction = GraphConstruction::euclidean_knn;
  /// Sorted by (a, b); undirected, no self-loops.
  std::vector<Edge> edges;
  /// Edge proposals issued by each node before symmetrization.
  std::vector<int> proposals;
};

/// Each node proposes edges to its k largest-weight neighbors (ties go to
/// the lower index); the graph is the union of all proposals.
template <typename Derived>
NeighborGraph knn_graph(const Eigen::MatrixBase<Derived>& weights, int k,
                        GraphConstruction construction = GraphConstruction::structural_knn) {
  const Eigen::Index n = weights.rows();
  if (weights.cols() != n) throw InputError("knn_graph: weight matrix must be square");
  if (k < 1 || k > n - 1) throw InputError("knn_graph: k must lie in [1, n-1]");

  std::vector<char> adjacency(static_cast<std::size_t>(n * n), 0);
  NeighborGraph g;
  g.nodes = n;
  g.k = k;
  g.construction = construction;
  g.proposals.assign(static_cast<std::size_t>(n), 0);
  std::vector<Eigen::Index> order;
  for (Eigen::Index i = 0; i < n; ++i) {
    order.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](Eigen::Index a, Eigen::Index b) {
      const double wa = static_cast<double>(weights(i, a));
      const double wb = static_cast<double>(weights(i, b));
      return wa > wb || (wa == wb && a < b);
    });
    for (int t = 0; t < k; ++t) {
      const Eigen::Index j = order[static_cast<std::size_t>(t)];
      adjacency[static_cast<std::size_t>(std::min(i, j) * n + std::max(i, j))] = 1;
      ++g.proposals[static_cast<std::size_t>(i)];
    }
  }
  for (Eigen::Index a = 0; a < n; ++a) {
    for (Eigen::Index b = a + 1; b < n; ++b) {
      if (adjacency[static_cast<std::size_t>(a * n + b)]) {
        g.edges.push_back({a, b, static_cast<double>(weights(a, b))});
      }
    }
  }
  return g;
}

/// Fraction of edges joining nodes with different labels (0 for an edgeless
/// graph).
inline double cross_structure_edge_fraction(const NeighborGraph& g, std::span<const int> labels) {
  if (static_cast<Eigen::Index>(labels.size()) != g.nodes) throw InputError("label count must equal node count");
  if (g.edges.empty()) return 0.0;
  std::size_t cross = 0;
  for (const Edge& e : g.edges) {
    if (labels[static_cast<std::size_t>(e.a)] != labels[static_cast<std::size_t>(e.b)]) ++cross;
  }
  return static_cast<double>(cross) / static_cast<double>(g.edges.size());
}

/// One `i j weight` line per edge, 0-based indices.
inline void write_edge_list(std::ostream& out, const NeighborGraph& g) {
  for (const Edge& e : g.edges) out << e.a << ' ' << e.b << ' ' << format_real(e.weight) << '\n';
}

}  // namespace strucsim
