#pragma once

// Kernel specifications, Gram matrices and cross-kernel blocks. Every
// computation downstream reaches the feature map only through these
// functions; the feature map itself is never materialized.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "strucsim/error.hpp"
#include "strucsim/hash.hpp"

namespace strucsim {

class KernelSpec;

struct LinearKernel {};

/// exp(-|a-b|^2 / (2 bandwidth^2)); bandwidth is in observation units.
struct RbfKernel {
  double bandwidth = 1.0;
};

/// (a.b + offset)^degree; offset > 0 gives the inhomogeneous kernel.
struct PolynomialKernel {
  int degree = 3;
  double offset = 1.0;
};

/// Pointwise product of two kernels.
struct ProductKernel {
  std::shared_ptr<const KernelSpec> left;
  std::shared_ptr<const KernelSpec> right;
};

class KernelSpec {
 public:
  using Variant = std::variant<LinearKernel, RbfKernel, PolynomialKernel, ProductKernel>;

  static constexpr int kMaxDepth = 8;

  KernelSpec() : variant_(LinearKernel{}) {}

  static KernelSpec linear() { return KernelSpec(LinearKernel{}); }
  static KernelSpec rbf(double bandwidth) { return checked(RbfKernel{bandwidth}); }
  static KernelSpec polynomial(int degree, double offset = 1.0) {
    return checked(PolynomialKernel{degree, offset});
  }
  static KernelSpec product(KernelSpec left, KernelSpec right) {
    return checked(ProductKernel{std::make_shared<const KernelSpec>(std::move(left)),
                                 std::make_shared<const KernelSpec>(std::move(right))});
  }

  const Variant& variant() const { return variant_; }

  /// 1 for a leaf kernel; products add one level.
  int depth() const {
    if (const auto* p = std::get_if<ProductKernel>(&variant_)) {
      return 1 + std::max(p->left->depth(), p->right->depth());
    }
    return 1;
  }

  void validate() const {
    std::visit(
        [this](const auto& k) {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, RbfKernel>) {
            if (!(k.bandwidth > 0.0) || !std::isfinite(k.bandwidth)) {
              throw InputError("rbf bandwidth must be positive and finite");
            }
          } else if constexpr (std::is_same_v<K, PolynomialKernel>) {
            if (k.degree < 1) throw InputError("polynomial degree must be >= 1");
            if (!(k.offset >= 0.0) || !std::isfinite(k.offset)) {
              throw InputError("polynomial offset must be nonnegative");
            }
          } else if constexpr (std::is_same_v<K, ProductKernel>) {
            if (!k.left || !k.right) throw InputError("product kernel needs two factors");
            if (depth() > kMaxDepth) throw InputError("product kernel nesting exceeds depth 8");
            k.left->validate();
            k.right->validate();
          }
        },
        variant_);
  }

  std::string describe() const {
    return std::visit(
        [](const auto& k) -> std::string {
          using K = std::decay_t<decltype(k)>;
          if constexpr (std::is_same_v<K, LinearKernel>) {
            return "linear";
          } else if constexpr (std::is_same_v<K, RbfKernel>) {
            return "rbf(" + std::to_string(k.bandwidth) + ")";
          } else if constexpr (std::is_same_v<K, PolynomialKernel>) {
            return "poly(" + std::to_string(k.degree) + "," + std::to_string(k.offset) + ")";
          } else {
            return "product(" + k.left->describe() + "," + k.right->describe() + ")";
          }
        },
        variant_);
  }

 private:
  explicit KernelSpec(Variant v) : variant_(std::move(v)) {}

  template <typename K>
  static KernelSpec checked(K k) {
    KernelSpec spec{Variant(std::move(k))};
    spec.validate();
    return spec;
  }

  Variant variant_;
};

namespace detail {

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar eval_unchecked(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& a,
                                         const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  return std::visit(
      [&](const auto& k) -> Scalar {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, LinearKernel>) {
          return a.dot(b);
        } else if constexpr (std::is_same_v<K, RbfKernel>) {
          const Scalar bw = static_cast<Scalar>(k.bandwidth);
          return std::exp(-(a - b).squaredNorm() / (Scalar(2) * bw * bw));
        } else if constexpr (std::is_same_v<K, PolynomialKernel>) {
          return std::pow(a.dot(b) + static_cast<Scalar>(k.offset), k.degree);
        } else {
          return eval_unchecked(*k.left, a, b) * eval_unchecked(*k.right, a, b);
        }
      },
      spec.variant());
}

}  // namespace detail

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar eval_kernel(const KernelSpec& spec, const Eigen::MatrixBase<DerivedA>& a,
                                      const Eigen::MatrixBase<DerivedB>& b) {
  if (a.size() != b.size() || a.size() < 1) {
    throw InputError("kernel arguments must be nonempty vectors of equal dimension");
  }
  return detail::eval_unchecked(spec, a, b);
}

template <typename Scalar>
struct GramMatrix {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Matrix values;
  /// Empty for matrices supplied directly rather than assembled from data.
  std::optional<KernelSpec> kernel;
  std::string fingerprint;

  Eigen::Index size() const { return values.rows(); }

  static GramMatrix from_values(Matrix values, std::string tag = "external") {
    return GramMatrix{std::move(values), std::nullopt, std::move(tag)};
  }
};

using GramMatrixXd = GramMatrix<double>;

/// Gram matrix of the columns of `points` (d x n, one observation per
/// column). Assembled entrywise and then symmetrized as (K + K^T)/2.
template <typename Derived>
GramMatrix<typename Derived::Scalar> gram(const KernelSpec& spec, const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = points.cols();
  if (n < 1 || points.rows() < 1) throw InputError("gram: dataset must contain at least one observation");
  spec.validate();
  Matrix values(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      values(i, j) = detail::eval_unchecked(spec, points.col(i), points.col(j));
    }
  }
  values = (Scalar(0.5) * (values + values.transpose())).eval();
  return GramMatrix<Scalar>{std::move(values), spec, matrix_fingerprint(points)};
}

/// n x m block with entry (i, j) = k(x_i, t_j).
template <typename DerivedX, typename DerivedT>
Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> cross_gram(
    const KernelSpec& spec, const Eigen::MatrixBase<DerivedX>& train, const Eigen::MatrixBase<DerivedT>& test) {
  if (train.rows() != test.rows()) throw InputError("cross_gram: dimension mismatch between datasets");
  if (train.rows() < 1) throw InputError("cross_gram: observations must have dimension >= 1");
  Eigen::Matrix<typename DerivedX::Scalar, Eigen::Dynamic, Eigen::Dynamic> out(train.cols(), test.cols());
  for (Eigen::Index j = 0; j < test.cols(); ++j) {
    for (Eigen::Index i = 0; i < train.cols(); ++i) {
      out(i, j) = detail::eval_unchecked(spec, train.col(i), test.col(j));
    }
  }
  return out;
}

/// Median of the pairwise Euclidean distances over all pairs i < j
/// (mean of the two middle values when the pair count is even).
template <typename Derived>
typename Derived::Scalar median_bandwidth(const Eigen::MatrixBase<Derived>& points) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = points.cols();
  if (n < 2) throw InputError("median_bandwidth: need at least two observations");
  std::vector<Scalar> dist;
  dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) dist.push_back((points.col(i) - points.col(j)).norm());
  }
  if (*std::max_element(dist.begin(), dist.end()) == Scalar(0)) {
    throw InputError("median_bandwidth: degenerate dataset (all points identical)");
  }
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + mid, dist.end());
  const Scalar upper = dist[mid];
  const Scalar median =
      dist.size() % 2 == 1 ? upper : (*std::max_element(dist.begin(), dist.begin() + mid) + upper) / Scalar(2);
  // More than half the pairs coincide: still unusable as a bandwidth.
  if (median <= Scalar(0)) throw InputError("median_bandwidth: degenerate dataset (median distance is zero)");
  return median;
}

}  // namespace strucsim
