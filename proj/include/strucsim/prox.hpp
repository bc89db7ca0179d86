#pragma once

// Iterative proximal-gradient solver for the nuclear-norm regularized
// kernel self-representation problem. It never looks at the closed form and
// serves as an independent reference at small n.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "strucsim/error.hpp"

namespace strucsim {

struct ProxOptions {
  int max_iterations = 5000;
  /// Stop once |Z_{k+1} - Z_k|_F <= tolerance * max(1, |Z_k|_F); zero runs
  /// the full iteration budget.
  double tolerance = 0.0;
};

template <typename Scalar>
struct ProxResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> representation;
  int iterations = 0;
};

/// Singular value soft-thresholding: the proximal map of tau |.|_*.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic> singular_value_threshold(
    const Eigen::MatrixBase<Derived>& y, typename Derived::Scalar tau) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const Matrix m = y;
  const Scalar scale = m.cwiseAbs().maxCoeff();
  if (scale > Scalar(0) && (m - m.transpose()).cwiseAbs().maxCoeff() <= Scalar(1e-12) * scale) {
    // Symmetric input: singular values are |eigenvalues|, keep the signs.
    Eigen::SelfAdjointEigenSolver<Matrix> es(Scalar(0.5) * (m + m.transpose()));
    Vector mu = es.eigenvalues();
    for (Eigen::Index i = 0; i < mu.size(); ++i) {
      const Scalar mag = std::max(Scalar(0), std::abs(mu(i)) - tau);
      mu(i) = mu(i) < Scalar(0) ? -mag : mag;
    }
    return es.eigenvectors() * mu.asDiagonal() * es.eigenvectors().transpose();
  }
  Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Vector s = (svd.singularValues().array() - tau).max(Scalar(0)).matrix();
  return svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
}

/// Minimizes 1/2 trace((I - Z)^T K (I - Z)) + lambda |Z|_* from Z = 0 with
/// step 1 / |K|_2.
template <typename Derived>
ProxResult<typename Derived::Scalar> proximal_gradient_klrr(const Eigen::MatrixBase<Derived>& gram,
                                                             typename Derived::Scalar lambda,
                                                             const ProxOptions& options = {}) {
  using Scalar = typename Derived::Scalar;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Matrix k = gram;
  const Eigen::Index n = k.rows();
  if (n != k.cols() || n < 1) throw InputError("proximal_gradient_klrr: Gram matrix must be square");
  const Scalar lipschitz = Eigen::SelfAdjointEigenSolver<Matrix>(k, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();

  ProxResult<Scalar> out;
  out.representation = Matrix::Zero(n, n);
  if (lipschitz == Scalar(0)) return out;
  const Scalar step = Scalar(1) / lipschitz;
  for (int it = 0; it < options.max_iterations; ++it) {
    const Matrix gradient = k * out.representation - k;
    Matrix next = singular_value_threshold(out.representation - step * gradient, lambda * step);
    const Scalar change = (next - out.representation).norm();
    const Scalar size = std::max(Scalar(1), out.representation.norm());
    out.representation = std::move(next);
    out.iterations = it + 1;
    if (options.tolerance > 0 && change <= static_cast<Scalar>(options.tolerance) * size) break;
  }
  return out;
}

}  // namespace strucsim
