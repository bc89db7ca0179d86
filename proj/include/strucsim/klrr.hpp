#pragma once

// Closed-form kernelized low-rank representation.
//
// For a Gram matrix K = U diag(sigma) U^T the minimizer of
//   1/2 |phi(X) - phi(X) Z|_F^2 + lambda |Z|_*
// is Z = U diag(d) U^T with d_i = 1 - lambda / sigma_i when sigma_i > lambda
// and 0 otherwise. Everything here works from K alone.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "strucsim/error.hpp"
#include "strucsim/kernel.hpp"

namespace strucsim {

/// Regularization weight, either absolute or as a fraction of the largest
/// Gram eigenvalue.
struct LambdaRule {
  enum class Kind { absolute, relative };

  Kind kind = Kind::relative;
  double value = 0.1;

  static LambdaRule absolute(double lambda) { return checked({Kind::absolute, lambda}); }
  static LambdaRule relative(double rho) { return checked({Kind::relative, rho}); }

  void validate() const {
    if (!std::isfinite(value) || value < 0.0) throw InputError("lambda must be a nonnegative finite number");
    if (kind == Kind::relative && value >= 1.0) throw InputError("relative lambda must lie in [0, 1)");
  }

  double resolve(double sigma_max) const { return kind == Kind::absolute ? value : value * sigma_max; }

 private:
  static LambdaRule checked(LambdaRule rule) {
    rule.validate();
    return rule;
  }
};

/// Relative tolerances shared by the solver.
inline constexpr double kEigenClampTolerance = 1e-10;
inline constexpr double kPseudoInverseTolerance = 1e-10;
inline constexpr double kSymmetryTolerance = 1e-10;

template <typename Scalar>
struct Spectrum {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Vector eigenvalues;   // nonincreasing, clamped to >= 0
  Matrix eigenvectors;  // column i pairs with eigenvalues(i)
  Vector thresholded;   // soft-thresholded shrinkage factors
  Scalar lambda = 0;

  Eigen::Index size() const { return eigenvalues.size(); }
  Eigen::Index rank() const { return (thresholded.array() > Scalar(0)).count(); }
  Scalar sigma_max() const { return size() ? eigenvalues(0) : Scalar(0); }
};

template <typename Scalar>
struct KlrrModel {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Spectrum<Scalar> spectrum;
  Matrix representation;  // Z
  GramMatrix<Scalar> gram;
  /// Z (Z^T K Z)^+ Z^T; maps a cross-kernel column to a test representation.
  Matrix projector;

  Eigen::Index size() const { return representation.rows(); }
  Eigen::Index rank() const { return spectrum.rank(); }
  Scalar lambda() const { return spectrum.lambda; }
  bool empty() const { return rank() == 0; }
  const std::optional<KernelSpec>& kernel() const { return gram.kernel; }
  const std::string& fingerprint() const { return gram.fingerprint; }
};

using KlrrModelXd = KlrrModel<double>;

template <typename Scalar>
struct TestRepresentation {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> z;
  Scalar residual = 0;
  /// Set when the model retained no modes; z is then zero by convention.
  bool empty_model = false;
};

/// Largest |a_ij - a_ji| relative to the largest |a_ij|.
template <typename Derived>
typename Derived::Scalar relative_asymmetry(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Scalar scale = a.cwiseAbs().maxCoeff();
  if (scale == Scalar(0)) return Scalar(0);
  return (a - a.transpose()).cwiseAbs().maxCoeff() / scale;
}

/// Sorts an eigendecomposition into nonincreasing order, clamps values below
/// the relative round-off floor to zero and applies the soft threshold.
template <typename Scalar>
Spectrum<Scalar> threshold_spectrum(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& raw_values,
                                    const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& raw_vectors,
                                    const LambdaRule& rule) {
  rule.validate();
  const Eigen::Index n = raw_values.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return raw_values(a) > raw_values(b); });

  Spectrum<Scalar> s;
  s.eigenvalues.resize(n);
  s.eigenvectors.resize(raw_vectors.rows(), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.eigenvalues(i) = raw_values(order[static_cast<std::size_t>(i)]);
    s.eigenvectors.col(i) = raw_vectors.col(order[static_cast<std::size_t>(i)]);
  }
  const Scalar top = n ? std::max(s.eigenvalues(0), Scalar(0)) : Scalar(0);
  const Scalar floor = static_cast<Scalar>(kEigenClampTolerance) * top;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s.eigenvalues(i) < floor || s.eigenvalues(i) <= Scalar(0)) s.eigenvalues(i) = Scalar(0);
  }

  s.lambda = static_cast<Scalar>(rule.resolve(static_cast<double>(top)));
  s.thresholded.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Scalar sigma = s.eigenvalues(i);
    s.thresholded(i) = sigma > s.lambda ? Scalar(1) - s.lambda / sigma : Scalar(0);
  }
  return s;
}

/// Builds Z and the out-of-sample projector from a thresholded spectrum.
///
/// Z^T K Z = U diag(d^2 sigma) U^T is diagonal in the eigenbasis of K, so its
/// pseudo-inverse is taken there: entries below the relative tolerance are
/// treated as zero.
template <typename Scalar>
KlrrModel<Scalar> model_from_spectrum(Spectrum<Scalar> spectrum, GramMatrix<Scalar> gram) {
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  const auto& u = spectrum.eigenvectors;
  const Vector& d = spectrum.thresholded;

  KlrrModel<Scalar> model;
  model.representation = u * d.asDiagonal() * u.transpose();
  model.representation = (Scalar(0.5) * (model.representation + model.representation.transpose())).eval();

  const Vector middle = d.array().square() * spectrum.eigenvalues.array();
  const Scalar cutoff = static_cast<Scalar>(kPseudoInverseTolerance) * (middle.size() ? middle.maxCoeff() : Scalar(0));
  Vector weights = Vector::Zero(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    if (middle(i) > cutoff && middle(i) > Scalar(0)) weights(i) = d(i) * d(i) / middle(i);
  }
  model.projector = u * weights.asDiagonal() * u.transpose();
  model.spectrum = std::move(spectrum);
  model.gram = std::move(gram);
  return model;
}

/// Closed-form minimizer for the given Gram matrix.
template <typename Scalar>
KlrrModel<Scalar> fit(const GramMatrix<Scalar>& gram, const LambdaRule& rule) {
  const auto& k = gram.values;
  if (k.rows() != k.cols() || k.rows() < 1) throw InputError("fit: Gram matrix must be square and nonempty");
  if (!k.allFinite()) throw InputError("fit: Gram matrix contains non-finite entries");
  if (relative_asymmetry(k) > static_cast<Scalar>(kSymmetryTolerance)) {
    throw InputError("fit: Gram matrix is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> solver(k);
  if (solver.info() != Eigen::Success) throw NumericalError("fit: eigendecomposition failed");
  auto spectrum = threshold_spectrum<Scalar>(solver.eigenvalues(), solver.eigenvectors(), rule);
  return model_from_spectrum(std::move(spectrum), gram);
}

/// 1/2 trace((I - Z)^T K (I - Z)) + lambda |Z|_*, evaluated with kernel
/// entries only.
template <typename Scalar, typename Derived>
Scalar objective(const KlrrModel<Scalar>& model, const Eigen::MatrixBase<Derived>& z) {
  const Eigen::Index n = model.size();
  if (z.rows() != n || z.cols() != n) throw InputError("objective: representation must be n x n");
  const auto residual = (Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>::Identity(n, n) - z).eval();
  const Scalar fidelity = Scalar(0.5) * (residual.transpose() * model.gram.values * residual).trace();
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>> svd(z);
  return fidelity + model.lambda() * svd.singularValues().sum();
}

/// Kernel-space residual |phi(x) - phi(X) z| from k(x, x), K(X, x) and z.
template <typename Scalar, typename DerivedC, typename DerivedZ>
Scalar kernel_residual(const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>& k,
                       const Eigen::MatrixBase<DerivedC>& k_cross, Scalar k_self,
                       const Eigen::MatrixBase<DerivedZ>& z) {
  const Scalar cross = z.dot(k_cross);
  const Scalar quad = z.dot(k * z);
  const Scalar energy = k_self - Scalar(2) * cross + quad;
  // Cancellation leaves O(eps) noise in energy; its square root is O(sqrt(eps)).
  const Scalar scale = std::abs(k_self) + Scalar(2) * std::abs(cross) + std::abs(quad);
  if (energy <= Scalar(64) * std::numeric_limits<Scalar>::epsilon() * scale) return Scalar(0);
  return std::sqrt(energy);
}

/// Minimum-norm projection of a test point onto span(phi(X) Z), given
/// k_cross = K(X, x_test) and k_self = k(x_test, x_test).
template <typename Scalar, typename Derived>
TestRepresentation<Scalar> project_test(const KlrrModel<Scalar>& model, const Eigen::MatrixBase<Derived>& k_cross,
                                        Scalar k_self) {
  if (k_cross.size() != model.size()) throw InputError("project_test: cross-kernel length must equal n");
  TestRepresentation<Scalar> out;
  if (model.empty()) {
    out.z = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>::Zero(model.size());
    out.residual = std::sqrt(std::max(Scalar(0), k_self));
    out.empty_model = true;
    return out;
  }
  out.z = model.projector * k_cross;
  out.residual = kernel_residual(model.gram.values, k_cross, k_self, out.z);
  return out;
}

/// Residual of each training point against its own column of Z.
template <typename Scalar>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> in_sample_residuals(const KlrrModel<Scalar>& model) {
  const auto& k = model.gram.values;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> r(model.size());
  for (Eigen::Index i = 0; i < model.size(); ++i) {
    r(i) = kernel_residual(k, k.col(i), k(i, i), model.representation.col(i));
  }
  return r;
}

/// lambda * sqrt(sum over retained modes of 1 / sigma_i^2): the entrywise
/// ceiling on Z between points from independent subspaces.
template <typename Scalar>
Scalar offblock_bound(const KlrrModel<Scalar>& model) {
  const auto& s = model.spectrum;
  Scalar sum = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s.eigenvalues(i) > s.lambda) sum += Scalar(1) / (s.eigenvalues(i) * s.eigenvalues(i));
  }
  return s.lambda * std::sqrt(sum);
}

/// Largest |z_ij| over pairs whose block labels differ.
template <typename Derived>
typename Derived::Scalar max_cross_block(const Eigen::MatrixBase<Derived>& z, std::span<const int> blocks) {
  if (static_cast<Eigen::Index>(blocks.size()) != z.rows()) throw InputError("block partition length must equal n");
  typename Derived::Scalar out = 0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      if (blocks[i] != blocks[j]) out = std::max(out, std::abs(z(i, j)));
    }
  }
  return out;
}

template <typename Scalar>
struct PerturbationReport {
  Scalar lhs = 0;      // |N|_F of the perturbed representation
  Scalar rhs = 0;      // 4 sqrt(2) |E|_F / (sigma_r - sigma_e)
  Scalar sigma_r = 0;  // smallest nonzero eigenvalue of the unperturbed Gram
  Scalar sigma_e = 0;  // spectral norm of E
  Eigen::Index rank = 0;
  bool holds = false;
};

/// Fits the perturbed Gram K + E and compares the Frobenius mass of its
/// cross-block entries against the perturbation bound. The block partition
/// names the subspace each observation was drawn from.
template <typename Scalar, typename Derived>
PerturbationReport<Scalar> perturbation_check(const GramMatrix<Scalar>& gram, const Eigen::MatrixBase<Derived>& e,
                                              const LambdaRule& rule, std::span<const int> blocks) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  const Eigen::Index n = gram.size();
  if (e.rows() != n || e.cols() != n) throw InputError("perturbation_check: E must be n x n");
  if (static_cast<Eigen::Index>(blocks.size()) != n) throw InputError("perturbation_check: partition length must equal n");
  if (relative_asymmetry(e) > static_cast<Scalar>(kSymmetryTolerance)) {
    throw InputError("perturbation_check: E must be symmetric");
  }

  Eigen::SelfAdjointEigenSolver<Matrix> base(gram.values, Eigen::EigenvaluesOnly);
  const auto& sig = base.eigenvalues();  // ascending
  const Scalar top = sig.maxCoeff();
  PerturbationReport<Scalar> report;
  for (Eigen::Index i = sig.size() - 1; i >= 0; --i) {
    if (sig(i) <= static_cast<Scalar>(kEigenClampTolerance) * top || sig(i) <= Scalar(0)) break;
    report.sigma_r = sig(i);
    ++report.rank;
  }
  const Matrix e_sym = e;
  report.sigma_e = Eigen::SelfAdjointEigenSolver<Matrix>(e_sym, Eigen::EigenvaluesOnly).eigenvalues().cwiseAbs().maxCoeff();
  if (report.rank == 0 || report.sigma_e >= report.sigma_r) {
    throw NumericalError("perturbation too large for bound");
  }

  const auto perturbed = fit(GramMatrix<Scalar>::from_values(gram.values + e_sym, gram.fingerprint), rule);
  Scalar mass = 0;
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (blocks[i] != blocks[j]) mass += perturbed.representation(i, j) * perturbed.representation(i, j);
    }
  }
  report.lhs = std::sqrt(mass);
  report.rhs = Scalar(4) * std::sqrt(Scalar(2)) * e_sym.norm() / (report.sigma_r - report.sigma_e);
  // Round-off floor so an exactly block-diagonal result compares equal to a zero bound.
  const Scalar slack = Scalar(1e-10) * static_cast<Scalar>(n);
  report.holds = report.lhs <= report.rhs + slack;
  return report;
}

}  // namespace strucsim
