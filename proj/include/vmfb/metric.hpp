/*
 * Dense symmetric positive definite metrics.
 *
 * A Metric U with U >= alpha Id induces the scalar product <x, y>_U = <Ux, y>
 * and the norm ||x||_U = sqrt(<Ux, x>). The spectral decomposition is computed
 * once at construction and shared between copies, so that the inverse (and
 * applications of U^{-1}, sqrt(U), sqrt(U)^{-1}) are available in O(n^2).
 */
#pragma once

#include "vmfb/types.hpp"

#include <memory>
#include <span>
#include <vector>

namespace vmfb {

/// Matrices whose condition number exceeds this value are rejected.
inline constexpr double kMaxConditionNumber = 1e12;

/// Relative asymmetry ||A - A^T||_F / ||A||_F tolerated (and removed by
/// symmetrization) when building a metric.
inline constexpr double kSymmetryTolerance = 1e-12;

class Metric {
 public:
  /// Certified bound alpha is taken to be the computed smallest eigenvalue.
  explicit Metric(const Matrix& matrix);

  /// alpha is the claimed lower Loewner bound; construction fails if the
  /// smallest eigenvalue is below it.
  Metric(const Matrix& matrix, double alpha);

  static Metric identity(Index n);
  static Metric scalar(Index n, double value);
  static Metric diagonal(const Vector& entries);
  static Metric block_diagonal(std::span<const Metric> blocks);

  Index dim() const;
  double alpha() const { return alpha_; }
  /// Operator norm ||U|| (largest eigenvalue).
  double norm() const;
  double min_eigenvalue() const;
  double condition_number() const { return norm() / min_eigenvalue(); }

  bool is_diagonal() const;
  bool is_scalar() const;

  /// The diagonal blocks when built by block_diagonal(), otherwise empty.
  std::vector<Metric> blocks() const;

  const Matrix& matrix() const;
  /// Eigenvalues, paired column-wise with eigenvectors().
  const Vector& eigenvalues() const;
  const Matrix& eigenvectors() const;

  Vector apply(const Vector& x) const;
  Vector apply_inverse(const Vector& x) const;
  Vector apply_sqrt(const Vector& x) const;
  Vector apply_inverse_sqrt(const Vector& x) const;

  /// U^{-1}, sharing the factorization. Its certified bound is 1/||U||.
  Metric inverse() const;
  /// sqrt(U); certified bound sqrt(alpha).
  Metric sqrt() const;

  /// True when both metrics are views of the same factorization and the same
  /// orientation, hence equal.
  bool same_as(const Metric& other) const;

  /// Cached factorization; opaque outside metric.cpp.
  struct Spectral;

 private:
  Metric(std::shared_ptr<const Spectral> data, bool inverted, double alpha);

  std::shared_ptr<const Spectral> data_;
  bool inverted_ = false;
  double alpha_ = 0.0;
};

/// <x, y>_U = <Ux, y>.
double metric_inner(const Metric& U, const Vector& x, const Vector& y);
/// ||x||_U.
double metric_norm(const Metric& U, const Vector& x);

/// True iff the smallest eigenvalue of (A - B) is >= -slack. Both operands are
/// symmetrized before the eigendecomposition.
bool loewner_geq(const Matrix& A, const Matrix& B, double slack = 0.0);
bool loewner_geq(const Metric& A, const Metric& B, double slack = 0.0);

/// Smallest eigenvalue of the symmetric part of A.
double min_symmetric_eigenvalue(const Matrix& A);

/// Smallest t with t * upper >= lower, i.e. the largest eigenvalue of
/// upper^{-1/2} lower upper^{-1/2}.
double loewner_ratio(const Metric& upper, const Metric& lower);

Metric metric_sqrt(const Metric& U);
Metric metric_inverse(const Metric& U);

/// Largest singular value.
double spectral_norm(const Matrix& A);

}  // namespace vmfb
