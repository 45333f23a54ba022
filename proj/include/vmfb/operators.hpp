/*
 * Monotone operators seen through their resolvents, cocoercive operators and
 * linear couplings.
 *
 * A ResolventOperator A exposes J_{gamma U A}(x) = (Id + gamma U A)^{-1} x for
 * gamma > 0 and a metric U. For A = df this is prox^{U^{-1}}_{gamma f}.
 */
#pragma once

#include "vmfb/metric.hpp"
#include "vmfb/prox.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vmfb {

class ResolventOperator {
 public:
  /// (gamma, U, x) -> J_{gamma U A}(x)
  using Oracle = std::function<Vector(double gamma, const Metric& U, const Vector& x)>;

  static ResolventOperator zero(Index dim);
  /// A = df for a catalog function; f is validated here once.
  static ResolventOperator subdifferential(Function f);
  /// A x = M x + q with M monotone (symmetric part positive semidefinite).
  static ResolventOperator linear(Matrix M, Vector q);
  static ResolventOperator custom(Index dim, std::string tag, Oracle oracle);

  Index dim() const { return dim_; }
  const std::string& descriptor() const { return tag_; }
  /// The catalog function when A = df.
  const Function* function() const;

  Vector resolvent(double gamma, const Metric& U, const Vector& x) const;

  /// A^{-1} as a closed form (conjugate function, inverse matrix), if any.
  std::optional<ResolventOperator> inverse() const;

  /// A^{-1} evaluated through J_{gamma U A^{-1}} = Id - gamma U J_{gamma^{-1} U^{-1} A}(gamma^{-1} U^{-1} .).
  /// Always available.
  ResolventOperator inverted() const;

  /// S A S for symmetric positive definite S, when it has a closed form.
  ResolventOperator congruence(const Metric& S) const;

 private:
  struct Impl;
  ResolventOperator(Index dim, std::string tag, std::shared_ptr<const Impl> impl);

  Index dim_ = 0;
  std::string tag_;
  std::shared_ptr<const Impl> impl_;
};

/// J_{gamma U A}(x).
Vector resolvent_metric(const ResolventOperator& A, double gamma, const Metric& U, const Vector& x);

/// sqrt(U) J_{gamma sqrt(U) A sqrt(U)}(sqrt(U)^{-1} x).
Vector resolvent_conjugated(const ResolventOperator& A, double gamma, const Metric& U,
                            const Vector& x);

/// x - gamma U J_{gamma^{-1} U^{-1} A^{-1}}(gamma^{-1} U^{-1} x), with A^{-1} from
/// the catalog. Throws UnsupportedOperation if A^{-1} has no closed form.
Vector resolvent_inverse_identity(const ResolventOperator& A, double gamma, const Metric& U,
                                  const Vector& x);

/// J_{gamma U B^{-1}}(x) computed from the resolvent of B.
Vector resolvent_of_inverse(const ResolventOperator& B, double gamma, const Metric& U,
                            const Vector& x);

struct ResolventBlock {
  ResolventOperator op;
  Metric metric;
};

/// Componentwise J_{gamma U_i A_i} on a product vector.
Vector block_resolvent(const std::vector<ResolventBlock>& blocks, double gamma, const Vector& x);

/// A_1 x ... x A_m on the product space. The metric passed to its resolvent
/// must be built by Metric::block_diagonal with matching block sizes.
ResolventOperator block_diagonal_operator(std::vector<ResolventOperator> ops);

// ---------------------------------------------------------------------------

struct CocoerciveOperator {
  Index dim = 0;
  /// Cocoercivity constant; +infinity for constant maps (zero increments).
  double beta = 0.0;
  std::function<Vector(const Vector&)> eval;

  Vector operator()(const Vector& x) const;
  /// Bx - By = 0 for all x, y (infinite modulus).
  bool is_constant() const { return std::isinf(beta); }

  static CocoerciveOperator zero(Index dim);
  /// x -> M x + q. beta is 1/||M|| for symmetric M, otherwise the smallest
  /// eigenvalue of the symmetric part of M^{-1}.
  static CocoerciveOperator affine(Matrix M, Vector q);
  static CocoerciveOperator affine(Matrix M, Vector q, double beta);
  /// Gradient of x -> ||M x - b||^2 / 2, beta = 1/||M||^2.
  static CocoerciveOperator least_squares(Matrix M, Vector b);
};

struct LinearMap {
  Matrix matrix;
  double norm = 0.0;

  LinearMap() = default;
  explicit LinearMap(Matrix m);

  Index rows() const { return matrix.rows(); }
  Index cols() const { return matrix.cols(); }
  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& y) const;
};

struct CocoerciveTerm {
  LinearMap L;
  CocoerciveOperator T;
};

/// x -> sum_i L_i^* T_i(L_i x), beta = 1 / sum_i ||L_i||^2 / beta_i.
CocoerciveOperator cocoercive_sum(const std::vector<CocoerciveTerm>& terms);

/// min over sampled pairs of <x-y, Bx-By> - beta ||Bx-By||^2 (negative means
/// a violation). Points are drawn from N(0, scale^2 Id).
double sampled_cocoercivity_margin(const CocoerciveOperator& B, double beta, int pairs,
                                   std::uint64_t seed, double scale = 1.0);

/// min over sampled pairs of <x-y, Jx-Jy>_{U^{-1}} - ||Jx-Jy||^2_{U^{-1}} for
/// J = J_{gamma U A}.
double sampled_firm_nonexpansiveness_margin(const ResolventOperator& A, double gamma,
                                            const Metric& U, int pairs, std::uint64_t seed,
                                            double scale = 1.0);

}  // namespace vmfb
