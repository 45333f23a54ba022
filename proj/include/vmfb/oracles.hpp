/*
 * Reference solvers for tests and diagnostics. They favour exactness over
 * speed and share no iteration code with the solvers they check.
 */
#pragma once

#include "vmfb/duality_cocoercive.hpp"
#include "vmfb/fb.hpp"

#include <string>
#include <vector>

namespace vmfb {

class OracleError : public Error {
 public:
  using Error::Error;
};

struct Certificate {
  double stationarity = 0.0;
  double feasibility = 0.0;
  /// Includes dual feasibility (negative multipliers).
  double complementarity = 0.0;

  double worst() const { return std::max({stationarity, feasibility, complementarity}); }
};

struct OracleSolution {
  Vector point;
  Certificate certificate;
  std::string method;
  std::int64_t iterations = 0;
};

inline constexpr double kCertificateTolerance = 1e-10;

struct QPConstraints {
  std::vector<HalfSpace> halfspaces;
  std::vector<Box> boxes;
  std::vector<AffineSet> affine;
};

/// Rows of G x <= h from half-spaces and finite box bounds, and A x = b.
struct LinearConstraints {
  Matrix G;
  Vector h;
  Matrix A;
  Vector b;
};

LinearConstraints linearize(const QPConstraints& cons, Index dim);

/// Stationarity ||Q x + c + G^T lam + A^T nu||_inf, feasibility and
/// complementarity, each divided by max(1, scale of the data).
Certificate qp_certificate(const Matrix& Q, const Vector& c, const LinearConstraints& lc,
                           const Vector& x, const Vector& lam, const Vector& nu);

/// Minimizer of <Q x, x>/2 + <c, x> over the constraints, Q positive definite.
/// Active-set enumeration for at most 20 inequalities (at most 2^20 subsets);
/// beyond that projected gradient, available for box-only sets. Throws
/// OracleError when the set is empty, the budget is exceeded or the
/// certificate misses kCertificateTolerance.
OracleSolution qp_oracle(const Matrix& Q, const Vector& c, const QPConstraints& cons);

/// argmin_s weight * phi(s) + (s - t)^2 / 2 by grid bracketing, golden-section
/// narrowing and bisection on the one-sided derivatives.
double scalar_prox_oracle(const ScalarFunction& phi, double weight, double t);

/// x_{n+1} = (Id + gamma A)^{-1}(x_n - gamma B x_n), n < iterations; returns x_0..x_N.
std::vector<Vector> classical_fb_iterates(const FBProblem& problem, double gamma, const Vector& x0,
                                          std::int64_t iterations);

/// Runs the classical loop until the fixed-point residual is <= 1e-10 or the
/// budget is spent; throws OracleError in the latter case.
OracleSolution reference_fb(const FBProblem& problem, double gamma, const Vector& x0,
                            std::int64_t iterations);

/// Primal-dual loop with U_n = tau Id and U_{i,n} = sigma_i Id, lambda_n = 1:
///   p = J_{tau A}(x - tau (sum_i L_i^* v_i + C x - z))
///   q_i = J_{sigma_i B_i^{-1}}(v_i + sigma_i (L_i (2p - x) - D_i^{-1} v_i - r_i))
/// with J_{sigma B^{-1}}(w) = w - sigma J_{B/sigma}(w / sigma).
/// Returns the stacked (x_n, v_n), n = 0..iterations.
std::vector<Vector> fixed_metric_pd_iterates(const CocoerciveProblem& p, double tau,
                                             const std::vector<double>& sigma, const Vector& x0,
                                             const std::vector<Vector>& v0,
                                             std::int64_t iterations);

}  // namespace vmfb
