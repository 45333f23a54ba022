/*
 * Variable-metric forward-backward splitting for 0 in A x + B x:
 *
 *   y_n     = x_n - gamma_n U_n (B x_n + b_n)
 *   x_{n+1} = x_n + lambda_n (J_{gamma_n U_n A}(y_n) + a_n - x_n)
 *
 * The run stops at the first x_n whose fixed-point residual
 * ||J_{gamma_n U_n A}(x_n - gamma_n U_n B x_n) - x_n|| is <= tol.
 */
#pragma once

#include "vmfb/operators.hpp"
#include "vmfb/schedules.hpp"
#include "vmfb/trace.hpp"

#include <optional>

namespace vmfb {

struct FBProblem {
  ResolventOperator A;
  CocoerciveOperator B;
};

struct StoppingRule {
  double tol = 1e-8;
  std::int64_t max_iter = 100000;
};

/// Iterates whose norm exceeds this factor times (1 + ||x_0||) end the run.
inline constexpr double kDivergenceFactor = 1e12;

struct FBOptions {
  /// Injected errors; none by default.
  std::optional<ErrorSchedule> errors;
  StoppingRule stop;
  Policy policy = Policy::strict;
  /// A solution z: enables the Fejer columns and the B-drift sums.
  std::optional<Vector> reference;
  /// Prefix checked by the validator; defaults to max_iter + 1.
  std::int64_t n_check = -1;
  bool record_iterates = true;
  /// Cocoercivity constant used for validation; defaults to B.beta.
  std::optional<double> beta;
};

struct FBResult {
  Vector x;
  SolveTrace trace;
};

FBResult fb_solve(const FBProblem& problem, const MetricSchedule& metrics, const StepSchedule& steps,
                  const Vector& x0, const FBOptions& options = {});

/// Minimizes f + g where grad_g is the gradient of g. The backward step is
/// prox^{U_n^{-1}}_{gamma_n f}.
FBResult fb_minimize(const Function& f, const CocoerciveOperator& grad_g,
                     const MetricSchedule& metrics, const StepSchedule& steps, const Vector& x0,
                     const FBOptions& options = {});

/// Finds x with <x - y, B x> + f(x) <= f(y) for all y.
FBResult fb_variational_inequality(const Function& f, const CocoerciveOperator& B,
                                   const MetricSchedule& metrics, const StepSchedule& steps,
                                   const Vector& x0, const FBOptions& options = {});

/// max over the sample of <x - y, B x> + f(x) - f(y).
double vi_residual(const Function& f, const CocoerciveOperator& B, const Vector& x,
                   const std::vector<Vector>& samples);

struct FejerReport {
  /// lhs_n - rhs_n for each recorded step.
  std::vector<double> excess;
  double max_violation = 0.0;
  std::int64_t worst_index = -1;

  bool holds(double slack = 1e-9) const { return max_violation <= slack; }
};

/// Checks ||x_{n+1} - z||_{U_{n+1}^{-1}} <= (1 + eta_n) ||x_n - z||_{U_n^{-1}} + eps_n
/// with eps_n = delta (||a_n|| / sqrt(alpha) + (2 beta - epsilon) ||b_n|| / sqrt(mu))
/// and delta = sqrt(1 + sup eta_n). The trace must hold the iterates.
FejerReport fejer_diagnostic(const SolveTrace& trace, const Vector& z, const MetricSchedule& metrics,
                             const StepSchedule& steps, const ErrorSchedule& errors, double beta);

struct DriftReport {
  /// sum_{k <= n} ||B x_k - B x_bar||^2.
  std::vector<double> partial_sums;
  /// (S_N - S_{floor(3N/4)}) / S_N, or 0 when S_N = 0.
  double last_quarter_gain = 0.0;

  bool plateaued(double threshold = 0.01) const { return last_quarter_gain < threshold; }
};

DriftReport b_drift_diagnostic(const SolveTrace& trace, const Vector& x_bar,
                               const CocoerciveOperator& B);

}  // namespace vmfb
