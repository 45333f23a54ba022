/*
 * Strongly monotone composite inclusions
 *
 *   find x with  z in A x + sum_i L_i^* ((B_i [] D_i)(L_i x - r_i)) + rho x
 *
 * solved through their dual by variable-metric forward-backward steps on
 * v = (v_1, ..., v_m); the primal iterate is x_n = J_{A/rho}((z - sum_i L_i^* v_i)/rho).
 * Here [] is the parallel sum, D_i^{-1} is nu_i-cocoercive and a block with
 * D_i^{-1} = 0 carries nu_i = +infinity.
 */
#pragma once

#include "vmfb/fb.hpp"

#include <optional>
#include <vector>

namespace vmfb {

struct DualBlock {
  LinearMap L;
  ResolventOperator B;
  /// D_i^{-1}; its beta is nu_i.
  CocoerciveOperator Dinv;
  Vector r;
};

struct StronglyMonotoneProblem {
  Vector z;
  double rho = 1.0;
  ResolventOperator A;
  std::vector<DualBlock> blocks;
};

void validate_problem(const StronglyMonotoneProblem& p);

/// 1 / (max_i 1/nu_i + sum_i ||L_i||^2 / rho).
double beta_dual(const StronglyMonotoneProblem& p);

/// v -> (r_i + D_i^{-1} v_i - L_i T(sum_j L_j^* v_j))_i with
/// T(x) = J_{A/rho}((z - x)/rho), on the stacked dual vector.
CocoerciveOperator dual_operator(const StronglyMonotoneProblem& p);

/// B_1^{-1} x ... x B_m^{-1}; its resolvent needs a block-diagonal metric.
ResolventOperator dual_resolvent_operator(const StronglyMonotoneProblem& p);

/// J_{A/rho}((z - sum_i L_i^* v_i)/rho).
Vector primal_recovery(const StronglyMonotoneProblem& p, const std::vector<Vector>& v);

std::vector<Vector> split_blocks(const Vector& stacked, const std::vector<Index>& sizes);
Vector stack_blocks(const std::vector<Vector>& parts);

struct PrimalDualErrors {
  /// Primal error a_n (dimension of H).
  std::optional<ErrorSequence> a;
  /// Per-block resolvent errors b_{i,n} and forward errors d_{i,n}.
  std::vector<ErrorSequence> b;
  std::vector<ErrorSequence> d;
};

struct PrimalDualOptions {
  PrimalDualErrors errors;
  StoppingRule stop;
  Policy policy = Policy::strict;
  std::int64_t n_check = -1;
  bool record_iterates = true;
};

struct PrimalDualResult {
  Vector x;
  std::vector<Vector> v;
  SolveTrace trace;
};

/// Hypothesis report for the dual iteration over the first n_check steps.
ValidationReport strong_duality_report(const StronglyMonotoneProblem& p,
                                       const std::vector<MetricSchedule>& dual_metrics,
                                       const StepSchedule& steps, std::int64_t n_check);

/// Trace records hold x_n in `x` and the stacked v_n in `y`; the residual is
/// the dual fixed-point residual. The returned x is primal_recovery(v).
PrimalDualResult solve_strong_duality(const StronglyMonotoneProblem& p,
                                      const std::vector<MetricSchedule>& dual_metrics,
                                      const StepSchedule& steps, const std::vector<Vector>& v0,
                                      const PrimalDualOptions& options = {});

// ---------------------------------------------------------------------------
// Strongly convex minimization
//
//   minimize f(x) + sum_i (g_i [] l_i)(L_i x - r_i) + ||x - z||^2 / 2
//
// with l_i = iota_{0} (no smoothing) or l_i = <M_i ., .>/2, M_i positive definite.

struct SmoothedBlock {
  Matrix L;
  Function g;
  /// M_i; absent means l_i = iota_{0}.
  std::optional<Matrix> smoothing;
  Vector r;
};

/// B_i = subdifferential of g_i, D_i^{-1} = M_i^{-1} with nu_i = lambda_min(M_i), or 0.
DualBlock make_dual_block(const SmoothedBlock& b);

/// (g_i [] l_i)(L_i x - r_i).
double smoothed_block_value(const SmoothedBlock& b, const Vector& x);

StronglyMonotoneProblem make_strongly_convex_problem(const Vector& z, const Function& f,
                                                     const std::vector<SmoothedBlock>& blocks);

double strongly_convex_primal_objective(const Vector& z, const Function& f,
                                        const std::vector<SmoothedBlock>& blocks, const Vector& x);

/// Dual objective, normalized so that primal + dual = 0 at a primal-dual
/// solution (the duality gap is primal(x) + dual(v)); nullopt when some g_i^*
/// is not in the catalog.
std::optional<double> strongly_convex_dual_objective(const Vector& z, const Function& f,
                                                     const std::vector<SmoothedBlock>& blocks,
                                                     const std::vector<Vector>& v);

PrimalDualResult solve_strongly_convex_min(const Vector& z, const Function& f,
                                           const std::vector<SmoothedBlock>& blocks,
                                           const std::vector<MetricSchedule>& dual_metrics,
                                           const StepSchedule& steps, const std::vector<Vector>& v0,
                                           const PrimalDualOptions& options = {});

// ---------------------------------------------------------------------------
// Best approximation: project z onto {x in C : L_i x in r_i + D_i}.

struct ConstraintBlock {
  Matrix L;
  ConvexSet D;
  Vector r;
};

StronglyMonotoneProblem make_best_approximation_problem(const Vector& z, const ConvexSet& C,
                                                       const std::vector<ConstraintBlock>& blocks);

/// The step schedule gamma_n = lambda_n = 1 with
/// epsilon = min{1, 2 beta/(mu + 1), 2 beta - mu}, mu = max_i mu_bound.
StepSchedule best_approximation_steps(const StronglyMonotoneProblem& p,
                                      const std::vector<MetricSchedule>& dual_metrics);

/// Checks (max_i sup_n ||U_{i,n}||) sum_i ||L_i||^2 < 2.
HypothesisCheck step_norm_condition(const StronglyMonotoneProblem& p,
                                    const std::vector<MetricSchedule>& dual_metrics);

/// Runs with gamma_n = lambda_n = 1. Strict mode refuses unless
/// (max_i sup_n ||U_{i,n}||) sum_i ||L_i||^2 < 2.
PrimalDualResult solve_best_approximation(const Vector& z, const ConvexSet& C,
                                          const std::vector<ConstraintBlock>& blocks,
                                          const std::vector<MetricSchedule>& dual_metrics,
                                          const std::vector<Vector>& v0,
                                          const PrimalDualOptions& options = {});

}  // namespace vmfb
