/*
 * Primal-dual splitting for
 *
 *   find x with  z in A x + sum_i L_i^* ((B_i [] D_i)(L_i x - r_i)) + C x
 *
 * with C mu-cocoercive and D_i^{-1} nu_i-cocoercive. One iteration:
 *
 *   p_n     = J_{U_n A}(x_n - U_n (sum_i L_i^* v_{i,n} + C x_n + c_n - z)) + a_n
 *   y_n     = 2 p_n - x_n
 *   q_{i,n} = J_{U_{i,n} B_i^{-1}}(v_{i,n} + U_{i,n} (L_i y_n - D_i^{-1} v_{i,n} - d_{i,n} - r_i)) + b_{i,n}
 *   x_{n+1} = x_n + lambda_n (p_n - x_n)
 *   v_{i,n+1} = v_{i,n} + lambda_n (q_{i,n} - v_{i,n})
 *
 * It is forward-backward in the product space with the metric
 * V_n^{-1}, V_n = [[U_n^{-1}, -L^*], [-L, diag(U_{i,n}^{-1})]].
 */
#pragma once

#include "vmfb/duality_strong.hpp"

namespace vmfb {

struct CocoerciveProblem {
  Vector z;
  ResolventOperator A;
  CocoerciveOperator C;
  std::vector<DualBlock> blocks;
};

void validate_problem(const CocoerciveProblem& p);

/// min{mu, nu_1, ..., nu_m}; +inf when every term is constant.
double beta_primal_dual(const CocoerciveProblem& p);

struct RelaxationSchedule {
  double epsilon = 0.0;
  std::function<double(std::int64_t)> lambda;

  static RelaxationSchedule constant(double epsilon, double lambda);
};

struct CocoerciveErrors {
  std::optional<ErrorSequence> a;
  std::vector<ErrorSequence> b;
  std::optional<ErrorSequence> c;
  std::vector<ErrorSequence> d;
};

struct CocoerciveOptions {
  CocoerciveErrors errors;
  StoppingRule stop;
  Policy policy = Policy::strict;
  std::int64_t n_check = -1;
  bool record_iterates = true;
  /// During the run, delta_n and zeta_n are recomputed every this many steps
  /// beyond the validated prefix; 0 disables it.
  std::int64_t spot_check_every = 100;
};

/// Step-condition report plus lambda_n in [epsilon, 1] for n < n_check.
ValidationReport cocoercive_pd_report(const CocoerciveProblem& p, const MetricSchedule& primal_metrics,
                                      const std::vector<MetricSchedule>& dual_metrics,
                                      const RelaxationSchedule& relax, std::int64_t n_check);

/// Records hold x_n in `x` and the stacked v_n in `y`; the residual is
/// ||(p_n - x_n, q_n - v_n)|| of the error-free step.
PrimalDualResult solve_cocoercive_pd(const CocoerciveProblem& p, const MetricSchedule& primal_metrics,
                                     const std::vector<MetricSchedule>& dual_metrics,
                                     const RelaxationSchedule& relax, const Vector& x0,
                                     const std::vector<Vector>& v0,
                                     const CocoerciveOptions& options = {});

/// Largest of ||x - J_A(x - (sum_i L_i^* v_i + C x - z))|| and
/// ||v_i - J_{B_i^{-1}}(v_i + L_i x - r_i - D_i^{-1} v_i)||.
double kkt_residual(const CocoerciveProblem& p, const Vector& x, const std::vector<Vector>& v);

/// V = [[U^{-1}, -L^*], [-L, diag(U_i^{-1})]] as a dense matrix.
Matrix coupling_matrix(const Metric& U, const std::vector<Metric>& Ui,
                       const std::vector<LinearMap>& L);

// ---------------------------------------------------------------------------
// Composite minimization
//
//   minimize f(x) + sum_i (g_i [] l_i)(L_i x - r_i) + h(x) - <x, z>
//
// with grad h given as a cocoercive operator.

CocoerciveProblem make_composite_problem(const Vector& z, const Function& f,
                                         const CocoerciveOperator& grad_h,
                                         const std::vector<SmoothedBlock>& blocks);

/// h is evaluated through `h`; pass nullptr when h = 0.
double composite_objective(const Vector& z, const Function& f,
                           const std::function<double(const Vector&)>& h,
                           const std::vector<SmoothedBlock>& blocks, const Vector& x);

PrimalDualResult solve_composite_min(const Vector& z, const Function& f,
                                     const CocoerciveOperator& grad_h,
                                     const std::vector<SmoothedBlock>& blocks,
                                     const MetricSchedule& primal_metrics,
                                     const std::vector<MetricSchedule>& dual_metrics,
                                     const RelaxationSchedule& relax, const Vector& x0,
                                     const std::vector<Vector>& v0,
                                     const CocoerciveOptions& options = {});

}  // namespace vmfb
