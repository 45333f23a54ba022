#include "vmfb/duality_strong.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace vmfb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<Index> block_sizes(const StronglyMonotoneProblem& p) {
  std::vector<Index> s;
  for (const auto& b : p.blocks) s.push_back(b.L.rows());
  return s;
}

Vector adjoint_sum(const StronglyMonotoneProblem& p, const std::vector<Vector>& v) {
  Vector s = Vector::Zero(p.z.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) s += p.blocks[i].L.adjoint(v[i]);
  return s;
}

Vector recover(const StronglyMonotoneProblem& p, const Metric& Id, const Vector& Lt_v) {
  return p.A.resolvent(1.0 / p.rho, Id, (p.z - Lt_v) / p.rho);
}

ErrorSequence or_zero(const std::vector<ErrorSequence>& e, std::size_t i, Index dim) {
  return i < e.size() ? e[i] : ErrorSequence::zero(dim);
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

void validate_problem(const StronglyMonotoneProblem& p) {
  const Index n = p.z.size();
  if (n == 0) throw InvalidArgument("strongly monotone problem: empty z");
  require_finite(p.z, "strongly monotone problem: z");
  if (!(p.rho > 0.0) || !std::isfinite(p.rho)) {
    throw InvalidArgument("strongly monotone problem: rho must be positive and finite");
  }
  require_same_dim(n, p.A.dim(), "strongly monotone problem: A");
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    const std::string where = "strongly monotone problem: block " + std::to_string(i);
    require_same_dim(n, b.L.cols(), where.c_str());
    require_same_dim(b.L.rows(), b.B.dim(), where.c_str());
    require_same_dim(b.L.rows(), b.Dinv.dim, where.c_str());
    require_same_dim(b.L.rows(), b.r.size(), where.c_str());
    if (!(b.L.norm > 0.0)) throw InvalidArgument(where + ": L_i = 0");
    if (!(b.Dinv.beta > 0.0)) throw InvalidArgument(where + ": nu_i must be > 0");
  }
}

double beta_dual(const StronglyMonotoneProblem& p) {
  double inv_nu = 0.0;
  double lsum = 0.0;
  for (const auto& b : p.blocks) {
    if (!b.Dinv.is_constant()) inv_nu = std::max(inv_nu, 1.0 / b.Dinv.beta);
    lsum += b.L.norm * b.L.norm;
  }
  return 1.0 / (inv_nu + lsum / p.rho);
}

std::vector<Vector> split_blocks(const Vector& stacked, const std::vector<Index>& sizes) {
  Index total = 0;
  for (Index s : sizes) total += s;
  require_same_dim(total, stacked.size(), "split_blocks");
  std::vector<Vector> out;
  Index off = 0;
  for (Index s : sizes) {
    out.push_back(stacked.segment(off, s));
    off += s;
  }
  return out;
}

Vector stack_blocks(const std::vector<Vector>& parts) {
  Index total = 0;
  for (const auto& v : parts) total += v.size();
  Vector out(total);
  Index off = 0;
  for (const auto& v : parts) {
    out.segment(off, v.size()) = v;
    off += v.size();
  }
  return out;
}

CocoerciveOperator dual_operator(const StronglyMonotoneProblem& p) {
  validate_problem(p);
  if (p.blocks.empty()) throw InvalidArgument("dual_operator: no blocks");
  const std::vector<Index> sizes = block_sizes(p);
  Index total = 0;
  for (Index s : sizes) total += s;
  const Metric Id = Metric::identity(p.z.size());
  return {total, beta_dual(p), [p, sizes, Id](const Vector& stacked) -> Vector {
            const std::vector<Vector> v = split_blocks(stacked, sizes);
            const Vector x = recover(p, Id, adjoint_sum(p, v));
            std::vector<Vector> out;
            for (std::size_t i = 0; i < v.size(); ++i) {
              const auto& b = p.blocks[i];
              out.push_back(b.r + b.Dinv(v[i]) - b.L.apply(x));
            }
            return stack_blocks(out);
          }};
}

ResolventOperator dual_resolvent_operator(const StronglyMonotoneProblem& p) {
  std::vector<ResolventOperator> ops;
  for (const auto& b : p.blocks) ops.push_back(b.B.inverted());
  return block_diagonal_operator(std::move(ops));
}

Vector primal_recovery(const StronglyMonotoneProblem& p, const std::vector<Vector>& v) {
  if (v.size() != p.blocks.size()) throw DimensionError("primal_recovery: wrong number of blocks");
  for (std::size_t i = 0; i < v.size(); ++i) {
    require_same_dim(p.blocks[i].L.rows(), v[i].size(), "primal_recovery");
  }
  return recover(p, Metric::identity(p.z.size()), adjoint_sum(p, v));
}

ValidationReport strong_duality_report(const StronglyMonotoneProblem& p,
                                       const std::vector<MetricSchedule>& dual_metrics,
                                       const StepSchedule& steps, std::int64_t n_check) {
  return validate_fb_hypotheses(block_diagonal_schedule(dual_metrics), steps, beta_dual(p), n_check);
}

PrimalDualResult solve_strong_duality(const StronglyMonotoneProblem& p,
                                      const std::vector<MetricSchedule>& dual_metrics,
                                      const StepSchedule& steps, const std::vector<Vector>& v0,
                                      const PrimalDualOptions& options) {
  validate_problem(p);
  const std::size_t m = p.blocks.size();
  if (m == 0) throw InvalidArgument("solve_strong_duality: no blocks");
  if (dual_metrics.size() != m) throw DimensionError("solve_strong_duality: one metric schedule per block");
  std::vector<Vector> v = v0;
  if (v.empty()) {
    for (const auto& b : p.blocks) v.push_back(Vector::Zero(b.L.rows()));
  }
  if (v.size() != m) throw DimensionError("solve_strong_duality: wrong number of initial blocks");
  for (std::size_t i = 0; i < m; ++i) {
    require_same_dim(p.blocks[i].L.rows(), v[i].size(), "solve_strong_duality: v0");
    require_same_dim(p.blocks[i].L.rows(), dual_metrics[i].dim, "solve_strong_duality: metric");
    require_finite(v[i], "solve_strong_duality: v0");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const std::int64_t n_check = options.n_check >= 0 ? options.n_check : options.stop.max_iter + 1;

  PrimalDualResult out;
  SolveTrace& trace = out.trace;
  trace.assumptions.push_back("z lies in the range of the primal operator");
  trace.validation = strong_duality_report(p, dual_metrics, steps, n_check);
  if (options.policy == Policy::strict && !trace.validation.passed()) {
    throw ValidationError("solve_strong_duality: hypotheses not satisfied\n" +
                              trace.validation.to_string(),
                          trace.validation);
  }

  const Index n_primal = p.z.size();
  const ErrorSequence a = options.errors.a.value_or(ErrorSequence::zero(n_primal));
  std::vector<ErrorSequence> eb, ed;
  bool exact = a.is_zero();
  for (std::size_t i = 0; i < m; ++i) {
    eb.push_back(or_zero(options.errors.b, i, p.blocks[i].L.rows()));
    ed.push_back(or_zero(options.errors.d, i, p.blocks[i].L.rows()));
    exact = exact && eb.back().is_zero() && ed.back().is_zero();
  }
  const Metric Id = Metric::identity(n_primal);
  double v0norm = 0.0;
  for (const auto& vi : v) v0norm += vi.squaredNorm();
  const double blowup = kDivergenceFactor * (1.0 + std::sqrt(v0norm));

  std::vector<Metric> U;
  for (const auto& s : dual_metrics) U.push_back(s.at(0));
  std::vector<Vector> q(m);
  trace.termination = Termination::max_iterations;
  for (std::int64_t n = 0;; ++n) {
    const double gamma = steps.gamma(n);
    const double lambda = steps.lambda(n);
    const Vector x_exact = recover(p, Id, adjoint_sum(p, v));
    double res2 = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const auto& b = p.blocks[i];
      const Vector fw = b.L.apply(x_exact) - b.r - b.Dinv(v[i]);
      q[i] = resolvent_of_inverse(b.B, gamma, U[i], v[i] + gamma * U[i].apply(fw));
      res2 += (q[i] - v[i]).squaredNorm();
    }
    const double residual = std::sqrt(res2);

    IterationRecord rec;
    rec.n = n;
    rec.gamma = gamma;
    rec.lambda = lambda;
    rec.residual = residual;
    rec.fejer_lhs = rec.fejer_rhs = rec.b_drift = kNaN;
    Vector x_n = x_exact;
    if (!exact) x_n += a.at(n);
    if (options.record_iterates) {
      rec.x = x_n;
      rec.y = stack_blocks(v);
    }

    bool stop = true;
    if (!std::isfinite(residual)) {
      trace.termination = Termination::non_finite;
    } else if (residual <= options.stop.tol) {
      trace.termination = Termination::converged;
    } else if (n >= options.stop.max_iter) {
      trace.termination = Termination::max_iterations;
    } else {
      stop = false;
    }
    rec.wall_clock_ns = elapsed_ns(t0);
    trace.push(std::move(rec));
    if (stop) {
      trace.final_residual = residual;
      trace.iterations = n;
      break;
    }

    std::vector<Vector> v_next(m);
    double vnorm = 0.0;
    bool finite = true;
    for (std::size_t i = 0; i < m; ++i) {
      Vector pi;
      if (exact) {
        pi = q[i];
      } else {
        const auto& b = p.blocks[i];
        const Vector fw = b.L.apply(x_n) - b.r - b.Dinv(v[i]) - ed[i].at(n);
        pi = resolvent_of_inverse(b.B, gamma, U[i], v[i] + gamma * U[i].apply(fw)) + eb[i].at(n);
      }
      v_next[i] = v[i] + lambda * (pi - v[i]);
      finite = finite && v_next[i].allFinite();
      vnorm += v_next[i].squaredNorm();
    }
    if (!finite) {
      trace.termination = Termination::non_finite;
      trace.final_residual = residual;
      trace.iterations = n + 1;
      break;
    }
    v = std::move(v_next);
    for (std::size_t i = 0; i < m; ++i) U[i] = dual_metrics[i].at(n + 1);
    if (std::sqrt(vnorm) > blowup) {
      trace.termination = Termination::diverged;
      trace.final_residual = kNaN;
      trace.iterations = n + 1;
      break;
    }
  }
  trace.wall_time_ns = elapsed_ns(t0);
  out.x = recover(p, Id, adjoint_sum(p, v));
  out.v = std::move(v);
  return out;
}

// ---------------------------------------------------------------------------

DualBlock make_dual_block(const SmoothedBlock& b) {
  CocoerciveOperator Dinv = CocoerciveOperator::zero(b.L.rows());
  if (b.smoothing) {
    const Metric M(*b.smoothing);
    // l = <M ., .>/2 is lambda_min(M)-strongly convex and grad l^* = M^{-1}.
    Dinv = CocoerciveOperator::affine(M.inverse().matrix(), Vector::Zero(M.dim()),
                                      M.min_eigenvalue());
  }
  return {LinearMap(b.L), ResolventOperator::subdifferential(b.g), Dinv, b.r};
}

StronglyMonotoneProblem make_strongly_convex_problem(const Vector& z, const Function& f,
                                                     const std::vector<SmoothedBlock>& blocks) {
  StronglyMonotoneProblem p{z, 1.0, ResolventOperator::subdifferential(f), {}};
  for (const auto& b : blocks) p.blocks.push_back(make_dual_block(b));
  validate_problem(p);
  return p;
}

double smoothed_block_value(const SmoothedBlock& b, const Vector& x) {
  const Vector u = b.L * x - b.r;
  if (!b.smoothing) return evaluate(b.g, u);
  // inf_y g(y) + <M(u - y), u - y>/2 is attained at y = prox^M_g(u).
  const Metric M(*b.smoothing);
  const Vector y = prox_metric(b.g, 1.0, M, u);
  return evaluate(b.g, y) + 0.5 * metric_inner(M, u - y, u - y);
}

double strongly_convex_primal_objective(const Vector& z, const Function& f,
                                        const std::vector<SmoothedBlock>& blocks, const Vector& x) {
  double val = evaluate(f, x) + 0.5 * (x - z).squaredNorm();
  for (const auto& b : blocks) val += smoothed_block_value(b, x);
  return val;
}

std::optional<double> strongly_convex_dual_objective(const Vector& z, const Function& f,
                                                     const std::vector<SmoothedBlock>& blocks,
                                                     const std::vector<Vector>& v) {
  if (v.size() != blocks.size()) throw DimensionError("dual objective: wrong number of blocks");
  Vector s = z;
  for (std::size_t i = 0; i < blocks.size(); ++i) s -= blocks[i].L.transpose() * v[i];
  // (f + ||.||^2/2)^*(s) = <s, p> - f(p) - ||p||^2/2 with p = prox_f(s).
  const Vector p = prox_metric(f, 1.0, Metric::identity(s.size()), s);
  double val = s.dot(p) - evaluate(f, p) - 0.5 * p.squaredNorm() - 0.5 * z.squaredNorm();
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    const auto gs = conjugate(b.g);
    if (!gs) return std::nullopt;
    val += evaluate(*gs, v[i], 1e-7) + v[i].dot(b.r);
    if (b.smoothing) {
      const Metric M(*b.smoothing);
      val += 0.5 * metric_inner(M.inverse(), v[i], v[i]);
    }
  }
  return val;
}

PrimalDualResult solve_strongly_convex_min(const Vector& z, const Function& f,
                                           const std::vector<SmoothedBlock>& blocks,
                                           const std::vector<MetricSchedule>& dual_metrics,
                                           const StepSchedule& steps, const std::vector<Vector>& v0,
                                           const PrimalDualOptions& options) {
  const StronglyMonotoneProblem p = make_strongly_convex_problem(z, f, blocks);
  PrimalDualResult r = solve_strong_duality(p, dual_metrics, steps, v0, options);
  r.trace.assumptions.push_back("qualification condition for the primal problem");
  return r;
}

StronglyMonotoneProblem make_best_approximation_problem(const Vector& z, const ConvexSet& C,
                                                       const std::vector<ConstraintBlock>& blocks) {
  std::vector<SmoothedBlock> sb;
  for (const auto& b : blocks) sb.push_back({b.L, Indicator{b.D}, std::nullopt, b.r});
  return make_strongly_convex_problem(z, Indicator{C}, sb);
}

namespace {

double max_mu(const std::vector<MetricSchedule>& dual_metrics) {
  double mu = 0.0;
  for (const auto& s : dual_metrics) mu = std::max(mu, s.mu_bound);
  return mu;
}

}  // namespace

StepSchedule best_approximation_steps(const StronglyMonotoneProblem& p,
                                      const std::vector<MetricSchedule>& dual_metrics) {
  const double beta = beta_dual(p);
  const double mu = max_mu(dual_metrics);
  // gamma = lambda = 1 is admissible for any epsilon <= min{1, 2 beta/(mu+1), 2 beta - mu}.
  const double eps = std::min({1.0, 2.0 * beta / (mu + 1.0), 2.0 * beta - mu});
  StepSchedule s = StepSchedule::constant(eps, 1.0, 1.0);
  s.description = "gamma = lambda = 1";
  return s;
}

HypothesisCheck step_norm_condition(const StronglyMonotoneProblem& p,
                                    const std::vector<MetricSchedule>& dual_metrics) {
  const double mu = max_mu(dual_metrics);
  double lsum = 0.0;
  for (const auto& b : p.blocks) lsum += b.L.norm * b.L.norm;
  HypothesisCheck c;
  c.name = "step_norm_condition";
  c.worst_margin = 2.0 - mu * lsum;
  c.passed = mu * lsum < 2.0;
  if (!c.passed) {
    c.offending_index = 0;
    c.detail = "(max_i sup_n ||U_i,n||) sum_i ||L_i||^2 = " + std::to_string(mu * lsum) +
               " is not < 2";
  }
  return c;
}

PrimalDualResult solve_best_approximation(const Vector& z, const ConvexSet& C,
                                          const std::vector<ConstraintBlock>& blocks,
                                          const std::vector<MetricSchedule>& dual_metrics,
                                          const std::vector<Vector>& v0,
                                          const PrimalDualOptions& options) {
  const StronglyMonotoneProblem p = make_best_approximation_problem(z, C, blocks);
  if (dual_metrics.size() != p.blocks.size()) {
    throw DimensionError("solve_best_approximation: one metric schedule per block");
  }
  const HypothesisCheck norm_check = step_norm_condition(p, dual_metrics);
  if (!norm_check.passed && options.policy == Policy::strict) {
    ValidationReport rep;
    rep.add(norm_check);
    throw ValidationError("solve_best_approximation: " + norm_check.detail, rep);
  }
  PrimalDualResult r =
      solve_strong_duality(p, dual_metrics, best_approximation_steps(p, dual_metrics), v0, options);
  r.trace.validation.add(norm_check);
  r.trace.assumptions.push_back("qualification condition for the constraint system");
  return r;
}

}  // namespace vmfb
