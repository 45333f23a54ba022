#include "vmfb/duality_cocoercive.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace vmfb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

Vector adjoint_sum(const CocoerciveProblem& p, const std::vector<Vector>& v) {
  Vector s = Vector::Zero(p.z.size());
  for (std::size_t i = 0; i < p.blocks.size(); ++i) s += p.blocks[i].L.adjoint(v[i]);
  return s;
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
      .count();
}

std::vector<LinearMap> couplings(const CocoerciveProblem& p) {
  std::vector<LinearMap> L;
  for (const auto& b : p.blocks) L.push_back(b.L);
  return L;
}

}  // namespace

void validate_problem(const CocoerciveProblem& p) {
  const Index n = p.z.size();
  if (n == 0) throw InvalidArgument("cocoercive problem: empty z");
  require_finite(p.z, "cocoercive problem: z");
  require_same_dim(n, p.A.dim(), "cocoercive problem: A");
  require_same_dim(n, p.C.dim, "cocoercive problem: C");
  if (!(p.C.beta > 0.0)) throw InvalidArgument("cocoercive problem: mu must be > 0");
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const auto& b = p.blocks[i];
    const std::string where = "cocoercive problem: block " + std::to_string(i);
    require_same_dim(n, b.L.cols(), where.c_str());
    require_same_dim(b.L.rows(), b.B.dim(), where.c_str());
    require_same_dim(b.L.rows(), b.Dinv.dim, where.c_str());
    require_same_dim(b.L.rows(), b.r.size(), where.c_str());
    if (!(b.Dinv.beta > 0.0)) throw InvalidArgument(where + ": nu_i must be > 0");
  }
}

double beta_primal_dual(const CocoerciveProblem& p) {
  double beta = p.C.is_constant() ? kInf : p.C.beta;
  for (const auto& b : p.blocks) {
    if (!b.Dinv.is_constant()) beta = std::min(beta, b.Dinv.beta);
  }
  return beta;
}

RelaxationSchedule RelaxationSchedule::constant(double epsilon, double lambda) {
  return {epsilon, [lambda](std::int64_t) { return lambda; }};
}

Matrix coupling_matrix(const Metric& U, const std::vector<Metric>& Ui,
                       const std::vector<LinearMap>& L) {
  require_same_dim(static_cast<Index>(Ui.size()), static_cast<Index>(L.size()), "coupling_matrix");
  const Index n = U.dim();
  Index total = n;
  for (const auto& u : Ui) total += u.dim();
  Matrix V = Matrix::Zero(total, total);
  V.topLeftCorner(n, n) = U.inverse().matrix();
  Index off = n;
  for (std::size_t i = 0; i < L.size(); ++i) {
    const Index k = Ui[i].dim();
    require_same_dim(L[i].rows(), k, "coupling_matrix");
    require_same_dim(L[i].cols(), n, "coupling_matrix");
    V.block(off, off, k, k) = Ui[i].inverse().matrix();
    V.block(off, 0, k, n) = -L[i].matrix;
    V.block(0, off, n, k) = -L[i].matrix.transpose();
    off += k;
  }
  return V;
}

double kkt_residual(const CocoerciveProblem& p, const Vector& x, const std::vector<Vector>& v) {
  if (v.size() != p.blocks.size()) throw DimensionError("kkt_residual: wrong number of blocks");
  const Metric Id = Metric::identity(p.z.size());
  const Vector g = adjoint_sum(p, v) + p.C(x) - p.z;
  double r = (x - p.A.resolvent(1.0, Id, x - g)).norm();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& b = p.blocks[i];
    const Vector w = v[i] + b.L.apply(x) - b.r - b.Dinv(v[i]);
    r = std::max(r, (v[i] - resolvent_of_inverse(b.B, 1.0, Metric::identity(v[i].size()), w)).norm());
  }
  return r;
}

ValidationReport cocoercive_pd_report(const CocoerciveProblem& p, const MetricSchedule& primal_metrics,
                                      const std::vector<MetricSchedule>& dual_metrics,
                                      const RelaxationSchedule& relax, std::int64_t n_check) {
  const double eps = relax.epsilon;
  ValidationReport rep =
      validate_primal_dual_hypotheses(primal_metrics, dual_metrics, couplings(p), beta_primal_dual(p),
                                      eps, n_check)
          .report;
  HypothesisCheck lam;
  lam.name = "lambda_range";
  lam.worst_margin = n_check > 0 ? kInf : 0.0;
  for (std::int64_t n = 0; n < n_check; ++n) {
    const double l = relax.lambda(n);
    lam.worst_margin = std::min(lam.worst_margin, std::min(l - eps, 1.0 - l));
    if (lam.passed && !(l >= eps && l <= 1.0)) {
      lam.passed = false;
      lam.offending_index = n;
      lam.detail = "lambda_n = " + std::to_string(l) + " not in [epsilon, 1]";
    }
  }
  rep.add(lam);
  return rep;
}

PrimalDualResult solve_cocoercive_pd(const CocoerciveProblem& p, const MetricSchedule& primal_metrics,
                                     const std::vector<MetricSchedule>& dual_metrics,
                                     const RelaxationSchedule& relax, const Vector& x0,
                                     const std::vector<Vector>& v0,
                                     const CocoerciveOptions& options) {
  validate_problem(p);
  const std::size_t m = p.blocks.size();
  const Index dim = p.z.size();
  require_same_dim(dim, primal_metrics.dim, "solve_cocoercive_pd: primal metric");
  require_same_dim(dim, x0.size(), "solve_cocoercive_pd: x0");
  require_finite(x0, "solve_cocoercive_pd: x0");
  if (dual_metrics.size() != m) throw DimensionError("solve_cocoercive_pd: one metric schedule per block");
  std::vector<Vector> v = v0;
  if (v.empty()) {
    for (const auto& b : p.blocks) v.push_back(Vector::Zero(b.L.rows()));
  }
  if (v.size() != m) throw DimensionError("solve_cocoercive_pd: wrong number of initial blocks");
  for (std::size_t i = 0; i < m; ++i) {
    require_same_dim(p.blocks[i].L.rows(), v[i].size(), "solve_cocoercive_pd: v0");
    require_same_dim(p.blocks[i].L.rows(), dual_metrics[i].dim, "solve_cocoercive_pd: metric");
    require_finite(v[i], "solve_cocoercive_pd: v0");
  }
  const auto t0 = std::chrono::steady_clock::now();
  const double beta = beta_primal_dual(p);
  const double eps = relax.epsilon;
  const std::int64_t n_check = options.n_check >= 0 ? options.n_check : options.stop.max_iter + 1;
  const std::vector<LinearMap> L = couplings(p);

  PrimalDualResult out;
  SolveTrace& trace = out.trace;
  trace.assumptions.push_back("z lies in the range of the primal operator");
  trace.validation = cocoercive_pd_report(p, primal_metrics, dual_metrics, relax, n_check);
  if (options.policy == Policy::strict && !trace.validation.passed()) {
    throw ValidationError("solve_cocoercive_pd: hypotheses not satisfied\n" +
                              trace.validation.to_string(),
                          trace.validation);
  }

  const CocoerciveErrors& E = options.errors;
  const ErrorSequence ea = E.a.value_or(ErrorSequence::zero(dim));
  const ErrorSequence ec = E.c.value_or(ErrorSequence::zero(dim));
  std::vector<ErrorSequence> eb, ed;
  bool exact = ea.is_zero() && ec.is_zero();
  for (std::size_t i = 0; i < m; ++i) {
    const Index k = p.blocks[i].L.rows();
    eb.push_back(i < E.b.size() ? E.b[i] : ErrorSequence::zero(k));
    ed.push_back(i < E.d.size() ? E.d[i] : ErrorSequence::zero(k));
    exact = exact && eb.back().is_zero() && ed.back().is_zero();
  }
  double start = x0.squaredNorm();
  for (const auto& vi : v) start += vi.squaredNorm();
  const double blowup = kDivergenceFactor * (1.0 + std::sqrt(start));

  // One forward-backward step; errors are skipped when `with_errors` is false.
  auto step = [&](std::int64_t n, const Vector& x, const std::vector<Vector>& vv, const Metric& U,
                  const std::vector<Metric>& Ui, bool with_errors, Vector& pn,
                  std::vector<Vector>& qn) {
    Vector g = adjoint_sum(p, vv) + p.C(x) - p.z;
    if (with_errors) g += ec.at(n);
    pn = p.A.resolvent(1.0, U, x - U.apply(g));
    if (with_errors) pn += ea.at(n);
    const Vector y = 2.0 * pn - x;
    qn.resize(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto& b = p.blocks[i];
      Vector fw = b.L.apply(y) - b.Dinv(vv[i]) - b.r;
      if (with_errors) fw -= ed[i].at(n);
      qn[i] = resolvent_of_inverse(b.B, 1.0, Ui[i], vv[i] + Ui[i].apply(fw));
      if (with_errors) qn[i] += eb[i].at(n);
    }
  };

  Vector x = x0;
  Metric U = primal_metrics.at(0);
  std::vector<Metric> Ui;
  for (const auto& s : dual_metrics) Ui.push_back(s.at(0));
  trace.termination = Termination::max_iterations;
  for (std::int64_t n = 0;; ++n) {
    const double lambda = relax.lambda(n);
    Vector pn;
    std::vector<Vector> qn;
    step(n, x, v, U, Ui, false, pn, qn);
    double res2 = (pn - x).squaredNorm();
    for (std::size_t i = 0; i < m; ++i) res2 += (qn[i] - v[i]).squaredNorm();
    const double residual = std::sqrt(res2);

    IterationRecord rec;
    rec.n = n;
    rec.gamma = 1.0;
    rec.lambda = lambda;
    rec.residual = residual;
    rec.fejer_lhs = rec.fejer_rhs = rec.b_drift = kNaN;
    if (options.record_iterates) {
      rec.x = x;
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

    if (!exact) step(n, x, v, U, Ui, true, pn, qn);
    Vector x_next = x + lambda * (pn - x);
    bool finite = x_next.allFinite();
    double norm2 = x_next.squaredNorm();
    for (std::size_t i = 0; i < m; ++i) {
      v[i] += lambda * (qn[i] - v[i]);
      finite = finite && v[i].allFinite();
      norm2 += v[i].squaredNorm();
    }
    if (!finite) {
      trace.termination = Termination::non_finite;
      trace.final_residual = residual;
      trace.iterations = n + 1;
      break;
    }
    x = std::move(x_next);
    U = primal_metrics.at(n + 1);
    for (std::size_t i = 0; i < m; ++i) Ui[i] = dual_metrics[i].at(n + 1);

    const std::int64_t k = options.spot_check_every;
    if (k > 0 && n + 1 >= n_check && (n + 1) % k == 0) {
      const auto [delta, zeta] = coupling_margins(U, Ui, L);
      const double zeta_min = std::isinf(beta) ? 0.0 : 1.0 / (2.0 * beta - eps);
      if (!(delta > 0.0) || zeta < zeta_min) {
        HypothesisCheck c;
        c.name = "spot_check_zeta";
        c.passed = false;
        c.worst_margin = zeta - zeta_min;
        c.offending_index = n + 1;
        c.detail = "delta_n = " + std::to_string(delta) + ", zeta_n = " + std::to_string(zeta);
        trace.validation.add(c);
        if (options.policy == Policy::strict) {
          throw ValidationError("solve_cocoercive_pd: step condition fails at n = " +
                                    std::to_string(n + 1),
                                trace.validation);
        }
      }
    }
    if (std::sqrt(norm2) > blowup) {
      trace.termination = Termination::diverged;
      trace.final_residual = kNaN;
      trace.iterations = n + 1;
      break;
    }
  }
  trace.wall_time_ns = elapsed_ns(t0);
  out.x = std::move(x);
  out.v = std::move(v);
  return out;
}

// ---------------------------------------------------------------------------

CocoerciveProblem make_composite_problem(const Vector& z, const Function& f,
                                         const CocoerciveOperator& grad_h,
                                         const std::vector<SmoothedBlock>& blocks) {
  CocoerciveProblem p{z, ResolventOperator::subdifferential(f), grad_h, {}};
  for (const auto& b : blocks) p.blocks.push_back(make_dual_block(b));
  validate_problem(p);
  return p;
}

double composite_objective(const Vector& z, const Function& f,
                           const std::function<double(const Vector&)>& h,
                           const std::vector<SmoothedBlock>& blocks, const Vector& x) {
  double val = evaluate(f, x) - x.dot(z);
  if (h) val += h(x);
  for (const auto& b : blocks) val += smoothed_block_value(b, x);
  return val;
}

PrimalDualResult solve_composite_min(const Vector& z, const Function& f,
                                     const CocoerciveOperator& grad_h,
                                     const std::vector<SmoothedBlock>& blocks,
                                     const MetricSchedule& primal_metrics,
                                     const std::vector<MetricSchedule>& dual_metrics,
                                     const RelaxationSchedule& relax, const Vector& x0,
                                     const std::vector<Vector>& v0,
                                     const CocoerciveOptions& options) {
  const CocoerciveProblem p = make_composite_problem(z, f, grad_h, blocks);
  PrimalDualResult r = solve_cocoercive_pd(p, primal_metrics, dual_metrics, relax, x0, v0, options);
  r.trace.assumptions.push_back("qualification condition for the composite problem");
  return r;
}

}  // namespace vmfb
