#include "vmfb/fb.hpp"

#include <chrono>
#include <cmath>
#include <limits>

namespace vmfb {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// eps_n of the quasi-Fejer inequality.
double fejer_slack(const MetricSchedule& ms, const StepSchedule& ss, double beta, std::int64_t n,
                   double a_norm, double b_norm) {
  const double delta = std::sqrt(1.0 + ms.eta_sup);
  const double mu = ms.mu_bound;
  // With a constant B any beta is admissible; the bound then uses gamma_n directly.
  const double b_coef = std::isinf(beta) ? ss.gamma(n) * std::sqrt(mu)
                                         : (2.0 * beta - ss.epsilon) / std::sqrt(mu);
  double s = a_norm / std::sqrt(ms.alpha);
  if (b_norm > 0.0) s += b_coef * b_norm;
  return delta * s;
}

std::int64_t elapsed_ns(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

FBResult fb_solve(const FBProblem& problem, const MetricSchedule& metrics, const StepSchedule& steps,
                  const Vector& x0, const FBOptions& options) {
  const Index dim = problem.A.dim();
  require_same_dim(dim, problem.B.dim, "fb_solve: A and B");
  require_same_dim(dim, metrics.dim, "fb_solve: metric schedule");
  require_same_dim(dim, x0.size(), "fb_solve: x0");
  require_finite(x0, "fb_solve: x0");
  if (options.reference) require_same_dim(dim, options.reference->size(), "fb_solve: reference");
  const auto t0 = std::chrono::steady_clock::now();

  const double beta = options.beta.value_or(problem.B.beta);
  const std::int64_t n_check = options.n_check >= 0 ? options.n_check : options.stop.max_iter + 1;

  FBResult out;
  SolveTrace& trace = out.trace;
  trace.assumptions.push_back("zer(A + B) is nonempty");
  trace.validation = validate_fb_hypotheses(metrics, steps, beta, n_check);
  if (options.policy == Policy::strict && !trace.validation.passed()) {
    throw ValidationError("fb_solve: hypotheses not satisfied\n" + trace.validation.to_string(),
                          trace.validation);
  }

  const ErrorSchedule errors = options.errors.value_or(ErrorSchedule::none(dim));
  const bool exact = errors.a.is_zero() && errors.b.is_zero();
  const double blowup = kDivergenceFactor * (1.0 + x0.norm());

  std::optional<Vector> Bz;
  if (options.reference) Bz = problem.B(*options.reference);
  double drift = 0.0;

  Vector x = x0;
  Metric U = metrics.at(0);
  trace.termination = Termination::max_iterations;
  for (std::int64_t n = 0;; ++n) {
    const double gamma = steps.gamma(n);
    const double lambda = steps.lambda(n);
    const Vector Bx = problem.B(x);
    const Vector q = problem.A.resolvent(gamma, U, x - gamma * U.apply(Bx));
    const double residual = (q - x).norm();

    IterationRecord rec;
    rec.n = n;
    if (options.record_iterates) rec.x = x;
    rec.gamma = gamma;
    rec.lambda = lambda;
    rec.residual = residual;
    rec.fejer_lhs = kNaN;
    rec.fejer_rhs = kNaN;
    if (Bz) drift += (Bx - *Bz).squaredNorm();
    rec.b_drift = Bz ? drift : kNaN;

    if (!std::isfinite(residual)) {
      trace.termination = Termination::non_finite;
    } else if (residual <= options.stop.tol) {
      trace.termination = Termination::converged;
    } else if (n >= options.stop.max_iter) {
      trace.termination = Termination::max_iterations;
    } else {
      Vector y;
      Vector p;
      Vector an;
      if (exact) {
        y = x - gamma * U.apply(Bx);
        p = q;
      } else {
        y = x - gamma * U.apply(Bx + errors.b.at(n));
        p = problem.A.resolvent(gamma, U, y);
        an = errors.a.at(n);
        p += an;
      }
      Vector x_next = x + lambda * (p - x);
      const Metric U_next = metrics.at(n + 1);
      if (options.record_iterates) rec.y = y;
      if (options.reference) {
        const Vector& z = *options.reference;
        const double eta = metrics.eta(n);
        const double a_norm = exact ? 0.0 : an.norm();
        const double b_norm = exact ? 0.0 : errors.b.at(n).norm();
        rec.fejer_lhs = metric_norm(U_next.inverse(), x_next - z);
        rec.fejer_rhs = (1.0 + eta) * metric_norm(U.inverse(), x - z) +
                        fejer_slack(metrics, steps, beta, n, a_norm, b_norm);
      }
      rec.wall_clock_ns = elapsed_ns(t0);
      trace.push(std::move(rec));
      if (!x_next.allFinite()) {
        // x is the last finite iterate.
        trace.termination = Termination::non_finite;
        trace.final_residual = residual;
        trace.iterations = n + 1;
        break;
      }
      x = std::move(x_next);
      U = U_next;
      if (x.norm() > blowup) {
        trace.termination = Termination::diverged;
        trace.final_residual = kNaN;
        trace.iterations = n + 1;
        break;
      }
      continue;
    }
    rec.wall_clock_ns = elapsed_ns(t0);
    trace.push(std::move(rec));
    trace.final_residual = residual;
    trace.iterations = n;
    break;
  }
  trace.wall_time_ns = elapsed_ns(t0);
  out.x = std::move(x);
  return out;
}

FBResult fb_minimize(const Function& f, const CocoerciveOperator& grad_g,
                     const MetricSchedule& metrics, const StepSchedule& steps, const Vector& x0,
                     const FBOptions& options) {
  FBResult r = fb_solve({ResolventOperator::subdifferential(f), grad_g}, metrics, steps, x0, options);
  r.trace.assumptions.push_back("Argmin(f + g) is nonempty");
  return r;
}

FBResult fb_variational_inequality(const Function& f, const CocoerciveOperator& B,
                                   const MetricSchedule& metrics, const StepSchedule& steps,
                                   const Vector& x0, const FBOptions& options) {
  return fb_solve({ResolventOperator::subdifferential(f), B}, metrics, steps, x0, options);
}

double vi_residual(const Function& f, const CocoerciveOperator& B, const Vector& x,
                   const std::vector<Vector>& samples) {
  const Vector Bx = B(x);
  const double fx = evaluate(f, x);
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& y : samples) {
    const double fy = evaluate(f, y);
    if (std::isinf(fy)) continue;
    worst = std::max(worst, (x - y).dot(Bx) + fx - fy);
  }
  return worst;
}

FejerReport fejer_diagnostic(const SolveTrace& trace, const Vector& z, const MetricSchedule& metrics,
                             const StepSchedule& steps, const ErrorSchedule& errors, double beta) {
  FejerReport rep;
  rep.max_violation = -std::numeric_limits<double>::infinity();
  const auto& recs = trace.records;
  if (recs.size() < 2) {
    rep.max_violation = 0.0;
    return rep;
  }
  Metric U = metrics.at(recs.front().n);
  for (std::size_t k = 0; k + 1 < recs.size(); ++k) {
    const auto& cur = recs[k];
    const auto& next = recs[k + 1];
    if (cur.x.size() == 0 || next.x.size() == 0) {
      throw InvalidArgument("fejer_diagnostic: trace does not hold iterates");
    }
    const std::int64_t n = cur.n;
    const Metric U_next = metrics.at(n + 1);
    const double lhs = metric_norm(U_next.inverse(), next.x - z);
    const double rhs = (1.0 + metrics.eta(n)) * metric_norm(U.inverse(), cur.x - z) +
                       fejer_slack(metrics, steps, beta, n, errors.a.at(n).norm(),
                                   errors.b.at(n).norm());
    const double excess = lhs - rhs;
    rep.excess.push_back(excess);
    if (excess > rep.max_violation) {
      rep.max_violation = excess;
      rep.worst_index = n;
    }
    U = U_next;
  }
  return rep;
}

DriftReport b_drift_diagnostic(const SolveTrace& trace, const Vector& x_bar,
                               const CocoerciveOperator& B) {
  DriftReport rep;
  const Vector Bbar = B(x_bar);
  double s = 0.0;
  for (const auto& r : trace.records) {
    if (r.x.size() == 0) throw InvalidArgument("b_drift_diagnostic: trace does not hold iterates");
    s += (B(r.x) - Bbar).squaredNorm();
    rep.partial_sums.push_back(s);
  }
  if (rep.partial_sums.empty() || s == 0.0) return rep;
  const std::size_t N = rep.partial_sums.size() - 1;
  const double at = rep.partial_sums[(3 * N) / 4];
  rep.last_quarter_gain = (s - at) / s;
  return rep;
}

}  // namespace vmfb
