#include "vmfb/oracles.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace vmfb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxEnumerated = 20;
constexpr double kPGTarget = 1e-12;
constexpr std::int64_t kPGMaxIter = 20000000;

double inf_norm(const Vector& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

}  // namespace

LinearConstraints linearize(const QPConstraints& cons, Index dim) {
  std::vector<Vector> rows;
  std::vector<double> rhs;
  for (const auto& hs : cons.halfspaces) {
    require_same_dim(dim, hs.normal.size(), "qp_oracle: half-space");
    rows.push_back(hs.normal);
    rhs.push_back(hs.offset);
  }
  for (const auto& bx : cons.boxes) {
    require_same_dim(dim, bx.lower.size(), "qp_oracle: box");
    require_same_dim(dim, bx.upper.size(), "qp_oracle: box");
    for (Index i = 0; i < dim; ++i) {
      if (std::isfinite(bx.lower(i))) {
        rows.push_back(-Vector::Unit(dim, i));
        rhs.push_back(-bx.lower(i));
      }
      if (std::isfinite(bx.upper(i))) {
        rows.push_back(Vector::Unit(dim, i));
        rhs.push_back(bx.upper(i));
      }
    }
  }
  LinearConstraints lc;
  lc.G.resize(static_cast<Index>(rows.size()), dim);
  lc.h.resize(static_cast<Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) {
    lc.G.row(static_cast<Index>(j)) = rows[j].transpose();
    lc.h(static_cast<Index>(j)) = rhs[j];
  }
  Index m = 0;
  for (const auto& af : cons.affine) {
    require_same_dim(dim, af.A.cols(), "qp_oracle: affine set");
    require_same_dim(af.A.rows(), af.b.size(), "qp_oracle: affine set");
    m += af.A.rows();
  }
  lc.A.resize(m, dim);
  lc.b.resize(m);
  Index off = 0;
  for (const auto& af : cons.affine) {
    lc.A.middleRows(off, af.A.rows()) = af.A;
    lc.b.segment(off, af.A.rows()) = af.b;
    off += af.A.rows();
  }
  return lc;
}

Certificate qp_certificate(const Matrix& Q, const Vector& c, const LinearConstraints& lc,
                           const Vector& x, const Vector& lam, const Vector& nu) {
  require_same_dim(lc.G.rows(), lam.size(), "qp_certificate: multipliers");
  require_same_dim(lc.A.rows(), nu.size(), "qp_certificate: multipliers");
  const Vector Qx = Q * x;
  Vector grad = Qx + c;
  if (lc.G.rows()) grad += lc.G.transpose() * lam;
  if (lc.A.rows()) grad += lc.A.transpose() * nu;
  const double scale_s = std::max({1.0, inf_norm(Qx), inf_norm(c)});
  const double scale_f = std::max({1.0, inf_norm(lc.h), inf_norm(lc.b)});

  Certificate cert;
  cert.stationarity = inf_norm(grad) / scale_s;
  double feas = 0.0;
  double comp = 0.0;
  for (Index j = 0; j < lc.G.rows(); ++j) {
    const double slack = lc.G.row(j).dot(x) - lc.h(j);
    feas = std::max(feas, slack);
    comp = std::max({comp, std::abs(lam(j) * slack) / scale_s, -lam(j) / scale_s});
  }
  if (lc.A.rows()) feas = std::max(feas, inf_norm(lc.A * x - lc.b));
  cert.feasibility = feas / scale_f;
  cert.complementarity = comp;
  return cert;
}

namespace {

// Projected gradient for box-only sets.
OracleSolution qp_projected_gradient(const Matrix& Q, const Vector& c, const QPConstraints& cons,
                                     const LinearConstraints& lc) {
  const Index n = Q.rows();
  Vector lo = Vector::Constant(n, -kInf);
  Vector hi = Vector::Constant(n, kInf);
  for (const auto& bx : cons.boxes) {
    lo = lo.cwiseMax(bx.lower);
    hi = hi.cwiseMin(bx.upper);
  }
  if ((lo.array() > hi.array()).any()) throw OracleError("qp_oracle: infeasible set");
  const double L = spectral_norm(Q);
  Vector x = Vector::Zero(n).cwiseMax(lo).cwiseMin(hi);
  std::int64_t k = 0;
  for (; k < kPGMaxIter; ++k) {
    const Vector next = (x - (Q * x + c) / L).cwiseMax(lo).cwiseMin(hi);
    const double step = inf_norm(next - x);
    x = next;
    if (step <= kPGTarget * std::max(1.0, inf_norm(x))) break;
  }
  if (k == kPGMaxIter) throw OracleError("qp_oracle: projected gradient did not reach its target");

  // Multipliers of the bound rows, one per active (coordinate, side).
  const Vector g = Q * x + c;
  Vector lam = Vector::Zero(lc.G.rows());
  std::vector<char> used(2 * static_cast<std::size_t>(n), 0);
  for (Index j = 0; j < lc.G.rows(); ++j) {
    Index i = 0;
    lc.G.row(j).cwiseAbs().maxCoeff(&i);
    const double s = lc.G(j, i);
    if (std::abs(s * x(i) - lc.h(j)) > 1e-9 * std::max(1.0, std::abs(lc.h(j)))) continue;
    const std::size_t key = 2 * static_cast<std::size_t>(i) + (s > 0 ? 1 : 0);
    if (used[key]) continue;
    used[key] = 1;
    // Snap to the bound so complementarity is exact.
    x(i) = lc.h(j) / s;
    lam(j) = std::max(0.0, -s * g(i));
  }
  OracleSolution sol{x, qp_certificate(Q, c, lc, x, lam, Vector::Zero(0)), "projected_gradient", k};
  if (sol.certificate.worst() > kCertificateTolerance) {
    throw OracleError("qp_oracle: projected-gradient certificate " +
                      std::to_string(sol.certificate.worst()) + " exceeds tolerance");
  }
  return sol;
}

// Next subset with the same popcount (Gosper).
std::uint32_t next_combination(std::uint32_t v) {
  const std::uint32_t t = v | (v - 1);
  return (t + 1) | (((~t & -~t) - 1) >> (__builtin_ctz(v) + 1));
}

}  // namespace

OracleSolution qp_oracle(const Matrix& Q, const Vector& c, const QPConstraints& cons) {
  const Index n = Q.rows();
  if (Q.cols() != n || c.size() != n) throw DimensionError("qp_oracle: Q and c sizes differ");
  if ((Q - Q.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(1.0, Q.cwiseAbs().maxCoeff()) ||
      !(min_symmetric_eigenvalue(Q) > 0.0)) {
    throw InvalidArgument("qp_oracle: Q must be symmetric positive definite");
  }
  const LinearConstraints lc = linearize(cons, n);
  const Index p = lc.G.rows();
  const Index me = lc.A.rows();
  if (p > kMaxEnumerated) {
    if (!cons.halfspaces.empty() || !cons.affine.empty()) {
      throw OracleError("qp_oracle: enumeration budget exceeded (" + std::to_string(p) +
                        " inequalities)");
    }
    return qp_projected_gradient(Q, c, cons, lc);
  }
  const double tol_f = 1e-10 * std::max({1.0, inf_norm(lc.h), inf_norm(lc.b)});

  bool any_feasible = false;
  double best_miss = kInf;
  std::int64_t tried = 0;
  for (Index k = 0; k <= p && me + k <= n; ++k) {
    const std::uint32_t first = k == 0 ? 0u : (1u << k) - 1u;
    const std::uint32_t end = 1u << p;
    for (std::uint32_t S = first; S < end; S = k == 0 ? end : next_combination(S)) {
      ++tried;
      std::vector<Index> act;
      for (Index j = 0; j < p; ++j) {
        if (S & (1u << j)) act.push_back(j);
      }
      const Index me_tot = me + k;
      Matrix E(me_tot, n);
      Vector e(me_tot);
      if (me) {
        E.topRows(me) = lc.A;
        e.head(me) = lc.b;
      }
      for (Index r = 0; r < k; ++r) {
        E.row(me + r) = lc.G.row(act[r]);
        e(me + r) = lc.h(act[r]);
      }
      Matrix K = Matrix::Zero(n + me_tot, n + me_tot);
      K.topLeftCorner(n, n) = Q;
      K.topRightCorner(n, me_tot) = E.transpose();
      K.bottomLeftCorner(me_tot, n) = E;
      Vector rhs(n + me_tot);
      rhs << -c, e;
      Eigen::FullPivLU<Matrix> lu(K);
      if (!lu.isInvertible()) continue;
      Vector sol = lu.solve(rhs);
      sol += lu.solve(rhs - K * sol);
      const Vector x = sol.head(n);
      Vector lam = Vector::Zero(p);
      for (Index r = 0; r < k; ++r) lam(act[r]) = sol(n + me + r);
      const Vector nu = sol.segment(n, me);
      if (p && ((lc.G * x - lc.h).array() > tol_f).any()) continue;
      any_feasible = true;
      if (k && lam.minCoeff() < -1e-10 * std::max(1.0, inf_norm(c))) continue;
      const Certificate cert = qp_certificate(Q, c, lc, x, lam, nu);
      if (cert.worst() <= kCertificateTolerance) {
        return {x, cert, k == 0 && me == 0 ? "unconstrained" : "active_set", tried};
      }
      best_miss = std::min(best_miss, cert.worst());
    }
  }
  if (!any_feasible) throw OracleError("qp_oracle: infeasible set");
  throw OracleError("qp_oracle: no active set met the certificate tolerance (best " +
                    std::to_string(best_miss) + ")");
}

// ---------------------------------------------------------------------------

namespace {

// One-sided derivatives of s -> weight phi(s) + (s - t)^2/2.
struct Slopes {
  double left;
  double right;
};

Slopes slopes(const ScalarFunction& phi, double weight, double t, double s) {
  double l = s - t;
  double r = s - t;
  if (const auto* a = std::get_if<AbsValue>(&phi)) {
    l += weight * a->weight * (s > 0.0 ? 1.0 : -1.0);
    r += weight * a->weight * (s >= 0.0 ? 1.0 : -1.0);
  } else if (const auto* u = std::get_if<UpperBound>(&phi)) {
    if (s >= u->bound) r = kInf;
  } else {
    const auto& q = std::get<ScalarQuadratic>(phi);
    l += weight * (q.a * s + q.b);
    r += weight * (q.a * s + q.b);
  }
  return {l, r};
}

double objective(const ScalarFunction& phi, double weight, double t, double s) {
  const double v = evaluate(phi, s);
  return std::isinf(v) ? kInf : weight * v + 0.5 * (s - t) * (s - t);
}

}  // namespace

double scalar_prox_oracle(const ScalarFunction& phi, double weight, double t) {
  if (!(weight > 0.0)) throw InvalidArgument("scalar_prox_oracle: weight must be positive");
  double reach = 1.0 + 2.0 * std::abs(t);
  if (const auto* a = std::get_if<AbsValue>(&phi)) reach += weight * std::abs(a->weight);
  if (const auto* q = std::get_if<ScalarQuadratic>(&phi)) reach += weight * std::abs(q->b);
  double lo = t - reach;
  double hi = t + reach;
  if (const auto* u = std::get_if<UpperBound>(&phi)) {
    hi = std::min(hi, u->bound);
    lo = std::min(lo, u->bound - 1.0);
  }

  // Grid bracket.
  constexpr int kGrid = 2000;
  int best = 0;
  double fbest = kInf;
  for (int k = 0; k <= kGrid; ++k) {
    const double s = lo + (hi - lo) * k / kGrid;
    const double f = objective(phi, weight, t, s);
    if (f < fbest) {
      fbest = f;
      best = k;
    }
  }
  double a = lo + (hi - lo) * std::max(0, best - 1) / kGrid;
  double b = lo + (hi - lo) * std::min(kGrid, best + 1) / kGrid;

  // Golden section down to 1e-12 relative width.
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a);
  double d = a + g * (b - a);
  double fc = objective(phi, weight, t, c);
  double fd = objective(phi, weight, t, d);
  while (b - a > 1e-12 * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = objective(phi, weight, t, c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = objective(phi, weight, t, d);
    }
  }

  // Function values stop resolving s near the minimum; finish on the
  // monotone slopes, widening the bracket if golden section stopped short.
  double step = std::max(1e-12, b - a);
  while (slopes(phi, weight, t, a).right > 0.0 && a > lo) {
    a = std::max(lo, a - step);
    step *= 2.0;
  }
  step = std::max(1e-12, b - a);
  while (slopes(phi, weight, t, b).left < 0.0 && b < hi) {
    b = std::min(hi, b + step);
    step *= 2.0;
  }
  for (int it = 0; it < 200; ++it) {
    const double m = 0.5 * (a + b);
    if (m <= a || m >= b) break;
    const Slopes sl = slopes(phi, weight, t, m);
    if (sl.left <= 0.0 && sl.right >= 0.0) return m;
    if (sl.right < 0.0) {
      a = m;
    } else {
      b = m;
    }
  }
  const Slopes sa = slopes(phi, weight, t, a);
  if (sa.left <= 0.0 && sa.right >= 0.0) return a;
  const Slopes sb = slopes(phi, weight, t, b);
  if (sb.left <= 0.0 && sb.right >= 0.0) return b;
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------

std::vector<Vector> classical_fb_iterates(const FBProblem& problem, double gamma, const Vector& x0,
                                          std::int64_t iterations) {
  require_same_dim(problem.A.dim(), x0.size(), "classical_fb_iterates");
  const Metric Id = Metric::identity(x0.size());
  std::vector<Vector> xs{x0};
  xs.reserve(static_cast<std::size_t>(iterations) + 1);
  Vector x = x0;
  for (std::int64_t n = 0; n < iterations; ++n) {
    x = problem.A.resolvent(gamma, Id, x - gamma * problem.B(x));
    xs.push_back(x);
  }
  return xs;
}

OracleSolution reference_fb(const FBProblem& problem, double gamma, const Vector& x0,
                            std::int64_t iterations) {
  require_same_dim(problem.A.dim(), x0.size(), "reference_fb");
  require_same_dim(problem.B.dim, x0.size(), "reference_fb");
  const double beta = problem.B.beta;
  if (!(gamma > 0.0) || (std::isfinite(beta) && !(gamma < 2.0 * beta))) {
    throw InvalidArgument("reference_fb: gamma must lie in ]0, 2 beta[");
  }
  const Metric Id = Metric::identity(x0.size());
  auto step = [&](const Vector& x) { return problem.A.resolvent(gamma, Id, x - gamma * problem.B(x)); };
  Vector x = x0;
  std::int64_t n = 0;
  for (; n < iterations; ++n) {
    const Vector next = step(x);
    const double moved = (next - x).norm();
    x = next;
    if (moved <= 1e-12 * std::max(1.0, x.norm())) break;
  }
  // Certificate from scratch at the returned point.
  Certificate cert;
  cert.stationarity = (step(x) - x).norm();
  if (cert.stationarity > kCertificateTolerance) {
    throw OracleError("reference_fb: residual " + std::to_string(cert.stationarity) +
                      " above tolerance after " + std::to_string(n) + " iterations");
  }
  return {x, cert, "classical_fb", n};
}

std::vector<Vector> fixed_metric_pd_iterates(const CocoerciveProblem& p, double tau,
                                             const std::vector<double>& sigma, const Vector& x0,
                                             const std::vector<Vector>& v0,
                                             std::int64_t iterations) {
  const std::size_t m = p.blocks.size();
  if (sigma.size() != m || v0.size() != m) throw DimensionError("fixed_metric_pd_iterates: blocks");
  const Index n = p.z.size();
  const Metric Id = Metric::identity(n);
  std::vector<Metric> Idi;
  Index total = n;
  for (const auto& b : p.blocks) {
    Idi.push_back(Metric::identity(b.L.rows()));
    total += b.L.rows();
  }
  auto stack = [&](const Vector& x, const std::vector<Vector>& v) {
    Vector s(total);
    s.head(n) = x;
    Index off = n;
    for (const auto& vi : v) {
      s.segment(off, vi.size()) = vi;
      off += vi.size();
    }
    return s;
  };
  Vector x = x0;
  std::vector<Vector> v = v0;
  std::vector<Vector> out{stack(x, v)};
  for (std::int64_t k = 0; k < iterations; ++k) {
    Vector g = p.C(x) - p.z;
    for (std::size_t i = 0; i < m; ++i) g += p.blocks[i].L.matrix.transpose() * v[i];
    const Vector pk = p.A.resolvent(tau, Id, x - tau * g);
    const Vector y = 2.0 * pk - x;
    for (std::size_t i = 0; i < m; ++i) {
      const auto& b = p.blocks[i];
      const double s = sigma[i];
      const Vector w = v[i] + s * (b.L.matrix * y - b.Dinv(v[i]) - b.r);
      v[i] = w - s * b.B.resolvent(1.0 / s, Idi[i], w / s);
    }
    x = pk;
    out.push_back(stack(x, v));
  }
  return out;
}

}  // namespace vmfb
