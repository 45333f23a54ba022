#include "vmfb/prox.hpp"

#include "overloaded.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vmfb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using detail::overloaded;

double soft(double t, double thresh) {
  if (t > thresh) return t - thresh;
  if (t < -thresh) return t + thresh;
  return 0.0;
}

// Projection onto {y : ||y - c|| <= r} in the norm of a general metric. In the
// eigenbasis of U, the minimizer is c + Q diag(l / (l + theta)) Q^T (x - c)
// where theta > 0 solves ||diag(l / (l + theta)) e|| = r.
Vector project_ball_general(const Ball& B, const Metric& U, const Vector& x) {
  const Vector d = x - B.center;
  const Matrix& Q = U.eigenvectors();
  const Vector& l = U.eigenvalues();
  const Vector e = Q.transpose() * d;
  auto radius_at = [&](double theta) {
    return (l.array() / (l.array() + theta) * e.array()).matrix().norm();
  };
  double lo = 0.0;
  double hi = l.maxCoeff() * e.norm() / B.radius;
  for (int it = 0; it < 400 && hi - lo > 1e-17 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (radius_at(mid) > B.radius) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const Vector y = (l.array() / (l.array() + hi) * e.array()).matrix();
  return B.center + Q * y;
}

// {S c : c in C} for a symmetric positive definite S.
ConvexSet image(const ConvexSet& C, const Metric& S) {
  return std::visit(
      overloaded{
          [&](const HalfSpace& h) -> ConvexSet {
            return HalfSpace{S.apply_inverse(h.normal), h.offset};
          },
          [&](const Box& b) -> ConvexSet {
            if (!S.is_diagonal()) {
              throw UnsupportedOperation("box: image under a non-diagonal map leaves the catalog");
            }
            return Box{b.lower.cwiseProduct(S.eigenvalues()), b.upper.cwiseProduct(S.eigenvalues())};
          },
          [&](const AffineSet& a) -> ConvexSet {
            Matrix AS(a.A.rows(), a.A.cols());
            for (Index i = 0; i < a.A.rows(); ++i) {
              AS.row(i) = S.apply_inverse(a.A.row(i).transpose()).transpose();
            }
            return AffineSet{AS, a.b};
          },
          [&](const Ball& b) -> ConvexSet {
            if (!S.is_scalar()) {
              throw UnsupportedOperation("ball: image under a non-scalar map leaves the catalog");
            }
            const double s = S.eigenvalues()(0);
            return Ball{s * b.center, s * b.radius};
          },
          [&](const Singleton& p) -> ConvexSet { return Singleton{S.apply(p.point)}; },
          [&](const WholeSpace& w) -> ConvexSet { return w; },
      },
      C);
}

double support_value(const ConvexSet& C, const Vector& x, double tol) {
  return std::visit(
      overloaded{
          [&](const HalfSpace& h) {
            const double t = x.dot(h.normal) / h.normal.squaredNorm();
            const double off = (x - t * h.normal).norm();
            if (off > tol * std::max(1.0, x.norm()) || t < -tol) return kInf;
            return h.offset * std::max(t, 0.0);
          },
          [&](const Box& b) {
            double s = 0.0;
            for (Index i = 0; i < x.size(); ++i) {
              const double bound = x(i) >= 0.0 ? b.upper(i) : b.lower(i);
              if (std::isinf(bound)) {
                if (std::abs(x(i)) <= tol) continue;
                return kInf;
              }
              s += bound * x(i);
            }
            return s;
          },
          [&](const AffineSet& a) {
            // Finite only on the row space of A.
            const Vector lambda = (a.A * a.A.transpose()).ldlt().solve(a.A * x);
            const double off = (x - a.A.transpose() * lambda).norm();
            if (off > tol * std::max(1.0, x.norm())) return kInf;
            return a.b.dot(lambda);
          },
          [&](const Ball& b) { return b.center.dot(x) + b.radius * x.norm(); },
          [&](const Singleton& p) { return p.point.dot(x); },
          [&](const WholeSpace&) { return x.norm() <= tol ? 0.0 : kInf; },
      },
      C);
}

void require_finite_vec(const Vector& v, const char* what) {
  if (!v.allFinite()) throw InvalidArgument(std::string(what) + ": non-finite entry");
}

}  // namespace

Index set_dim(const ConvexSet& C) {
  return std::visit(overloaded{
                        [](const HalfSpace& h) { return h.normal.size(); },
                        [](const Box& b) { return b.lower.size(); },
                        [](const AffineSet& a) { return a.A.cols(); },
                        [](const Ball& b) { return b.center.size(); },
                        [](const Singleton& p) { return p.point.size(); },
                        [](const WholeSpace& w) { return w.dim; },
                    },
                    C);
}

std::string set_name(const ConvexSet& C) {
  return std::visit(overloaded{
                        [](const HalfSpace&) { return std::string("halfspace"); },
                        [](const Box&) { return std::string("box"); },
                        [](const AffineSet&) { return std::string("affine"); },
                        [](const Ball&) { return std::string("ball"); },
                        [](const Singleton&) { return std::string("singleton"); },
                        [](const WholeSpace&) { return std::string("whole_space"); },
                    },
                    C);
}

void validate_set(const ConvexSet& C) {
  std::visit(
      overloaded{
          [](const HalfSpace& h) {
            if (h.normal.size() == 0) throw InvalidArgument("halfspace: empty normal");
            require_finite_vec(h.normal, "halfspace normal");
            if (h.normal.norm() == 0.0) throw InvalidArgument("halfspace: zero normal");
            if (!std::isfinite(h.offset)) throw InvalidArgument("halfspace: non-finite offset");
          },
          [](const Box& b) {
            require_same_dim(b.lower.size(), b.upper.size(), "box");
            if (b.lower.size() == 0) throw InvalidArgument("box: empty bounds");
            for (Index i = 0; i < b.lower.size(); ++i) {
              if (std::isnan(b.lower(i)) || std::isnan(b.upper(i)) || b.lower(i) > b.upper(i) ||
                  b.lower(i) == kInf || b.upper(i) == -kInf) {
                throw InvalidArgument("box: empty or invalid bounds at index " + std::to_string(i));
              }
            }
          },
          [](const AffineSet& a) {
            require_same_dim(a.A.rows(), a.b.size(), "affine");
            if (a.A.size() == 0) throw InvalidArgument("affine: empty matrix");
            if (!a.A.allFinite()) throw InvalidArgument("affine: non-finite matrix");
            require_finite_vec(a.b, "affine rhs");
            Eigen::FullPivLU<Matrix> lu(a.A);
            if (lu.rank() < a.A.rows()) {
              throw InvalidArgument("affine: matrix does not have full row rank");
            }
          },
          [](const Ball& b) {
            if (b.center.size() == 0) throw InvalidArgument("ball: empty center");
            require_finite_vec(b.center, "ball center");
            if (!(b.radius > 0.0) || !std::isfinite(b.radius)) {
              throw InvalidArgument("ball: radius must be positive and finite");
            }
          },
          [](const Singleton& p) {
            if (p.point.size() == 0) throw InvalidArgument("singleton: empty point");
            require_finite_vec(p.point, "singleton");
          },
          [](const WholeSpace& w) {
            if (w.dim <= 0) throw InvalidArgument("whole_space: dimension must be positive");
          },
      },
      C);
}

bool contains(const ConvexSet& C, const Vector& x, double tol) {
  require_same_dim(set_dim(C), x.size(), "contains");
  return std::visit(
      overloaded{
          [&](const HalfSpace& h) {
            const double scale = std::max({1.0, std::abs(h.offset), h.normal.norm() * x.norm()});
            return x.dot(h.normal) <= h.offset + tol * scale;
          },
          [&](const Box& b) {
            for (Index i = 0; i < x.size(); ++i) {
              const double lo = b.lower(i), hi = b.upper(i);
              if (std::isfinite(lo) && x(i) < lo - tol * std::max(1.0, std::abs(lo))) return false;
              if (std::isfinite(hi) && x(i) > hi + tol * std::max(1.0, std::abs(hi))) return false;
            }
            return true;
          },
          [&](const AffineSet& a) {
            const double scale = std::max(1.0, a.b.norm() + a.A.norm() * x.norm());
            return (a.A * x - a.b).norm() <= tol * scale;
          },
          [&](const Ball& b) {
            return (x - b.center).norm() <= b.radius + tol * std::max(1.0, b.radius);
          },
          [&](const Singleton& p) {
            return (x - p.point).norm() <= tol * std::max(1.0, p.point.norm());
          },
          [&](const WholeSpace&) { return true; },
      },
      C);
}

Vector project_metric(const ConvexSet& C, const Metric& U, const Vector& x) {
  require_same_dim(set_dim(C), x.size(), "project_metric");
  require_same_dim(U.dim(), x.size(), "project_metric");
  return std::visit(
      overloaded{
          [&](const HalfSpace& h) -> Vector {
            const double s = x.dot(h.normal);
            if (s <= h.offset) return x;
            const Vector w = U.apply_inverse(h.normal);
            return x + ((h.offset - s) / h.normal.dot(w)) * w;
          },
          [&](const Box& b) -> Vector {
            if (!U.is_diagonal()) {
              if (contains(C, x, 0.0)) return x;
              throw UnsupportedOperation("box projection requires a diagonal metric");
            }
            return x.cwiseMax(b.lower).cwiseMin(b.upper);
          },
          [&](const AffineSet& a) -> Vector {
            Matrix W(a.A.cols(), a.A.rows());
            for (Index i = 0; i < a.A.rows(); ++i) {
              W.col(i) = U.apply_inverse(a.A.row(i).transpose());
            }
            const Matrix G = a.A * W;
            Eigen::LLT<Matrix> llt(0.5 * (G + G.transpose()));
            if (llt.info() != Eigen::Success) {
              throw FactorizationError("affine projection: A U^{-1} A^T is singular");
            }
            return x - W * llt.solve(a.A * x - a.b);
          },
          [&](const Ball& b) -> Vector {
            const Vector d = x - b.center;
            const double r = d.norm();
            if (r <= b.radius) return x;
            if (U.is_scalar()) return b.center + (b.radius / r) * d;
            return project_ball_general(b, U, x);
          },
          [&](const Singleton& p) -> Vector { return p.point; },
          [&](const WholeSpace&) -> Vector { return x; },
      },
      C);
}

Vector support_prox_metric(const ConvexSet& C, double gamma, const Metric& U, const Vector& x) {
  if (!(gamma > 0.0)) throw InvalidArgument("support_prox_metric: gamma must be > 0");
  const Metric Uinv = U.inverse();
  const Vector p = project_metric(C, Uinv, U.apply(x) / gamma);
  return x - gamma * U.apply_inverse(p);
}

Vector prox_quadratic_metric(const Matrix& Aq, const Vector& u, const Metric& U, const Vector& x) {
  require_same_dim(U.dim(), x.size(), "prox_quadratic_metric");
  require_same_dim(Aq.rows(), x.size(), "prox_quadratic_metric");
  require_same_dim(Aq.cols(), x.size(), "prox_quadratic_metric");
  require_same_dim(u.size(), x.size(), "prox_quadratic_metric");
  const Matrix K = U.matrix() + 0.5 * (Aq + Aq.transpose());
  const Vector rhs = U.apply(x) - u;
  Eigen::LLT<Matrix> llt(K);
  if (llt.info() != Eigen::Success) {
    throw FactorizationError("prox_quadratic_metric: U + A is not positive definite");
  }
  Vector p = llt.solve(rhs);
  // One step of iterative refinement keeps the relative residual near eps.
  p += llt.solve(rhs - K * p);
  return p;
}

double evaluate(const ScalarFunction& phi, double s) {
  return std::visit(overloaded{
                        [&](const AbsValue& a) { return a.weight * std::abs(s); },
                        [&](const UpperBound& u) {
                          const double slack = 1e-12 * std::max(1.0, std::abs(u.bound));
                          return s <= u.bound + slack ? 0.0 : kInf;
                        },
                        [&](const ScalarQuadratic& q) { return 0.5 * q.a * s * s + q.b * s; },
                    },
                    phi);
}

double scalar_prox(const ScalarFunction& phi, double weight, double t) {
  if (!(weight > 0.0)) throw InvalidArgument("scalar_prox: weight must be > 0");
  return std::visit(overloaded{
                        [&](const AbsValue& a) { return soft(t, weight * a.weight); },
                        [&](const UpperBound& u) { return std::min(t, u.bound); },
                        [&](const ScalarQuadratic& q) { return (t - weight * q.b) / (1.0 + weight * q.a); },
                    },
                    phi);
}

Index function_dim(const Function& f) {
  return std::visit(overloaded{
                        [](const ZeroFunction& z) { return z.dim; },
                        [](const Indicator& i) { return set_dim(i.set); },
                        [](const Support& s) { return set_dim(s.set); },
                        [](const L1Norm& l) { return l.weights.size(); },
                        [](const Quadratic& q) { return q.q.size(); },
                        [](const ScalarComposition& s) { return s.u.size(); },
                    },
                    f);
}

std::string function_name(const Function& f) {
  return std::visit(overloaded{
                        [](const ZeroFunction&) { return std::string("zero"); },
                        [](const Indicator& i) { return "indicator(" + set_name(i.set) + ")"; },
                        [](const Support& s) { return "support(" + set_name(s.set) + ")"; },
                        [](const L1Norm&) { return std::string("l1"); },
                        [](const Quadratic&) { return std::string("quadratic"); },
                        [](const ScalarComposition& s) {
                          const char* names[] = {"abs", "upper_bound", "quadratic"};
                          return std::string("scalar_composition(") + names[s.phi.index()] + ")";
                        },
                    },
                    f);
}

void validate_function(const Function& f) {
  std::visit(
      overloaded{
          [](const ZeroFunction& z) {
            if (z.dim <= 0) throw InvalidArgument("zero function: dimension must be positive");
          },
          [](const Indicator& i) { validate_set(i.set); },
          [](const Support& s) { validate_set(s.set); },
          [](const L1Norm& l) {
            if (l.weights.size() == 0) throw InvalidArgument("l1: empty weights");
            require_finite_vec(l.weights, "l1 weights");
            if (l.weights.minCoeff() < 0.0) throw InvalidArgument("l1: negative weight");
          },
          [](const Quadratic& q) {
            require_same_dim(q.Q.rows(), q.q.size(), "quadratic");
            require_same_dim(q.Q.cols(), q.q.size(), "quadratic");
            if (q.q.size() == 0) throw InvalidArgument("quadratic: empty");
            if (!q.Q.allFinite() || !q.q.allFinite() || !std::isfinite(q.c)) {
              throw InvalidArgument("quadratic: non-finite data");
            }
            const double scale = std::max(1.0, q.Q.norm());
            if ((q.Q - q.Q.transpose()).norm() > kSymmetryTolerance * scale) {
              throw InvalidArgument("quadratic: Q is not symmetric");
            }
            if (min_symmetric_eigenvalue(q.Q) < -1e-12 * scale) {
              throw InvalidArgument("quadratic: Q is not positive semidefinite");
            }
          },
          [](const ScalarComposition& s) {
            if (s.u.size() == 0) throw InvalidArgument("scalar composition: empty u");
            require_finite_vec(s.u, "scalar composition u");
            if (s.u.norm() == 0.0) throw InvalidArgument("scalar composition: u = 0");
            std::visit(overloaded{
                           [](const AbsValue& a) {
                             if (!(a.weight >= 0.0) || !std::isfinite(a.weight)) {
                               throw InvalidArgument("abs: weight must be >= 0");
                             }
                           },
                           [](const UpperBound& u) {
                             if (!std::isfinite(u.bound)) throw InvalidArgument("upper_bound: non-finite");
                           },
                           [](const ScalarQuadratic& q) {
                             if (!(q.a >= 0.0) || !std::isfinite(q.a) || !std::isfinite(q.b)) {
                               throw InvalidArgument("scalar quadratic: need a >= 0, finite b");
                             }
                           },
                       },
                       s.phi);
          },
      },
      f);
}

double evaluate(const Function& f, const Vector& x, double tol) {
  require_same_dim(function_dim(f), x.size(), "evaluate");
  return std::visit(overloaded{
                        [&](const ZeroFunction&) { return 0.0; },
                        [&](const Indicator& i) { return contains(i.set, x, tol) ? 0.0 : kInf; },
                        [&](const Support& s) { return support_value(s.set, x, tol); },
                        [&](const L1Norm& l) { return l.weights.dot(x.cwiseAbs()); },
                        [&](const Quadratic& q) { return 0.5 * x.dot(q.Q * x) + q.q.dot(x) + q.c; },
                        [&](const ScalarComposition& s) { return evaluate(s.phi, x.dot(s.u)); },
                    },
                    f);
}

std::optional<Function> conjugate(const Function& f) {
  return std::visit(
      overloaded{
          [](const ZeroFunction& z) -> std::optional<Function> {
            return Indicator{Singleton{Vector::Zero(z.dim)}};
          },
          [](const Indicator& i) -> std::optional<Function> { return Support{i.set}; },
          [](const Support& s) -> std::optional<Function> { return Indicator{s.set}; },
          [](const L1Norm& l) -> std::optional<Function> {
            return Indicator{Box{-l.weights, l.weights}};
          },
          [](const Quadratic& q) -> std::optional<Function> {
            if (q.Q.norm() == 0.0) {
              // <q, .> + c has conjugate iota_{q} - c; only c = 0 is in the catalog.
              if (q.c != 0.0) return std::nullopt;
              return Indicator{Singleton{q.q}};
            }
            Eigen::LLT<Matrix> llt(q.Q);
            if (llt.info() != Eigen::Success) return std::nullopt;
            if (min_symmetric_eigenvalue(q.Q) <= 1e-12 * q.Q.norm()) return std::nullopt;
            const Index n = q.q.size();
            Matrix Qi = llt.solve(Matrix::Identity(n, n));
            Qi = 0.5 * (Qi + Qi.transpose()).eval();
            const Vector Qiq = Qi * q.q;
            return Quadratic{Qi, -Qiq, 0.5 * q.q.dot(Qiq) - q.c};
          },
          [](const ScalarComposition&) -> std::optional<Function> { return std::nullopt; },
      },
      f);
}

Function precompose(const Function& f, const Metric& S) {
  require_same_dim(function_dim(f), S.dim(), "precompose");
  return std::visit(
      overloaded{
          [&](const ZeroFunction& z) -> Function { return z; },
          // {y : S y in C} is the image of C under S^{-1}.
          [&](const Indicator& i) -> Function { return Indicator{image(i.set, S.inverse())}; },
          // sigma_C(S y) = sigma_{S C}(y) since S is symmetric.
          [&](const Support& s) -> Function { return Support{image(s.set, S)}; },
          [&](const L1Norm& l) -> Function {
            if (!S.is_diagonal()) {
              throw UnsupportedOperation("l1: composition with a non-diagonal map leaves the catalog");
            }
            return L1Norm{l.weights.cwiseProduct(S.eigenvalues())};
          },
          [&](const Quadratic& q) -> Function {
            const Matrix& M = S.matrix();
            Matrix SQS = M * q.Q * M;
            SQS = 0.5 * (SQS + SQS.transpose()).eval();
            return Quadratic{SQS, S.apply(q.q), q.c};
          },
          [&](const ScalarComposition& s) -> Function {
            return ScalarComposition{S.apply(s.u), s.phi};
          },
      },
      f);
}

Vector prox_metric(const Function& f, double gamma, const Metric& U, const Vector& x) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument("prox_metric: gamma must be positive and finite");
  }
  require_same_dim(function_dim(f), x.size(), "prox_metric");
  require_same_dim(U.dim(), x.size(), "prox_metric");
  return std::visit(
      overloaded{
          [&](const ZeroFunction&) -> Vector { return x; },
          [&](const Indicator& i) -> Vector { return project_metric(i.set, U, x); },
          [&](const Support& s) -> Vector { return support_prox_metric(s.set, gamma, U, x); },
          [&](const L1Norm& l) -> Vector {
            if (!U.is_diagonal()) {
              throw UnsupportedOperation("l1 prox requires a diagonal metric");
            }
            const Vector& d = U.eigenvalues();
            Vector p(x.size());
            for (Index i = 0; i < x.size(); ++i) p(i) = soft(x(i), gamma * l.weights(i) / d(i));
            return p;
          },
          [&](const Quadratic& q) -> Vector {
            return prox_quadratic_metric(gamma * q.Q, gamma * q.q, U, x);
          },
          [&](const ScalarComposition& s) -> Vector {
            const Vector w = U.apply_inverse(s.u);
            const double kappa = s.u.dot(w);
            const double t = x.dot(s.u);
            return x + ((scalar_prox(s.phi, kappa * gamma, t) - t) / kappa) * w;
          },
      },
      f);
}

}  // namespace vmfb
