/*
 * Closed-form projections and proximity operators relative to a metric.
 *
 *   project_metric(C, U, x)   = argmin_{y in C} ||x - y||_U
 *   prox_metric(f, g, U, x)   = argmin_y  g f(y) + 1/2 ||x - y||_U^2
 *
 * The scale g multiplies f inside the prox; it is never applied to the metric.
 * Descriptors outside the catalog, or catalog members whose prox is not
 * closed-form under the given metric (l1/box under a non-diagonal metric),
 * raise UnsupportedOperation.
 */
#pragma once

#include "vmfb/metric.hpp"

#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace vmfb {

// ---------------------------------------------------------------------------
// Closed convex sets

/// {x : <x, normal> <= offset}
struct HalfSpace {
  Vector normal;
  double offset = 0.0;
};

/// {x : lower <= x <= upper}; bounds may be infinite.
struct Box {
  Vector lower;
  Vector upper;
};

/// {x : A x = b}, A of full row rank.
struct AffineSet {
  Matrix A;
  Vector b;
};

/// {x : ||x - center|| <= radius}
struct Ball {
  Vector center;
  double radius = 1.0;
};

struct Singleton {
  Vector point;
};

struct WholeSpace {
  Index dim = 0;
};

using ConvexSet = std::variant<HalfSpace, Box, AffineSet, Ball, Singleton, WholeSpace>;

Index set_dim(const ConvexSet& C);
std::string set_name(const ConvexSet& C);
/// Feasibility test with absolute tolerance `tol` (scaled by the data).
bool contains(const ConvexSet& C, const Vector& x, double tol = 1e-9);
void validate_set(const ConvexSet& C);

/// P_C^U(x).
Vector project_metric(const ConvexSet& C, const Metric& U, const Vector& x);

/// prox^U_{gamma sigma_C}(x) = x - gamma U^{-1} P_C^{U^{-1}}(gamma^{-1} U x).
Vector support_prox_metric(const ConvexSet& C, double gamma, const Metric& U, const Vector& x);

/// Solves (U + Aq) p = U x - u, i.e. the prox in metric U of
/// y -> <Aq y, y>/2 + <u, y>.
Vector prox_quadratic_metric(const Matrix& Aq, const Vector& u, const Metric& U, const Vector& x);

// ---------------------------------------------------------------------------
// Functions with closed-form proxes

/// Scalar functions phi used in compositions phi(<., u>).
struct AbsValue {
  double weight = 1.0;
};
/// Indicator of ]-inf, bound].
struct UpperBound {
  double bound = 0.0;
};
/// s -> a s^2 / 2 + b s, a >= 0.
struct ScalarQuadratic {
  double a = 1.0;
  double b = 0.0;
};
using ScalarFunction = std::variant<AbsValue, UpperBound, ScalarQuadratic>;

double evaluate(const ScalarFunction& phi, double s);
/// argmin_s weight * phi(s) + (s - t)^2 / 2.
double scalar_prox(const ScalarFunction& phi, double weight, double t);

struct ZeroFunction {
  Index dim = 0;
};
struct Indicator {
  ConvexSet set;
};
/// Support function sigma_C.
struct Support {
  ConvexSet set;
};
/// x -> sum_i w_i |x_i|, w >= 0.
struct L1Norm {
  Vector weights;
};
/// x -> <Q x, x>/2 + <q, x> + c, Q symmetric positive semidefinite.
struct Quadratic {
  Matrix Q;
  Vector q;
  double c = 0.0;
};
/// x -> phi(<x, u>), u != 0.
struct ScalarComposition {
  Vector u;
  ScalarFunction phi;
};

using Function = std::variant<ZeroFunction, Indicator, Support, L1Norm, Quadratic, ScalarComposition>;

Index function_dim(const Function& f);
std::string function_name(const Function& f);
void validate_function(const Function& f);

/// f(x); +infinity outside the domain (indicator tests use `tol`).
double evaluate(const Function& f, const Vector& x, double tol = 1e-9);

/// Fenchel conjugate when it lies in the catalog.
std::optional<Function> conjugate(const Function& f);

/// f o S for a symmetric positive definite S, when it stays in the catalog.
/// Throws UnsupportedOperation otherwise.
Function precompose(const Function& f, const Metric& S);

/// prox^U_{gamma f}(x).
Vector prox_metric(const Function& f, double gamma, const Metric& U, const Vector& x);

}  // namespace vmfb
