#include "doctest.h"
#include "testkit.hpp"

#include "vmfb/oracles.hpp"

#include <cmath>

using namespace vmfb;
using testkit::Rng;

namespace {

Box cube(Index n, double lo, double hi) { return {Vector::Constant(n, lo), Vector::Constant(n, hi)}; }

// KKT residuals recomputed from the data alone, with multipliers fitted by
// least squares on the active rows.
double independent_kkt(const Matrix& Q, const Vector& c, const QPConstraints& cons, const Vector& x) {
  const LinearConstraints lc = linearize(cons, x.size());
  double feas = 0.0;
  std::vector<Index> active;
  for (Index j = 0; j < lc.G.rows(); ++j) {
    const double s = lc.G.row(j).dot(x) - lc.h(j);
    feas = std::max(feas, s);
    if (s > -1e-9) active.push_back(j);
  }
  if (lc.A.rows()) feas = std::max(feas, (lc.A * x - lc.b).cwiseAbs().maxCoeff());
  const Index k = static_cast<Index>(active.size()) + lc.A.rows();
  const Vector g = Q * x + c;
  if (k == 0) return std::max(feas, g.cwiseAbs().maxCoeff());
  Matrix E(x.size(), k);
  for (std::size_t r = 0; r < active.size(); ++r) E.col(static_cast<Index>(r)) = lc.G.row(active[r]).transpose();
  if (lc.A.rows()) E.rightCols(lc.A.rows()) = lc.A.transpose();
  const Vector mult = E.completeOrthogonalDecomposition().solve(-g);
  double dual = 0.0;
  for (std::size_t r = 0; r < active.size(); ++r) dual = std::max(dual, -mult(static_cast<Index>(r)));
  return std::max({feas, dual, (g + E * mult).cwiseAbs().maxCoeff()});
}

}  // namespace

TEST_CASE("qp oracle closed forms") {
  Rng rng(1);
  SUBCASE("box clamp") {
    const Vector z = rng.vector(6, 2.0);
    QPConstraints cons;
    cons.boxes.push_back(cube(6, 0.0, 1.0));
    const OracleSolution s = qp_oracle(Matrix::Identity(6, 6), -z, cons);
    CHECK((s.point - z.cwiseMax(0.0).cwiseMin(1.0)).norm() < 1e-12);
    CHECK(s.certificate.worst() <= kCertificateTolerance);
  }
  SUBCASE("unconstrained") {
    const Matrix Q = rng.spd(5, 0.5, 3.0);
    const Vector c = rng.vector(5);
    const OracleSolution s = qp_oracle(Q, c, {});
    CHECK((s.point + Q.inverse() * c).norm() < 1e-12);
    CHECK(s.method == "unconstrained");
  }
  SUBCASE("half-space prox instance") {
    // min ||y - x||_U^2 / 2 over y1 + y2 <= 1, U = diag(2, 1), x = (2, 2).
    const Matrix U = Vector{{2.0, 1.0}}.asDiagonal();
    const Vector x{{2.0, 2.0}};
    QPConstraints cons;
    cons.halfspaces.push_back({Vector{{1.0, 1.0}}, 1.0});
    const OracleSolution s = qp_oracle(U, -U * x, cons);
    CHECK((s.point - Vector{{1.0, 0.0}}).norm() < 1e-12);
    CHECK(s.method == "active_set");
    // The inactive branch is infeasible here and is the answer for x inside.
    CHECK(x.sum() > 1.0);
    const Vector inside{{0.2, -0.5}};
    CHECK((qp_oracle(U, -U * inside, cons).point - inside).norm() < 1e-12);
  }
  SUBCASE("equality constraints") {
    const Matrix A = rng.matrix(2, 4);
    const Vector b = rng.vector(2);
    QPConstraints cons;
    cons.affine.push_back({A, b});
    const Vector z = rng.vector(4);
    const OracleSolution s = qp_oracle(Matrix::Identity(4, 4), -z, cons);
    const Vector hand = z - A.transpose() * (A * A.transpose()).ldlt().solve(A * z - b);
    CHECK((s.point - hand).norm() < 1e-10);
  }
}

TEST_CASE("qp oracle failures") {
  QPConstraints empty;
  empty.halfspaces.push_back({Vector{{1.0, 0.0}}, -1.0});
  empty.halfspaces.push_back({Vector{{-1.0, 0.0}}, -1.0});
  CHECK_THROWS_AS(qp_oracle(Matrix::Identity(2, 2), Vector::Zero(2), empty), OracleError);

  Matrix Q = Matrix::Identity(2, 2);
  Q(1, 1) = 0.0;
  CHECK_THROWS_AS(qp_oracle(Q, Vector::Zero(2), {}), InvalidArgument);
  Q(1, 1) = 1.0;
  Q(0, 1) = 0.5;
  CHECK_THROWS_AS(qp_oracle(Q, Vector::Zero(2), {}), InvalidArgument);

  QPConstraints many;
  for (int k = 0; k < 21; ++k) many.halfspaces.push_back({Vector{{1.0, 0.0}}, 1.0 + k});
  CHECK_THROWS_AS(qp_oracle(Matrix::Identity(2, 2), Vector::Zero(2), many), OracleError);
}

TEST_CASE("large boxes fall back to projected gradient") {
  Rng rng(2);
  const Index n = 15;
  const Matrix Q = rng.spd(n, 0.5, 2.0);
  const Vector c = rng.vector(n, 2.0);
  QPConstraints cons;
  cons.boxes.push_back(cube(n, -0.5, 0.5));
  const OracleSolution s = qp_oracle(Q, c, cons);
  CHECK(s.method == "projected_gradient");
  CHECK(s.certificate.worst() <= kCertificateTolerance);
  CHECK(independent_kkt(Q, c, cons, s.point) <= 1e-9);
}

TEST_CASE("certificates recomputed from scratch") {
  Rng rng(3);
  for (int k = 0; k < 30; ++k) {
    const Index n = rng.integer(2, 6);
    const Matrix Q = rng.spd(n, 0.3, 3.0);
    const Vector c = rng.vector(n, 2.0);
    QPConstraints cons;
    cons.boxes.push_back(cube(n, -1.0, 1.0));
    const Vector u = rng.vector(n);
    cons.halfspaces.push_back({u, 0.3 * u.norm()});
    const OracleSolution s = qp_oracle(Q, c, cons);
    CHECK(independent_kkt(Q, c, cons, s.point) <= 1e-9);
    // Optimality against random feasible points.
    for (int j = 0; j < 50; ++j) {
      Vector y = rng.uniform_vector(n, -1.0, 1.0);
      if (y.dot(u) > 0.3 * u.norm()) continue;
      CHECK(0.5 * s.point.dot(Q * s.point) + c.dot(s.point) <= 0.5 * y.dot(Q * y) + c.dot(y) + 1e-10);
    }
  }
}

TEST_CASE("scalar prox oracle") {
  CHECK(scalar_prox_oracle(AbsValue{1.0}, 1.0, 2.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(scalar_prox_oracle(UpperBound{0.0}, 1.0, 5.0)) < 1e-12);
  CHECK(scalar_prox_oracle(ScalarQuadratic{1.0, 0.0}, 3.0, 4.0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(scalar_prox_oracle(AbsValue{1.0}, 0.0, 1.0), InvalidArgument);

  Rng rng(4);
  for (int k = 0; k < 200; ++k) {
    const double w = rng.uniform(0.1, 5.0);
    const double t = rng.uniform(-10.0, 10.0);
    const double a = rng.uniform(0.0, 3.0);
    const double b = rng.uniform(-2.0, 2.0);
    const double xi = rng.uniform(-3.0, 3.0);
    const double aw = rng.uniform(0.1, 2.0);
    const double soft = t > w * aw ? t - w * aw : (t < -w * aw ? t + w * aw : 0.0);
    CHECK(std::abs(scalar_prox_oracle(AbsValue{aw}, w, t) - soft) <= 1e-10);
    CHECK(std::abs(scalar_prox_oracle(UpperBound{xi}, w, t) - std::min(t, xi)) <= 1e-10);
    CHECK(std::abs(scalar_prox_oracle(ScalarQuadratic{a, b}, w, t) - (t - w * b) / (1.0 + w * a)) <= 1e-10);
  }
}

TEST_CASE("classical forward-backward iterates") {
  Rng rng(5);
  const Index n = 3;
  const Vector c = rng.vector(n);
  const FBProblem p{ResolventOperator::zero(n), CocoerciveOperator::least_squares(Matrix::Identity(n, n), c)};
  // gamma = 1 with A = 0 and B = Id - c lands on c in one step.
  const auto xs = classical_fb_iterates(p, 1.0, rng.vector(n), 3);
  REQUIRE(xs.size() == 4);
  CHECK((xs[1] - c).norm() < 1e-15);
  CHECK((xs[3] - c).norm() < 1e-15);
  const OracleSolution s = reference_fb(p, 1.0, Vector::Zero(n), 10);
  CHECK((s.point - c).norm() < 1e-15);
  CHECK(s.iterations <= 2);

  // A contraction with factor 1/2 on x -> x / 2.
  const FBProblem half{ResolventOperator::zero(n), CocoerciveOperator::affine(Matrix::Identity(n, n), Vector::Zero(n))};
  const Vector x0 = rng.vector(n);
  const auto hs = classical_fb_iterates(half, 0.5, x0, 10);
  CHECK((hs[10] - std::pow(0.5, 10) * x0).norm() < 1e-15);

  CHECK_THROWS_AS(reference_fb(half, 2.5, x0, 10), InvalidArgument);
  CHECK_THROWS_AS(reference_fb(half, 1e-6, x0, 5), OracleError);
}

TEST_CASE("reference forward-backward on fixtures") {
  SUBCASE("lasso certificate") {
    const testkit::FBFixture fx = testkit::lasso_fixture(21);
    const OracleSolution s = reference_fb(fx.problem, fx.problem.B.beta, Vector::Zero(10), 1000000);
    CHECK(s.certificate.stationarity <= 1e-10);
    // Subgradient optimality of the l1 problem, computed from the data.
    const Vector g = fx.problem.B(s.point);
    for (Index i = 0; i < 10; ++i) {
      if (std::abs(s.point(i)) > 1e-9) {
        CHECK(std::abs(g(i) + 0.1 * (s.point(i) > 0 ? 1.0 : -1.0)) <= 1e-8);
      } else {
        CHECK(std::abs(g(i)) <= 0.1 + 1e-8);
      }
    }
  }
  SUBCASE("box-constrained quadratic agrees with the QP oracle") {
    Rng rng(6);
    for (int k = 0; k < 5; ++k) {
      const Index n = 6;
      const Matrix Q = rng.spd(n, 0.5, 2.0);
      const Vector c = rng.vector(n, 2.0);
      const Box box = cube(n, -0.5, 0.5);
      const FBProblem p{ResolventOperator::subdifferential(Indicator{box}), CocoerciveOperator::affine(Q, c)};
      const OracleSolution a = reference_fb(p, p.B.beta, Vector::Zero(n), 1000000);
      QPConstraints cons;
      cons.boxes.push_back(box);
      const OracleSolution b = qp_oracle(Q, c, cons);
      CHECK((a.point - b.point).norm() <= 1e-8);
    }
  }
}

TEST_CASE("fixed-metric primal-dual loop") {
  // No blocks and C = Id - c: with tau = 1 the loop is x -> c.
  Rng rng(7);
  const Index n = 3;
  const Vector c = rng.vector(n);
  const CocoerciveProblem p{Vector::Zero(n), ResolventOperator::zero(n),
                            CocoerciveOperator::least_squares(Matrix::Identity(n, n), c), {}};
  const auto xs = fixed_metric_pd_iterates(p, 1.0, {}, rng.vector(n), {}, 2);
  REQUIRE(xs.size() == 3);
  CHECK((xs[1] - c).norm() < 1e-15);
  CHECK_THROWS_AS(fixed_metric_pd_iterates(p, 1.0, {1.0}, Vector::Zero(n), {}, 2), DimensionError);
}
