#include "doctest.h"
#include "testkit.hpp"

#include "vmfb/duality_cocoercive.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <limits>

using namespace vmfb;
using testkit::Rng;

namespace {

std::vector<Vector> zero_duals(const CocoerciveProblem& p) {
  std::vector<Vector> v;
  for (const auto& b : p.blocks) v.push_back(Vector::Zero(b.L.rows()));
  return v;
}

CocoerciveProblem fixture_problem(const testkit::CompositeFixture& fx) {
  return make_composite_problem(fx.z, fx.f, CocoerciveOperator::least_squares(fx.M, fx.b), fx.blocks);
}

std::vector<LinearMap> couplings(const CocoerciveProblem& p) {
  std::vector<LinearMap> L;
  for (const auto& b : p.blocks) L.push_back(b.L);
  return L;
}

const HypothesisCheck* find(const ValidationReport& r, const std::string& name) {
  for (const auto& c : r.checks) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("beta is the smallest cocoercivity constant") {
  const Index n = 3;
  CocoerciveProblem p{Vector::Zero(n), ResolventOperator::zero(n),
                      CocoerciveOperator::affine(2.0 * Matrix::Identity(n, n), Vector::Zero(n)), {}};
  CHECK(beta_primal_dual(p) == doctest::Approx(0.5));
  p.blocks.push_back({LinearMap(Matrix::Identity(n, n)), ResolventOperator::zero(n),
                      CocoerciveOperator::affine(4.0 * Matrix::Identity(n, n), Vector::Zero(n)), Vector::Zero(n)});
  CHECK(beta_primal_dual(p) == doctest::Approx(0.25));
  p.C = CocoerciveOperator::zero(n);
  p.blocks[0].Dinv = CocoerciveOperator::zero(n);
  CHECK(std::isinf(beta_primal_dual(p)));
}

TEST_CASE("no blocks and a quadratic h give z") {
  // f = 0, h = ||x||^2 / 2: the solution of z = x is z itself.
  Rng rng(1);
  const Index n = 4;
  const Vector c = rng.vector(n);
  const CocoerciveProblem p{c, ResolventOperator::zero(n),
                            CocoerciveOperator::affine(Matrix::Identity(n, n), Vector::Zero(n)), {}};
  CocoerciveOptions o;
  o.stop.tol = 1e-13;
  const PrimalDualResult r = solve_cocoercive_pd(p, constant_schedule(Metric::scalar(n, 1.0)), {},
                                                 RelaxationSchedule::constant(0.5, 1.0), Vector::Zero(n), {}, o);
  CHECK(r.trace.converged());
  CHECK((r.x - c).norm() < 1e-12);
  CHECK(r.v.empty());
}

TEST_CASE("composite fixtures reach a KKT point") {
  for (const auto& fx : testkit::composite_fixtures()) {
    const CocoerciveProblem p = fixture_problem(fx);
    CocoerciveOptions o;
    o.stop.tol = 1e-10;
    o.stop.max_iter = 200000;
    o.n_check = 1000;
    const PrimalDualResult r =
        solve_cocoercive_pd(p, fx.primal_metrics, fx.dual_metrics, fx.relax, Vector::Zero(fx.z.size()),
                            zero_duals(p), o);
    CHECK_MESSAGE(r.trace.converged(), fx.name);
    CHECK_MESSAGE(kkt_residual(p, r.x, r.v) <= 1e-7, fx.name);
    CHECK_MESSAGE(r.trace.validation.passed(), r.trace.validation.to_string());

    // The solution is a fixed point of the iteration.
    CocoerciveOptions again;
    again.stop.tol = -1.0;
    again.stop.max_iter = 50;
    const PrimalDualResult s =
        solve_cocoercive_pd(p, fx.primal_metrics, fx.dual_metrics, fx.relax, r.x, r.v, again);
    CHECK((s.x - r.x).norm() <= 1e-8);

    // No nearby feasible point has a lower objective.
    const auto h = [&](const Vector& x) { return 0.5 * (fx.M * x - fx.b).squaredNorm(); };
    const double best = composite_objective(fx.z, fx.f, h, fx.blocks, r.x);
    REQUIRE(std::isfinite(best));
    Rng rng(2);
    for (int k = 0; k < 200; ++k) {
      const double val = composite_objective(fx.z, fx.f, h, fx.blocks, r.x + rng.vector(fx.z.size(), 1e-3));
      if (std::isfinite(val)) CHECK(val >= best - 1e-8);
    }
  }
}

TEST_CASE("kkt residual") {
  const testkit::CompositeFixture fx = testkit::composite_fixtures()[2];
  const CocoerciveProblem p = fixture_problem(fx);
  Rng rng(3);
  const Vector x = rng.vector(fx.z.size(), 3.0);
  std::vector<Vector> v{rng.vector(p.blocks[0].L.rows(), 3.0)};
  CHECK(kkt_residual(p, x, v) > 1e-3);
  CHECK_THROWS_AS(kkt_residual(p, x, {}), DimensionError);

  // Nonexpansive resolvents make the residual Lipschitz in (x, v).
  const double Ln = p.blocks[0].L.norm;
  const double lip = 2.0 + Ln + 1.0 / p.C.beta;
  for (int k = 0; k < 50; ++k) {
    const Vector dx = rng.vector(x.size(), 1e-3);
    const Vector dv = rng.vector(v[0].size(), 1e-3);
    const double a = kkt_residual(p, x, v);
    const double b = kkt_residual(p, x + dx, {v[0] + dv});
    CHECK(std::abs(a - b) <= (lip + 1.0) * (dx.norm() + dv.norm()) + 1e-12);
  }
}

TEST_CASE("coupling matrix is positive definite with the zeta bound") {
  Rng rng(4);
  for (int k = 0; k < 10; ++k) {
    const Index n = rng.integer(2, 5);
    const std::vector<LinearMap> L{LinearMap(rng.matrix(2, n)), LinearMap(rng.matrix(3, n))};
    double s2 = 0.0;
    for (const auto& l : L) s2 += l.norm * l.norm;
    const double t = 0.7 / std::sqrt(s2);
    const Metric U = Metric(t * rng.spd(n, 0.5, 1.0));
    const std::vector<Metric> Ui{Metric(t * rng.spd(2, 0.5, 1.0)), Metric(t * rng.spd(3, 0.5, 1.0))};
    const auto [delta, zeta] = coupling_margins(U, Ui, L);
    REQUIRE(delta > 0.0);
    const Matrix V = coupling_matrix(U, Ui, L);
    CHECK((V - V.transpose()).norm() == 0.0);
    const double lmin = Eigen::SelfAdjointEigenSolver<Matrix>(V).eigenvalues().minCoeff();
    CHECK(lmin >= zeta * (1.0 - 1e-10));
    for (int j = 0; j < 100; ++j) {
      const Vector w = rng.vector(V.rows());
      CHECK(w.dot(V * w) >= zeta * w.squaredNorm() * (1.0 - 1e-10));
    }
  }
}

TEST_CASE("increasing metrics make V_n^{-1} nondecreasing") {
  const testkit::CompositeFixture fx = testkit::composite_fixtures()[4];
  REQUIRE(fx.primal_metrics.nondecreasing);
  const CocoerciveProblem p = fixture_problem(fx);
  const std::vector<LinearMap> L = couplings(p);
  auto Vinv = [&](std::int64_t n) {
    std::vector<Metric> Ui;
    for (const auto& s : fx.dual_metrics) Ui.push_back(s.at(n));
    return Matrix(coupling_matrix(fx.primal_metrics.at(n), Ui, L).inverse());
  };
  for (std::int64_t n = 0; n < 20; ++n) {
    const Matrix diff = Vinv(n + 1) - Vinv(n);
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(diff).eigenvalues().minCoeff() >= -1e-9);
  }
}

TEST_CASE("scalar metrics reproduce the fixed-metric loop") {
  for (const auto& fx : testkit::composite_fixtures()) {
    if (!fx.primal_metrics.nondecreasing || fx.primal_metrics.description != "constant") continue;
    const CocoerciveProblem p = fixture_problem(fx);
    const double tau = fx.primal_metrics.at(0).matrix()(0, 0);
    std::vector<double> sigma;
    for (const auto& s : fx.dual_metrics) sigma.push_back(s.at(0).matrix()(0, 0));
    Rng rng(5);
    const Vector x0 = rng.vector(fx.z.size());
    std::vector<Vector> v0;
    for (const auto& b : p.blocks) v0.push_back(rng.vector(b.L.rows()));
    const std::int64_t N = 300;
    const auto ref = fixed_metric_pd_iterates(p, tau, sigma, x0, v0, N);
    CocoerciveOptions o;
    o.stop.tol = -1.0;
    o.stop.max_iter = N;
    const PrimalDualResult r =
        solve_cocoercive_pd(p, fx.primal_metrics, fx.dual_metrics, RelaxationSchedule::constant(fx.relax.epsilon, 1.0),
                            x0, v0, o);
    REQUIRE(static_cast<std::int64_t>(r.trace.records.size()) == N + 1);
    double worst = 0.0;
    for (std::int64_t n = 0; n <= N; ++n) {
      const auto& rec = r.trace.records[static_cast<std::size_t>(n)];
      Vector s(ref[0].size());
      s << rec.x, rec.y;
      worst = std::max(worst, (s - ref[static_cast<std::size_t>(n)]).norm() /
                                  std::max(1.0, ref[static_cast<std::size_t>(n)].norm()));
    }
    CHECK_MESSAGE(worst <= 1e-12, fx.name);
  }
}

TEST_CASE("increasing and constant metrics reach the same point") {
  const testkit::CompositeFixture fx = testkit::composite_fixtures()[0];
  const CocoerciveProblem p = fixture_problem(fx);
  const Index n = fx.z.size();
  const double tau = fx.primal_metrics.at(0).matrix()(0, 0);
  const MetricSchedule up = perturbed_schedule(Metric::scalar(n, tau), Matrix::Identity(n, n), 0.5, -0.3 * tau);
  const MetricSchedule up_dual = perturbed_schedule(Metric::scalar(n, tau), Matrix::Identity(n, n), 0.3, -0.5 * tau);
  CocoerciveOptions o;
  o.stop.tol = 1e-11;
  o.stop.max_iter = 200000;
  o.n_check = 500;
  const PrimalDualResult a =
      solve_cocoercive_pd(p, fx.primal_metrics, fx.dual_metrics, fx.relax, Vector::Zero(n), zero_duals(p), o);
  const PrimalDualResult b = solve_cocoercive_pd(p, up, {up_dual}, fx.relax, Vector::Zero(n), zero_duals(p), o);
  CHECK(a.trace.converged());
  CHECK(b.trace.converged());
  CHECK((a.x - b.x).norm() < 1e-8);
}

TEST_CASE("step condition is enforced") {
  const testkit::CompositeFixture fx = testkit::composite_fixtures()[0];
  const CocoerciveProblem p = fixture_problem(fx);
  const Index n = fx.z.size();
  // tau sigma ||L||^2 = 4 with L = Id.
  const MetricSchedule big = constant_schedule(Metric::scalar(n, 2.0));
  CocoerciveOptions o;
  o.stop.max_iter = 10;
  CHECK_THROWS_AS(solve_cocoercive_pd(p, big, {big}, fx.relax, Vector::Zero(n), zero_duals(p), o), ValidationError);
  const ValidationReport rep = cocoercive_pd_report(p, big, {big}, fx.relax, 5);
  const HypothesisCheck* c = find(rep, "coupling_delta");
  REQUIRE(c != nullptr);
  CHECK_FALSE(c->passed);
  CHECK(c->detail.find("infeasible scaling") != std::string::npos);

  const ValidationReport bad_lambda =
      cocoercive_pd_report(p, fx.primal_metrics, fx.dual_metrics, RelaxationSchedule::constant(fx.relax.epsilon, 1.5), 5);
  REQUIRE(find(bad_lambda, "lambda_range") != nullptr);
  CHECK_FALSE(find(bad_lambda, "lambda_range")->passed);
}

TEST_CASE("spot checks catch a late violation") {
  const testkit::CompositeFixture fx = testkit::composite_fixtures()[0];
  const CocoerciveProblem p = fixture_problem(fx);
  const Index n = fx.z.size();
  const double tau = fx.primal_metrics.at(0).matrix()(0, 0);
  // Increasing from tau towards 5 tau; the coupling breaks after a few steps.
  const MetricSchedule grow =
      perturbed_schedule(Metric::scalar(n, 5.0 * tau), Matrix::Identity(n, n), 0.9, -4.0 * tau);
  CocoerciveOptions o;
  o.n_check = 1;
  o.spot_check_every = 10;
  o.stop.tol = -1.0;
  o.stop.max_iter = 100;
  CHECK_THROWS_AS(solve_cocoercive_pd(p, grow, fx.dual_metrics, fx.relax, Vector::Zero(n), zero_duals(p), o),
                  ValidationError);
  o.policy = Policy::warn;
  const PrimalDualResult r = solve_cocoercive_pd(p, grow, fx.dual_metrics, fx.relax, Vector::Zero(n), zero_duals(p), o);
  const HypothesisCheck* c = find(r.trace.validation, "spot_check_zeta");
  REQUIRE(c != nullptr);
  CHECK_FALSE(c->passed);
  CHECK(c->offending_index % 10 == 0);
  o.spot_check_every = 0;
  CHECK_NOTHROW(solve_cocoercive_pd(p, grow, fx.dual_metrics, fx.relax, Vector::Zero(n), zero_duals(p),
                                    [&] {
                                      CocoerciveOptions q = o;
                                      q.policy = Policy::strict;
                                      return q;
                                    }()));
}

TEST_CASE("inexact steps with summable errors still converge") {
  const testkit::CompositeFixture fx = testkit::composite_fixtures()[1];
  const CocoerciveProblem p = fixture_problem(fx);
  const Index n = fx.z.size();
  CocoerciveOptions exact;
  exact.stop.tol = 1e-11;
  exact.stop.max_iter = 200000;
  exact.n_check = 200;
  const PrimalDualResult a =
      solve_cocoercive_pd(p, fx.primal_metrics, fx.dual_metrics, fx.relax, Vector::Zero(n), zero_duals(p), exact);
  CocoerciveOptions noisy = exact;
  noisy.errors.a = ErrorSequence::geometric(n, 0.1, 0.9, 7);
  noisy.errors.c = ErrorSequence::geometric(n, 0.1, 0.9, 8);
  noisy.errors.b = {ErrorSequence::geometric(1, 0.1, 0.9, 9)};
  noisy.errors.d = {ErrorSequence::geometric(1, 0.1, 0.9, 10)};
  const PrimalDualResult b =
      solve_cocoercive_pd(p, fx.primal_metrics, fx.dual_metrics, fx.relax, Vector::Zero(n), zero_duals(p), noisy);
  CHECK(b.trace.converged());
  CHECK((a.x - b.x).norm() < 1e-7);
}

TEST_CASE("problem validation") {
  const Index n = 2;
  CocoerciveProblem p{Vector::Zero(n), ResolventOperator::zero(3), CocoerciveOperator::zero(n), {}};
  CHECK_THROWS(validate_problem(p));
  p.A = ResolventOperator::zero(n);
  CHECK_NOTHROW(validate_problem(p));
  p.blocks.push_back({LinearMap(Matrix::Identity(3, 3)), ResolventOperator::zero(3), CocoerciveOperator::zero(3),
                      Vector::Zero(3)});
  CHECK_THROWS(validate_problem(p));
}

TEST_CASE("structured iteration equals forward-backward on the product space") {
  // Fixed metrics V^{-1} with the product operators
  //   A(x, v) = (A x + sum_i L_i^* v_i, (-L_i x + B_i^{-1} v_i)_i)
  //   B(x, v) = (C x - z, (D_i^{-1} v_i + r_i)_i).
  // V^{-1}-resolvents of A are triangular once V is known.
  // Box and l1 proxes want exactly diagonal metrics, so inversion round-off
  // off the diagonal is dropped.
  const auto cleaned = [](const Matrix& M) {
    const Matrix off = M - Matrix(M.diagonal().asDiagonal());
    if (off.cwiseAbs().maxCoeff() <= 1e-13 * M.diagonal().cwiseAbs().maxCoeff()) return Metric::diagonal(M.diagonal());
    return Metric(M);
  };
  for (std::size_t f : {0, 1, 3}) {
    const testkit::CompositeFixture fx = testkit::composite_fixtures()[f];
    const CocoerciveProblem p = fixture_problem(fx);
    const Index n = fx.z.size();
    std::vector<Index> sizes;
    Index total = n;
    for (const auto& b : p.blocks) {
      sizes.push_back(b.L.rows());
      total += b.L.rows();
    }
    std::vector<Metric> Ui;
    for (const auto& s : fx.dual_metrics) Ui.push_back(s.at(0));
    const Matrix V = coupling_matrix(fx.primal_metrics.at(0), Ui, couplings(p));
    const Metric Vinv(Matrix(V.inverse()));

    const auto Aprod = ResolventOperator::custom(total, "product", [&](double gamma, const Metric& W, const Vector& w) {
      REQUIRE(gamma == 1.0);
      const Matrix Vm = W.inverse().matrix();
      const Vector Vw = Vm * w;
      const Metric U = cleaned(Vm.topLeftCorner(n, n).inverse());
      Vector out(total);
      const Vector px = p.A.resolvent(1.0, U, U.apply(Vw.head(n)));
      out.head(n) = px;
      Index off = n;
      for (std::size_t i = 0; i < sizes.size(); ++i) {
        const Index k = sizes[i];
        const Metric Ubi = cleaned(Vm.block(off, off, k, k).inverse());
        const Vector rhs = Vw.segment(off, k) + 2.0 * p.blocks[i].L.apply(px);
        out.segment(off, k) = resolvent_of_inverse(p.blocks[i].B, 1.0, Ubi, Ubi.apply(rhs));
        off += k;
      }
      return out;
    });
    const CocoerciveOperator Bprod{total, beta_primal_dual(p), [&](const Vector& w) -> Vector {
                                     Vector out(total);
                                     out.head(n) = p.C(w.head(n)) - p.z;
                                     Index off = n;
                                     for (std::size_t i = 0; i < sizes.size(); ++i) {
                                       const Index k = sizes[i];
                                       out.segment(off, k) = p.blocks[i].Dinv(w.segment(off, k)) + p.blocks[i].r;
                                       off += k;
                                     }
                                     return out;
                                   }};
    Rng rng(6);
    const Vector w0 = rng.vector(total);
    std::vector<Vector> v0;
    for (Index off = n; const Index k : sizes) {
      v0.push_back(w0.segment(off, k));
      off += k;
    }
    const std::int64_t N = 200;
    CocoerciveOptions o;
    o.stop.tol = -1.0;
    o.stop.max_iter = N;
    const RelaxationSchedule relax = RelaxationSchedule::constant(fx.relax.epsilon, 0.9);
    const PrimalDualResult pd =
        solve_cocoercive_pd(p, fx.primal_metrics, fx.dual_metrics, relax, w0.head(n), v0, o);
    FBOptions fo;
    fo.stop = o.stop;
    fo.policy = Policy::warn;
    const FBResult fb = fb_solve({Aprod, Bprod}, constant_schedule(Vinv), StepSchedule::constant(fx.relax.epsilon, 1.0, 0.9),
                                 w0, fo);
    REQUIRE(fb.trace.records.size() == pd.trace.records.size());
    double worst = 0.0;
    for (std::size_t k = 0; k < fb.trace.records.size(); ++k) {
      Vector s(total);
      s << pd.trace.records[k].x, pd.trace.records[k].y;
      worst = std::max(worst, (fb.trace.records[k].x - s).norm() / std::max(1.0, s.norm()));
    }
    CHECK_MESSAGE(worst <= 1e-12, fx.name);
  }
}
