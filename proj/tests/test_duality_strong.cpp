#include "doctest.h"
#include "testkit.hpp"

#include "vmfb/duality_strong.hpp"

#include <cmath>

using namespace vmfb;
using testkit::Rng;

namespace {

DualBlock hard_block(const Matrix& L, const ConvexSet& D, const Vector& r) {
  return {LinearMap(L), ResolventOperator::subdifferential(Indicator{D}), CocoerciveOperator::zero(L.rows()), r};
}

StepSchedule steps_for(const StronglyMonotoneProblem& p, const std::vector<MetricSchedule>& ms) {
  double mu = 0.0;
  for (const auto& m : ms) mu = std::max(mu, m.mu_bound);
  return StepSchedule::default_for(beta_dual(p), mu);
}

std::vector<MetricSchedule> identity_metrics(const StronglyMonotoneProblem& p) {
  std::vector<MetricSchedule> ms;
  for (const auto& b : p.blocks) ms.push_back(constant_schedule(Metric::identity(b.L.rows())));
  return ms;
}

std::vector<Vector> zeros(const StronglyMonotoneProblem& p) {
  std::vector<Vector> v;
  for (const auto& b : p.blocks) v.push_back(Vector::Zero(b.L.rows()));
  return v;
}

}  // namespace

TEST_CASE("beta_dual closed forms") {
  const Vector z = Vector::Zero(2);
  StronglyMonotoneProblem p{z, 1.0, ResolventOperator::zero(2), {}};
  p.blocks.push_back({LinearMap(Matrix::Identity(2, 2)), ResolventOperator::zero(2),
                      CocoerciveOperator::affine(Matrix::Identity(2, 2), Vector::Zero(2)), Vector::Zero(2)});
  CHECK(beta_dual(p) == doctest::Approx(0.5));

  // Infinite modulus: rho = 2, sum ||L_i||^2 = 2.
  StronglyMonotoneProblem q{z, 2.0, ResolventOperator::zero(2), {}};
  q.blocks.push_back(hard_block(Matrix::Identity(2, 2), WholeSpace{2}, Vector::Zero(2)));
  q.blocks.push_back(hard_block(Matrix::Identity(2, 2), WholeSpace{2}, Vector::Zero(2)));
  CHECK(beta_dual(q) == doctest::Approx(1.0));
  const CocoerciveOperator B = dual_operator(q);
  CHECK(sampled_cocoercivity_margin(B, beta_dual(q), 2000, 1) >= -1e-9);

  // Scaling the couplings by t lowers beta.
  StronglyMonotoneProblem t = q;
  for (auto& b : t.blocks) b.L = LinearMap(3.0 * b.L.matrix);
  CHECK(beta_dual(t) == doctest::Approx(2.0 / 18.0));
}

TEST_CASE("assembled dual operator is beta-cocoercive") {
  Rng rng(2);
  for (int k = 0; k < 5; ++k) {
    const Index n = 4;
    StronglyMonotoneProblem p{rng.vector(n), rng.uniform(0.5, 2.0),
                              ResolventOperator::subdifferential(Indicator{Box{-Vector::Ones(n), Vector::Ones(n)}}),
                              {}};
    p.blocks.push_back({LinearMap(rng.matrix(2, n)), ResolventOperator::subdifferential(L1Norm{Vector::Ones(2)}),
                        CocoerciveOperator::affine(rng.spd(2, 0.5, 2.0), Vector::Zero(2)), rng.vector(2)});
    p.blocks.push_back(hard_block(rng.matrix(3, n), Box{-Vector::Ones(3), Vector::Ones(3)}, rng.vector(3)));
    CHECK(sampled_cocoercivity_margin(dual_operator(p), beta_dual(p), 10000, k, 3.0) >= -1e-9);
  }
}

TEST_CASE("equality-constrained case matches a dense solve") {
  Rng rng(3);
  const Index n = 5;
  const Matrix L = rng.matrix(2, n);
  const Vector r = rng.vector(2);
  const Vector z = rng.vector(n);
  const double rho = 1.5;
  StronglyMonotoneProblem p{z, rho, ResolventOperator::zero(n), {}};
  p.blocks.push_back(hard_block(L, Singleton{Vector::Zero(2)}, r));
  // minimize rho ||x||^2 / 2 - <z, x> subject to L x = r.
  Matrix K = Matrix::Zero(n + 2, n + 2);
  K.topLeftCorner(n, n) = rho * Matrix::Identity(n, n);
  K.topRightCorner(n, 2) = L.transpose();
  K.bottomLeftCorner(2, n) = L;
  Vector rhs(n + 2);
  rhs << z, r;
  const Vector kkt = K.fullPivLu().solve(rhs);

  const auto ms = identity_metrics(p);
  PrimalDualOptions o;
  o.stop.tol = 1e-12;
  const PrimalDualResult res = solve_strong_duality(p, ms, steps_for(p, ms), zeros(p), o);
  CHECK(res.trace.converged());
  CHECK((res.x - kkt.head(n)).norm() < 1e-9);
  CHECK((res.v[0] - kkt.tail(2)).norm() < 1e-9);
}

TEST_CASE("dual solution is stationary") {
  const testkit::StrongFixture fx = testkit::strong_fixtures()[1];
  const StronglyMonotoneProblem p = make_strongly_convex_problem(fx.z, fx.f, fx.blocks);
  const auto& ms = fx.dual_metrics;
  PrimalDualOptions o;
  o.stop.tol = 1e-13;
  o.policy = Policy::strict;
  const PrimalDualResult first = solve_strong_duality(p, ms, steps_for(p, ms), zeros(p), o);
  REQUIRE(first.trace.final_residual < 1e-12);
  PrimalDualOptions again;
  again.stop.tol = -1.0;
  again.stop.max_iter = 200;
  const PrimalDualResult second = solve_strong_duality(p, ms, steps_for(p, ms), first.v, again);
  const Vector v0 = stack_blocks(first.v);
  for (const auto& rec : second.trace.records) CHECK((rec.y - v0).norm() <= 1e-10);
}

TEST_CASE("primal recovery") {
  Rng rng(4);
  const Index n = 3;
  const Vector z = rng.vector(n);
  StronglyMonotoneProblem p{z, 2.0, ResolventOperator::zero(n), {}};
  const Matrix L1 = rng.matrix(2, n);
  const Matrix L2 = rng.matrix(4, n);
  p.blocks.push_back(hard_block(L1, WholeSpace{2}, Vector::Zero(2)));
  p.blocks.push_back(hard_block(L2, WholeSpace{4}, Vector::Zero(4)));
  CHECK((primal_recovery(p, {Vector::Zero(2), Vector::Zero(4)}) - z / 2.0).norm() < 1e-15);

  // Lipschitz in v for a nonlinear A.
  p.A = ResolventOperator::subdifferential(Indicator{Ball{Vector::Zero(n), 0.5}});
  for (int k = 0; k < 100; ++k) {
    const std::vector<Vector> v{rng.vector(2), rng.vector(4)};
    const std::vector<Vector> d{rng.vector(2, 0.1), rng.vector(4, 0.1)};
    const double bound = (spectral_norm(L1) * d[0].norm() + spectral_norm(L2) * d[1].norm()) / p.rho;
    const Vector a = primal_recovery(p, v);
    const Vector b = primal_recovery(p, {v[0] + d[0], v[1] + d[1]});
    CHECK((a - b).norm() <= bound + 1e-12);
  }
}

TEST_CASE("strongly convex minimization") {
  SUBCASE("a hard point constraint fixes the solution") {
    Rng rng(5);
    const Vector t = rng.vector(3);
    const std::vector<SmoothedBlock> blocks{{Matrix::Identity(3, 3), Indicator{Singleton{Vector::Zero(3)}}, std::nullopt, t}};
    const std::vector<MetricSchedule> ms{constant_schedule(Metric::identity(3))};
    const StronglyMonotoneProblem p = make_strongly_convex_problem(rng.vector(3, 5.0), ZeroFunction{3}, blocks);
    const PrimalDualResult r = solve_strongly_convex_min(p.z, ZeroFunction{3}, blocks, ms, steps_for(p, ms),
                                                         {Vector::Zero(3)});
    CHECK(r.trace.converged());
    CHECK((r.x - t).norm() < 1e-8);
  }
  SUBCASE("polyhedral fixtures match the QP oracle and close the gap") {
    for (const auto& fx : testkit::strong_fixtures()) {
      const StronglyMonotoneProblem p = make_strongly_convex_problem(fx.z, fx.f, fx.blocks);
      PrimalDualOptions o;
      o.stop.tol = 1e-11;
      std::vector<Vector> v0 = zeros(p);
      const PrimalDualResult r = solve_strongly_convex_min(fx.z, fx.f, fx.blocks, fx.dual_metrics,
                                                           steps_for(p, fx.dual_metrics), v0, o);
      CHECK_MESSAGE(r.trace.converged(), fx.name);
      CHECK_MESSAGE((r.x - fx.solution).norm() < 1e-6, fx.name);
      const double primal = strongly_convex_primal_objective(fx.z, fx.f, fx.blocks, r.x);
      const auto dual = strongly_convex_dual_objective(fx.z, fx.f, fx.blocks, r.v);
      REQUIRE(dual.has_value());
      CHECK_MESSAGE(std::abs(primal + *dual) < 1e-6, fx.name);
      CHECK(!r.trace.assumptions.empty());
    }
  }
  SUBCASE("moreau smoothing matches a gradient oracle") {
    Rng rng(6);
    const Index n = 4;
    const Matrix L = rng.matrix(3, n);
    const Vector r = rng.vector(3);
    const Vector m = rng.uniform_vector(3, 0.5, 2.0);
    const Vector z = rng.vector(n, 3.0);
    const Box box{-0.5 * Vector::Ones(3), 0.5 * Vector::Ones(3)};
    const std::vector<SmoothedBlock> blocks{{L, Indicator{box}, Matrix(m.asDiagonal()), r}};
    const std::vector<MetricSchedule> ms{constant_schedule(Metric::identity(3))};
    const StronglyMonotoneProblem p = make_strongly_convex_problem(z, ZeroFunction{n}, blocks);
    PrimalDualOptions o;
    o.stop.tol = 1e-12;
    const PrimalDualResult res = solve_strongly_convex_min(z, ZeroFunction{n}, blocks, ms, steps_for(p, ms),
                                                           {Vector::Zero(3)}, o);
    CHECK(res.trace.converged());

    // Gradient descent on ||x - z||^2/2 + min_{y in box} <M (Lx - r - y), Lx - r - y>/2;
    // with diagonal M the inner minimizer is the clamp.
    const double lip = 1.0 + std::pow(spectral_norm(L), 2) * m.maxCoeff();
    Vector x = Vector::Zero(n);
    for (int it = 0; it < 200000; ++it) {
      const Vector u = L * x - r;
      const Vector y = u.cwiseMax(box.lower).cwiseMin(box.upper);
      const Vector g = x - z + L.transpose() * m.cwiseProduct(u - y);
      if (g.norm() < 1e-13) break;
      x -= g / lip;
    }
    CHECK((res.x - x).norm() < 1e-8);
    const double direct = 0.5 * (x - z).squaredNorm() + smoothed_block_value(blocks[0], x);
    CHECK(strongly_convex_primal_objective(z, ZeroFunction{n}, blocks, res.x) == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("dual sequence equals forward-backward on the product space") {
  const testkit::StrongFixture fx = testkit::strong_fixtures()[2];
  const StronglyMonotoneProblem p = make_strongly_convex_problem(fx.z, fx.f, fx.blocks);
  const StepSchedule ss = steps_for(p, fx.dual_metrics);
  PrimalDualOptions o;
  o.stop.tol = -1.0;
  o.stop.max_iter = 300;
  const PrimalDualResult pd = solve_strong_duality(p, fx.dual_metrics, ss, zeros(p), o);

  // The product-space operators, written out here rather than taken from the library.
  std::vector<Index> sizes;
  std::vector<ResolventOperator> inverses;
  Index total = 0;
  for (const auto& b : p.blocks) {
    sizes.push_back(b.L.rows());
    inverses.push_back(b.B.inverted());
    total += b.L.rows();
  }
  const Metric Id = Metric::identity(fx.z.size());
  const CocoerciveOperator Bdual{total, beta_dual(p), [&](const Vector& v) -> Vector {
                                   const auto parts = split_blocks(v, sizes);
                                   Vector s = fx.z;
                                   for (std::size_t i = 0; i < parts.size(); ++i) s -= p.blocks[i].L.adjoint(parts[i]);
                                   const Vector x = prox_metric(fx.f, 1.0, Id, s);
                                   Vector out(total);
                                   Index off = 0;
                                   for (std::size_t i = 0; i < parts.size(); ++i) {
                                     out.segment(off, sizes[i]) = p.blocks[i].r - p.blocks[i].L.apply(x);
                                     off += sizes[i];
                                   }
                                   return out;
                                 }};
  FBOptions fo;
  fo.stop = o.stop;
  const FBResult fb = fb_solve({block_diagonal_operator(inverses), Bdual}, block_diagonal_schedule(fx.dual_metrics),
                               ss, Vector::Zero(total), fo);
  REQUIRE(fb.trace.records.size() == pd.trace.records.size());
  for (std::size_t k = 0; k < fb.trace.records.size(); ++k) {
    CHECK((fb.trace.records[k].x - pd.trace.records[k].y).norm() <= 1e-12);
  }
}

TEST_CASE("best approximation") {
  SUBCASE("fixtures match the QP oracle") {
    for (const auto& fx : testkit::best_approximation_fixtures()) {
      std::vector<Vector> v0;
      for (const auto& b : fx.blocks) v0.push_back(Vector::Zero(b.L.rows()));
      PrimalDualOptions o;
      o.stop.tol = 1e-11;
      const PrimalDualResult r = solve_best_approximation(fx.z, fx.C, fx.blocks, fx.dual_metrics, v0, o);
      CHECK_MESSAGE(r.trace.converged(), fx.name);
      CHECK_MESSAGE((r.x - fx.solution).norm() < 1e-6, fx.name);
      if (fx.name == "clamp") CHECK((r.x - fx.z.cwiseMax(0.0).cwiseMin(1.0)).norm() < 1e-8);
      if (fx.name == "interior_point") {
        CHECK((r.x - fx.z).norm() < 1e-12);
        CHECK(r.trace.final_residual == 0.0);
      }
    }
  }
  SUBCASE("the step-norm condition is enforced") {
    const Vector z{{2.0, 2.0}};
    const std::vector<ConstraintBlock> blocks{{Matrix::Identity(2, 2), Box{Vector::Zero(2), Vector::Ones(2)}, Vector::Zero(2)}};
    const std::vector<MetricSchedule> big{constant_schedule(Metric::scalar(2, 2.0))};
    CHECK_THROWS_AS(solve_best_approximation(z, WholeSpace{2}, blocks, big, {Vector::Zero(2)}), ValidationError);
    PrimalDualOptions w;
    w.policy = Policy::warn;
    w.stop.max_iter = 50;
    const PrimalDualResult r = solve_best_approximation(z, WholeSpace{2}, blocks, big, {Vector::Zero(2)}, w);
    bool flagged = false;
    for (const auto& c : r.trace.validation.checks) flagged |= c.name == "step_norm_condition" && !c.passed;
    CHECK(flagged);

    const StronglyMonotoneProblem p = make_best_approximation_problem(z, WholeSpace{2}, blocks);
    const std::vector<MetricSchedule> ok{constant_schedule(Metric::scalar(2, 1.9))};
    CHECK(step_norm_condition(p, ok).passed);
    const StepSchedule s = best_approximation_steps(p, ok);
    CHECK(s.gamma(3) == 1.0);
    CHECK(s.lambda(3) == 1.0);
    // beta = 1 here, so epsilon = min{1, 2/2.9, 2 - 1.9}.
    CHECK(s.epsilon == doctest::Approx(0.1));
  }
}

TEST_CASE("tangent disk has no dual solution") {
  // C is the disk of radius 1 centred at (1, 0); the constraint x1 <= 0 meets it at 0 only.
  const Vector z{{-1.0, 1.0}};
  const std::vector<ConstraintBlock> blocks{{Matrix::Identity(2, 2), HalfSpace{Vector{{1.0, 0.0}}, 0.0}, Vector::Zero(2)}};
  PrimalDualOptions o;
  o.stop.max_iter = 20000;
  const PrimalDualResult r = solve_best_approximation(z, Ball{Vector{{1.0, 0.0}}, 1.0}, blocks,
                                                      {constant_schedule(Metric::identity(2))}, {Vector::Zero(2)}, o);
  CHECK(r.trace.termination == Termination::max_iterations);
  CHECK(r.trace.final_residual > o.stop.tol);
}

TEST_CASE("problem validation") {
  StronglyMonotoneProblem p{Vector::Zero(2), 1.0, ResolventOperator::zero(2), {}};
  p.blocks.push_back(hard_block(Matrix::Zero(1, 2), WholeSpace{1}, Vector::Zero(1)));
  CHECK_THROWS_AS(validate_problem(p), InvalidArgument);
  p.blocks[0].L = LinearMap(Matrix::Ones(1, 2));
  p.rho = 0.0;
  CHECK_THROWS_AS(validate_problem(p), InvalidArgument);
  p.rho = 1.0;
  p.blocks[0].r = Vector::Zero(3);
  CHECK_THROWS_AS(validate_problem(p), DimensionError);
}
