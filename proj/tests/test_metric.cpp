#include "doctest.h"
#include "testkit.hpp"

#include "vmfb/metric.hpp"

using namespace vmfb;
using testkit::Rng;

namespace {

Matrix diag(std::initializer_list<double> d) {
  Vector v(static_cast<Index>(d.size()));
  Index i = 0;
  for (double x : d) v(i++) = x;
  return v.asDiagonal();
}

}  // namespace

TEST_CASE("metric_inner and metric_norm on small cases") {
  const Vector a{{1.0, 2.0}};
  const Vector b{{3.0, 4.0}};
  CHECK(metric_inner(Metric::identity(2), a, b) == doctest::Approx(11.0));
  CHECK(metric_inner(Metric(diag({2, 3})), Vector::Ones(2), Vector::Ones(2)) == doctest::Approx(5.0));
  CHECK(metric_norm(Metric::identity(2), b) == doctest::Approx(5.0));
  CHECK(metric_norm(Metric(diag({4, 1})), Vector{{1.0, 0.0}}) == doctest::Approx(2.0));
}

TEST_CASE("loewner order on diagonal pairs") {
  const Matrix I = Matrix::Identity(2, 2);
  CHECK(loewner_geq(Matrix(2 * I), I));
  CHECK_FALSE(loewner_geq(I, Matrix(2 * I)));
  CHECK_FALSE(loewner_geq(diag({1, 3}), diag({2, 1})));
  CHECK_FALSE(loewner_geq(diag({2, 1}), diag({1, 3})));
}

TEST_CASE("square root and inverse of diagonal metrics") {
  const Metric s = metric_sqrt(Metric(diag({4, 9})));
  CHECK((s.matrix() - diag({2, 3})).norm() < 1e-14);
  const Metric inv = metric_inverse(Metric(diag({2, 4})));
  CHECK((inv.matrix() - diag({0.5, 0.25})).norm() < 1e-14);
}

TEST_CASE("inverse of the inverse is the identity map") {
  Rng rng(1);
  for (int k = 0; k < 50; ++k) {
    const Index n = rng.integer(2, 12);
    const Metric U = rng.metric(n, 0.1, 10.0);
    const Metric W = metric_inverse(metric_inverse(U));
    CHECK((W.matrix() - U.matrix()).norm() <= 1e-10 * U.norm());
    const Vector x = rng.vector(n);
    CHECK((U.apply(U.apply_inverse(x)) - x).norm() <= 1e-10 * x.norm());
    CHECK((U.apply_sqrt(U.apply_sqrt(x)) - U.apply(x)).norm() <= 1e-10 * U.norm() * x.norm());
  }
}

TEST_CASE("inverse metric is bounded below by 1/||U||") {
  Rng rng(2);
  for (int k = 0; k < 50; ++k) {
    const Index n = rng.integer(2, 10);
    const Metric U = rng.metric(n, 0.2, 5.0);
    const Vector x = rng.vector(n);
    CHECK(metric_inner(U.inverse(), x, x) >= x.squaredNorm() / U.norm() - 1e-12 * x.squaredNorm());
    CHECK(U.inverse().alpha() == doctest::Approx(1.0 / U.norm()));
  }
}

TEST_CASE("loewner order is transitive on sampled triples") {
  Rng rng(3);
  int chains = 0;
  for (int k = 0; k < 200; ++k) {
    const Index n = 3;
    const Matrix A = rng.spd(n, 0.1, 3.0);
    const Matrix B = A + rng.spd(n, 0.0, 1.0) * rng.uniform(0.0, 1.0);
    const Matrix C = B + rng.spd(n, 0.0, 1.0) * rng.uniform(0.0, 1.0);
    REQUIRE(loewner_geq(B, A, 1e-12));
    REQUIRE(loewner_geq(C, B, 1e-12));
    CHECK(loewner_geq(C, A, 1e-12));
    ++chains;
  }
  CHECK(chains == 200);
}

TEST_CASE("loewner_ratio is the smallest certifying factor") {
  Rng rng(4);
  for (int k = 0; k < 30; ++k) {
    const Metric A = rng.metric(4);
    const Metric B = rng.metric(4);
    const double t = loewner_ratio(A, B);
    CHECK(loewner_geq(Matrix(t * A.matrix()), B.matrix(), 1e-10));
    CHECK_FALSE(loewner_geq(Matrix((t - 1e-6) * A.matrix()), B.matrix(), 0.0));
  }
}

TEST_CASE("ill-conditioned and asymmetric inputs") {
  CHECK_THROWS_AS(Metric(diag({1.0, 1e-13})), FactorizationError);
  CHECK_NOTHROW(Metric(diag({1.0, 1e-11})));
  CHECK_THROWS(Metric(diag({1.0, -1.0})));
  CHECK_THROWS(Metric(diag({1.0, 0.0})));

  Matrix near = Matrix::Identity(2, 2);
  near(0, 1) = 1e-14;
  const Metric m(near);
  CHECK(m.matrix()(0, 1) == m.matrix()(1, 0));

  Matrix far = Matrix::Identity(2, 2);
  far(0, 1) = 1e-3;
  CHECK_THROWS_AS(Metric{far}, InvalidArgument);

  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::nan("");
  CHECK_THROWS(Metric{nan});
}

TEST_CASE("claimed lower bound above the spectrum is rejected") {
  CHECK_THROWS_AS(Metric(diag({1.0, 2.0}), 1.5), InvalidArgument);
  CHECK(Metric(diag({1.0, 2.0}), 0.5).alpha() == 0.5);
}

TEST_CASE("block diagonal metrics keep their blocks") {
  const std::vector<Metric> parts{Metric::scalar(2, 3.0), Metric(diag({1.0, 5.0, 2.0}))};
  const Metric B = Metric::block_diagonal(parts);
  CHECK(B.dim() == 5);
  CHECK(B.is_diagonal());
  CHECK(B.norm() == doctest::Approx(5.0));
  CHECK(B.blocks().size() == 2);
  CHECK(B.inverse().blocks()[1].matrix()(1, 1) == doctest::Approx(0.2));
}

TEST_CASE("spectral norm matches the largest singular value") {
  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const Matrix A = rng.matrix(rng.integer(1, 6), rng.integer(1, 6));
    Eigen::JacobiSVD<Matrix> svd(A);
    CHECK(std::abs(spectral_norm(A) - svd.singularValues()(0)) <= 1e-10 * std::max(1.0, svd.singularValues()(0)));
  }
}

TEST_CASE("metric_norm matches the sqrt path") {
  Rng rng(6);
  for (int k = 0; k < 20; ++k) {
    const Metric U = rng.metric(5);
    const Vector x = rng.vector(5);
    CHECK(metric_norm(U, x) == doctest::Approx(U.apply_sqrt(x).norm()).epsilon(1e-12));
  }
}
