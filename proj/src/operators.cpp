#include "vmfb/operators.hpp"

#include <limits>
#include <random>

namespace vmfb {

struct ResolventOperator::Impl {
  enum class Kind { Zero, Subdifferential, Linear, Inverted, Custom };
  Kind kind = Kind::Zero;
  std::optional<Function> f;
  Matrix M;
  Vector q;
  std::optional<ResolventOperator> base;
  Oracle oracle;
};

namespace {

void check_gamma(double gamma, const char* what) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw InvalidArgument(std::string(what) + ": gamma must be positive and finite");
  }
}

}  // namespace

ResolventOperator::ResolventOperator(Index dim, std::string tag, std::shared_ptr<const Impl> impl)
    : dim_(dim), tag_(std::move(tag)), impl_(std::move(impl)) {
  if (dim_ <= 0) throw InvalidArgument("ResolventOperator: dimension must be positive");
}

ResolventOperator ResolventOperator::zero(Index dim) {
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Zero;
  return ResolventOperator(dim, "zero", std::move(impl));
}

ResolventOperator ResolventOperator::subdifferential(Function f) {
  validate_function(f);
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Subdifferential;
  const Index n = function_dim(f);
  std::string tag = "subdifferential(" + function_name(f) + ")";
  impl->f = std::move(f);
  return ResolventOperator(n, std::move(tag), std::move(impl));
}

ResolventOperator ResolventOperator::linear(Matrix M, Vector q) {
  if (M.rows() != M.cols()) throw DimensionError("linear operator: matrix is not square");
  require_same_dim(M.rows(), q.size(), "linear operator");
  if (!M.allFinite() || !q.allFinite()) throw InvalidArgument("linear operator: non-finite data");
  const double scale = std::max(1.0, M.norm());
  if (min_symmetric_eigenvalue(M) < -1e-12 * scale) {
    throw InvalidArgument("linear operator: matrix is not monotone");
  }
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Linear;
  const Index n = M.rows();
  impl->M = std::move(M);
  impl->q = std::move(q);
  return ResolventOperator(n, "linear", std::move(impl));
}

ResolventOperator ResolventOperator::custom(Index dim, std::string tag, Oracle oracle) {
  if (!oracle) throw InvalidArgument("custom operator: empty oracle");
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Custom;
  impl->oracle = std::move(oracle);
  return ResolventOperator(dim, std::move(tag), std::move(impl));
}

const Function* ResolventOperator::function() const {
  return impl_->f ? &*impl_->f : nullptr;
}

Vector ResolventOperator::resolvent(double gamma, const Metric& U, const Vector& x) const {
  check_gamma(gamma, "resolvent");
  require_same_dim(dim_, x.size(), "resolvent");
  require_same_dim(dim_, U.dim(), "resolvent");
  switch (impl_->kind) {
    case Impl::Kind::Zero:
      return x;
    case Impl::Kind::Subdifferential:
      return prox_metric(*impl_->f, gamma, U.inverse(), x);
    case Impl::Kind::Linear: {
      // x - p = gamma U (M p + q)  <=>  (U^{-1} + gamma M) p = U^{-1} x - gamma q
      const Matrix K = U.inverse().matrix() + gamma * impl_->M;
      Eigen::PartialPivLU<Matrix> lu(K);
      const Vector rhs = U.apply_inverse(x) - gamma * impl_->q;
      Vector p = lu.solve(rhs);
      p += lu.solve(rhs - K * p);
      return p;
    }
    case Impl::Kind::Inverted: {
      const Metric Uinv = U.inverse();
      const Vector inner = impl_->base->resolvent(1.0 / gamma, Uinv, Uinv.apply(x) / gamma);
      return x - gamma * U.apply(inner);
    }
    case Impl::Kind::Custom: {
      Vector p = impl_->oracle(gamma, U, x);
      require_same_dim(dim_, p.size(), "custom resolvent output");
      return p;
    }
  }
  throw Error("resolvent: unknown operator kind");
}

std::optional<ResolventOperator> ResolventOperator::inverse() const {
  switch (impl_->kind) {
    case Impl::Kind::Zero:
      return subdifferential(Indicator{Singleton{Vector::Zero(dim_)}});
    case Impl::Kind::Subdifferential: {
      auto g = conjugate(*impl_->f);
      if (!g) return std::nullopt;
      return subdifferential(std::move(*g));
    }
    case Impl::Kind::Linear: {
      Eigen::FullPivLU<Matrix> lu(impl_->M);
      if (!lu.isInvertible()) return std::nullopt;
      Matrix Mi = lu.inverse();
      return linear(Mi, -(Mi * impl_->q));
    }
    case Impl::Kind::Inverted:
      return *impl_->base;
    case Impl::Kind::Custom:
      return std::nullopt;
  }
  return std::nullopt;
}

ResolventOperator ResolventOperator::inverted() const {
  auto impl = std::make_shared<Impl>();
  impl->kind = Impl::Kind::Inverted;
  impl->base = *this;
  return ResolventOperator(dim_, "inverse(" + tag_ + ")", std::move(impl));
}

ResolventOperator ResolventOperator::congruence(const Metric& S) const {
  require_same_dim(dim_, S.dim(), "congruence");
  switch (impl_->kind) {
    case Impl::Kind::Zero:
      return *this;
    case Impl::Kind::Subdifferential:
      // S (df) S = d(f o S) for symmetric S.
      return subdifferential(precompose(*impl_->f, S));
    case Impl::Kind::Linear: {
      const Matrix& s = S.matrix();
      return linear(s * impl_->M * s, S.apply(impl_->q));
    }
    case Impl::Kind::Inverted:
      // S B^{-1} S = (S^{-1} B S^{-1})^{-1}
      return impl_->base->congruence(S.inverse()).inverted();
    case Impl::Kind::Custom:
      break;
  }
  throw UnsupportedOperation("congruence: no closed form for operator '" + tag_ + "'");
}

Vector resolvent_metric(const ResolventOperator& A, double gamma, const Metric& U, const Vector& x) {
  return A.resolvent(gamma, U, x);
}

Vector resolvent_conjugated(const ResolventOperator& A, double gamma, const Metric& U,
                            const Vector& x) {
  const Metric S = U.sqrt();
  const ResolventOperator B = A.congruence(S);
  return S.apply(B.resolvent(gamma, Metric::identity(U.dim()), S.apply_inverse(x)));
}

Vector resolvent_inverse_identity(const ResolventOperator& A, double gamma, const Metric& U,
                                  const Vector& x) {
  check_gamma(gamma, "resolvent_inverse_identity");
  const auto Ainv = A.inverse();
  if (!Ainv) {
    throw UnsupportedOperation("resolvent_inverse_identity: no closed-form inverse for '" +
                               A.descriptor() + "'");
  }
  const Metric Uinv = U.inverse();
  return x - gamma * U.apply(Ainv->resolvent(1.0 / gamma, Uinv, Uinv.apply(x) / gamma));
}

Vector resolvent_of_inverse(const ResolventOperator& B, double gamma, const Metric& U,
                            const Vector& x) {
  check_gamma(gamma, "resolvent_of_inverse");
  const Metric Uinv = U.inverse();
  return x - gamma * U.apply(B.resolvent(1.0 / gamma, Uinv, Uinv.apply(x) / gamma));
}

Vector block_resolvent(const std::vector<ResolventBlock>& blocks, double gamma, const Vector& x) {
  Index total = 0;
  for (const auto& b : blocks) {
    require_same_dim(b.op.dim(), b.metric.dim(), "block_resolvent");
    total += b.op.dim();
  }
  require_same_dim(total, x.size(), "block_resolvent");
  Vector out(x.size());
  Index offset = 0;
  for (const auto& b : blocks) {
    const Index k = b.op.dim();
    out.segment(offset, k) = b.op.resolvent(gamma, b.metric, x.segment(offset, k));
    offset += k;
  }
  return out;
}

ResolventOperator block_diagonal_operator(std::vector<ResolventOperator> ops) {
  if (ops.empty()) throw InvalidArgument("block_diagonal_operator: no blocks");
  Index total = 0;
  std::string tag = "blocks(";
  for (std::size_t i = 0; i < ops.size(); ++i) {
    total += ops[i].dim();
    tag += (i ? "," : "") + ops[i].descriptor();
  }
  tag += ")";
  auto shared = std::make_shared<const std::vector<ResolventOperator>>(std::move(ops));
  return ResolventOperator::custom(
      total, tag, [shared](double gamma, const Metric& U, const Vector& x) {
        const std::vector<Metric> metrics = U.blocks();
        if (metrics.size() != shared->size()) {
          throw DimensionError("block_diagonal_operator: metric is not block-diagonal with " +
                               std::to_string(shared->size()) + " blocks");
        }
        std::vector<ResolventBlock> blocks;
        blocks.reserve(metrics.size());
        for (std::size_t i = 0; i < metrics.size(); ++i) blocks.push_back({(*shared)[i], metrics[i]});
        return block_resolvent(blocks, gamma, x);
      });
}

// ---------------------------------------------------------------------------

Vector CocoerciveOperator::operator()(const Vector& x) const {
  require_same_dim(dim, x.size(), "cocoercive operator");
  return eval(x);
}

CocoerciveOperator CocoerciveOperator::zero(Index dim) {
  if (dim <= 0) throw InvalidArgument("cocoercive zero: dimension must be positive");
  return {dim, std::numeric_limits<double>::infinity(),
          [dim](const Vector&) -> Vector { return Vector::Zero(dim); }};
}

CocoerciveOperator CocoerciveOperator::affine(Matrix M, Vector q, double beta) {
  if (M.rows() != M.cols()) throw DimensionError("affine cocoercive: matrix is not square");
  require_same_dim(M.rows(), q.size(), "affine cocoercive");
  if (!(beta > 0.0)) throw InvalidArgument("affine cocoercive: beta must be > 0");
  const Index n = M.rows();
  return {n, beta, [M = std::move(M), q = std::move(q)](const Vector& x) -> Vector {
            return M * x + q;
          }};
}

CocoerciveOperator CocoerciveOperator::affine(Matrix M, Vector q) {
  if (M.rows() != M.cols()) throw DimensionError("affine cocoercive: matrix is not square");
  if (!M.allFinite()) throw InvalidArgument("affine cocoercive: non-finite matrix");
  const double scale = std::max(1.0, M.norm());
  double beta = 0.0;
  if ((M - M.transpose()).norm() <= kSymmetryTolerance * scale) {
    const Matrix S = 0.5 * (M + M.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(S, Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < -1e-12 * scale) {
      throw InvalidArgument("affine cocoercive: symmetric matrix is not positive semidefinite");
    }
    const double top = eig.eigenvalues().maxCoeff();
    beta = top > 0.0 ? 1.0 / top : std::numeric_limits<double>::infinity();
  } else {
    Eigen::FullPivLU<Matrix> lu(M);
    if (!lu.isInvertible()) {
      throw UnsupportedOperation(
          "affine cocoercive: singular non-symmetric matrix; declare beta explicitly");
    }
    beta = min_symmetric_eigenvalue(lu.inverse());
    if (!(beta > 0.0)) throw InvalidArgument("affine cocoercive: matrix is not cocoercive");
  }
  return affine(std::move(M), std::move(q), beta);
}

CocoerciveOperator CocoerciveOperator::least_squares(Matrix M, Vector b) {
  require_same_dim(M.rows(), b.size(), "least_squares");
  const double nrm = spectral_norm(M);
  if (nrm == 0.0) throw InvalidArgument("least_squares: zero matrix");
  const Index n = M.cols();
  return {n, 1.0 / (nrm * nrm), [M = std::move(M), b = std::move(b)](const Vector& x) -> Vector {
            return M.transpose() * (M * x - b);
          }};
}

LinearMap::LinearMap(Matrix m) : matrix(std::move(m)) {
  if (matrix.size() == 0) throw InvalidArgument("LinearMap: empty matrix");
  if (!matrix.allFinite()) throw InvalidArgument("LinearMap: non-finite entry");
  norm = spectral_norm(matrix);
}

Vector LinearMap::apply(const Vector& x) const {
  require_same_dim(cols(), x.size(), "LinearMap::apply");
  return matrix * x;
}

Vector LinearMap::adjoint(const Vector& y) const {
  require_same_dim(rows(), y.size(), "LinearMap::adjoint");
  return matrix.transpose() * y;
}

CocoerciveOperator cocoercive_sum(const std::vector<CocoerciveTerm>& terms) {
  if (terms.empty()) throw InvalidArgument("cocoercive_sum: no terms");
  const Index n = terms.front().L.cols();
  double inv_beta = 0.0;
  for (const auto& t : terms) {
    require_same_dim(n, t.L.cols(), "cocoercive_sum domain");
    require_same_dim(t.L.rows(), t.T.dim, "cocoercive_sum co-domain");
    if (!(t.L.norm > 0.0)) throw InvalidArgument("cocoercive_sum: zero linear map");
    if (!(t.T.beta > 0.0)) throw InvalidArgument("cocoercive_sum: beta must be > 0");
    if (!t.T.is_constant()) inv_beta += t.L.norm * t.L.norm / t.T.beta;
  }
  const double beta = inv_beta > 0.0 ? 1.0 / inv_beta : std::numeric_limits<double>::infinity();
  return {n, beta, [terms](const Vector& x) -> Vector {
            Vector out = Vector::Zero(x.size());
            for (const auto& t : terms) out += t.L.adjoint(t.T(t.L.apply(x)));
            return out;
          }};
}

double sampled_cocoercivity_margin(const CocoerciveOperator& B, double beta, int pairs,
                                   std::uint64_t seed, double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  auto draw = [&] {
    Vector v(B.dim);
    for (Index i = 0; i < B.dim; ++i) v(i) = normal(rng);
    return v;
  };
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < pairs; ++k) {
    const Vector x = draw();
    const Vector y = draw();
    const Vector d = B(x) - B(y);
    const double lhs = (x - y).dot(d);
    const double rhs = std::isinf(beta) ? (d.squaredNorm() == 0.0 ? 0.0 : beta)
                                        : beta * d.squaredNorm();
    worst = std::min(worst, lhs - rhs);
  }
  return worst;
}

double sampled_firm_nonexpansiveness_margin(const ResolventOperator& A, double gamma,
                                            const Metric& U, int pairs, std::uint64_t seed,
                                            double scale) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, scale);
  auto draw = [&] {
    Vector v(A.dim());
    for (Index i = 0; i < A.dim(); ++i) v(i) = normal(rng);
    return v;
  };
  const Metric Uinv = U.inverse();
  double worst = std::numeric_limits<double>::infinity();
  for (int k = 0; k < pairs; ++k) {
    const Vector x = draw();
    const Vector y = draw();
    const Vector d = A.resolvent(gamma, U, x) - A.resolvent(gamma, U, y);
    worst = std::min(worst, metric_inner(Uinv, x - y, d) - metric_inner(Uinv, d, d));
  }
  return worst;
}

}  // namespace vmfb
