#include "vmfb/metric.hpp"

#include <cmath>
#include <string>

namespace vmfb {

struct Metric::Spectral {
  Matrix matrix;
  Matrix inverse;
  Matrix sqrt;
  Matrix inverse_sqrt;
  Vector eigenvalues;
  Vector inverse_eigenvalues;
  Matrix eigenvectors;
  std::vector<Metric> blocks;
  bool diagonal = false;
  bool scalar = false;
};

namespace {

bool off_diagonal_zero(const Matrix& m) {
  for (Index j = 0; j < m.cols(); ++j) {
    for (Index i = 0; i < m.rows(); ++i) {
      if (i != j && m(i, j) != 0.0) return false;
    }
  }
  return true;
}

Matrix symmetrized(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("metric: matrix is not square");
  }
  if (m.size() == 0) throw InvalidArgument("metric: empty matrix");
  if (!m.allFinite()) throw InvalidArgument("metric: non-finite entry");
  const double scale = m.norm();
  const double asym = (m - m.transpose()).norm();
  if (scale == 0.0 || asym > kSymmetryTolerance * scale) {
    throw InvalidArgument("metric: matrix is not symmetric (relative asymmetry " +
                          std::to_string(scale == 0.0 ? 0.0 : asym / scale) + ")");
  }
  return 0.5 * (m + m.transpose());
}

std::shared_ptr<Metric::Spectral> from_eigen(Matrix matrix, Vector values, Matrix vectors,
                                             bool diagonal) {
  auto s = std::make_shared<Metric::Spectral>();
  const double lo = values.minCoeff();
  const double hi = values.maxCoeff();
  if (!(lo > 0.0)) {
    throw FactorizationError("metric: matrix is not positive definite (smallest eigenvalue " +
                             std::to_string(lo) + ")");
  }
  if (hi / lo > kMaxConditionNumber) {
    throw FactorizationError("metric: condition number " + std::to_string(hi / lo) +
                             " exceeds 1e12");
  }
  s->diagonal = diagonal;
  s->scalar = diagonal && lo == hi;
  s->eigenvalues = values;
  s->inverse_eigenvalues = values.cwiseInverse();
  if (diagonal) {
    s->inverse = s->inverse_eigenvalues.asDiagonal();
    s->sqrt = values.cwiseSqrt().asDiagonal();
    s->inverse_sqrt = values.cwiseSqrt().cwiseInverse().asDiagonal();
  } else {
    s->inverse = vectors * s->inverse_eigenvalues.asDiagonal() * vectors.transpose();
    s->sqrt = vectors * values.cwiseSqrt().asDiagonal() * vectors.transpose();
    s->inverse_sqrt =
        vectors * values.cwiseSqrt().cwiseInverse().asDiagonal() * vectors.transpose();
    s->inverse = 0.5 * (s->inverse + s->inverse.transpose()).eval();
    s->sqrt = 0.5 * (s->sqrt + s->sqrt.transpose()).eval();
    s->inverse_sqrt = 0.5 * (s->inverse_sqrt + s->inverse_sqrt.transpose()).eval();
  }
  s->matrix = std::move(matrix);
  s->eigenvectors = std::move(vectors);
  return s;
}

std::shared_ptr<Metric::Spectral> decompose(const Matrix& input) {
  Matrix m = symmetrized(input);
  if (off_diagonal_zero(m)) {
    Vector d = m.diagonal();
    const Index n = m.rows();
    return from_eigen(std::move(m), std::move(d), Matrix::Identity(n, n), true);
  }
  Eigen::SelfAdjointEigenSolver<Matrix> eig(m);
  if (eig.info() != Eigen::Success) {
    throw FactorizationError("metric: eigendecomposition failed");
  }
  return from_eigen(std::move(m), eig.eigenvalues(), eig.eigenvectors(), false);
}

}  // namespace

Metric::Metric(std::shared_ptr<const Spectral> data, bool inverted, double alpha)
    : data_(std::move(data)), inverted_(inverted), alpha_(alpha) {}

Metric::Metric(const Matrix& matrix) : data_(decompose(matrix)) {
  alpha_ = data_->eigenvalues.minCoeff();
}

Metric::Metric(const Matrix& matrix, double alpha) : data_(decompose(matrix)), alpha_(alpha) {
  if (!(alpha > 0.0)) throw InvalidArgument("metric: alpha must be > 0");
  const double lo = data_->eigenvalues.minCoeff();
  // The claimed bound may exceed the computed eigenvalue by rounding only.
  if (alpha > lo + 1e-12 * data_->eigenvalues.maxCoeff()) {
    throw InvalidArgument("metric: smallest eigenvalue " + std::to_string(lo) +
                          " is below the claimed bound alpha = " + std::to_string(alpha));
  }
}

Metric Metric::identity(Index n) { return scalar(n, 1.0); }

Metric Metric::scalar(Index n, double value) {
  return diagonal(Vector::Constant(n, value));
}

Metric Metric::diagonal(const Vector& entries) {
  return Metric(Matrix(entries.asDiagonal()));
}

Metric Metric::block_diagonal(std::span<const Metric> blocks) {
  Index n = 0;
  for (const auto& b : blocks) n += b.dim();
  if (n == 0) throw InvalidArgument("metric: empty block list");
  Matrix m = Matrix::Zero(n, n);
  Matrix vectors = Matrix::Zero(n, n);
  Vector values(n);
  bool diagonal = true;
  Index offset = 0;
  for (const auto& b : blocks) {
    const Index k = b.dim();
    m.block(offset, offset, k, k) = b.matrix();
    vectors.block(offset, offset, k, k) = b.eigenvectors();
    values.segment(offset, k) = b.eigenvalues();
    diagonal = diagonal && b.is_diagonal();
    offset += k;
  }
  double alpha = blocks.front().alpha();
  for (const auto& b : blocks) alpha = std::min(alpha, b.alpha());
  auto data = from_eigen(std::move(m), std::move(values), std::move(vectors), diagonal);
  data->blocks.assign(blocks.begin(), blocks.end());
  return Metric(std::move(data), false, alpha);
}

Index Metric::dim() const { return data_->matrix.rows(); }

double Metric::norm() const {
  return inverted_ ? data_->inverse_eigenvalues.maxCoeff() : data_->eigenvalues.maxCoeff();
}

double Metric::min_eigenvalue() const {
  return inverted_ ? data_->inverse_eigenvalues.minCoeff() : data_->eigenvalues.minCoeff();
}

bool Metric::is_diagonal() const { return data_->diagonal; }
bool Metric::is_scalar() const { return data_->scalar; }

std::vector<Metric> Metric::blocks() const {
  if (!inverted_) return data_->blocks;
  std::vector<Metric> out;
  out.reserve(data_->blocks.size());
  for (const auto& b : data_->blocks) out.push_back(b.inverse());
  return out;
}

const Matrix& Metric::matrix() const { return inverted_ ? data_->inverse : data_->matrix; }

const Vector& Metric::eigenvalues() const {
  return inverted_ ? data_->inverse_eigenvalues : data_->eigenvalues;
}

const Matrix& Metric::eigenvectors() const { return data_->eigenvectors; }

Vector Metric::apply(const Vector& x) const {
  require_same_dim(dim(), x.size(), "Metric::apply");
  if (data_->diagonal) return eigenvalues().cwiseProduct(x);
  return matrix() * x;
}

Vector Metric::apply_inverse(const Vector& x) const {
  require_same_dim(dim(), x.size(), "Metric::apply_inverse");
  if (data_->diagonal) {
    return x.cwiseQuotient(eigenvalues());
  }
  return (inverted_ ? data_->matrix : data_->inverse) * x;
}

Vector Metric::apply_sqrt(const Vector& x) const {
  require_same_dim(dim(), x.size(), "Metric::apply_sqrt");
  if (data_->diagonal) return eigenvalues().cwiseSqrt().cwiseProduct(x);
  return (inverted_ ? data_->inverse_sqrt : data_->sqrt) * x;
}

Vector Metric::apply_inverse_sqrt(const Vector& x) const {
  require_same_dim(dim(), x.size(), "Metric::apply_inverse_sqrt");
  if (data_->diagonal) return x.cwiseQuotient(eigenvalues().cwiseSqrt());
  return (inverted_ ? data_->sqrt : data_->inverse_sqrt) * x;
}

Metric Metric::inverse() const { return Metric(data_, !inverted_, 1.0 / norm()); }

Metric Metric::sqrt() const {
  const Vector values = eigenvalues().cwiseSqrt();
  Matrix m = inverted_ ? data_->inverse_sqrt : data_->sqrt;
  return Metric(from_eigen(std::move(m), values, data_->eigenvectors, data_->diagonal), false,
                std::sqrt(alpha_));
}

bool Metric::same_as(const Metric& other) const {
  return data_ == other.data_ && inverted_ == other.inverted_;
}

double metric_inner(const Metric& U, const Vector& x, const Vector& y) {
  require_same_dim(U.dim(), x.size(), "metric_inner");
  require_same_dim(U.dim(), y.size(), "metric_inner");
  return U.apply(x).dot(y);
}

double metric_norm(const Metric& U, const Vector& x) {
  return std::sqrt(std::max(0.0, metric_inner(U, x, x)));
}

double min_symmetric_eigenvalue(const Matrix& A) {
  if (A.rows() != A.cols()) throw DimensionError("min_symmetric_eigenvalue: not square");
  const Matrix s = 0.5 * (A + A.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) {
    throw FactorizationError("min_symmetric_eigenvalue: eigendecomposition failed");
  }
  return eig.eigenvalues().minCoeff();
}

bool loewner_geq(const Matrix& A, const Matrix& B, double slack) {
  require_same_dim(A.rows(), B.rows(), "loewner_geq");
  require_same_dim(A.cols(), B.cols(), "loewner_geq");
  if (slack < 0.0) throw InvalidArgument("loewner_geq: slack must be >= 0");
  return min_symmetric_eigenvalue(A - B) >= -slack;
}

bool loewner_geq(const Metric& A, const Metric& B, double slack) {
  if (A.same_as(B)) return true;
  return loewner_geq(A.matrix(), B.matrix(), slack);
}

double loewner_ratio(const Metric& upper, const Metric& lower) {
  require_same_dim(upper.dim(), lower.dim(), "loewner_ratio");
  if (upper.same_as(lower)) return 1.0;
  if (upper.is_diagonal() && lower.is_diagonal()) {
    return lower.eigenvalues().cwiseQuotient(upper.eigenvalues()).maxCoeff();
  }
  const Index n = upper.dim();
  Matrix s(n, n);
  for (Index j = 0; j < n; ++j) {
    s.col(j) = upper.apply_inverse_sqrt(lower.matrix() * upper.apply_inverse_sqrt(Vector::Unit(n, j)));
  }
  s = 0.5 * (s + s.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(s, Eigen::EigenvaluesOnly);
  if (eig.info() != Eigen::Success) throw FactorizationError("loewner_ratio: eig failed");
  return eig.eigenvalues().maxCoeff();
}

Metric metric_sqrt(const Metric& U) { return U.sqrt(); }

Metric metric_inverse(const Metric& U) { return U.inverse(); }

double spectral_norm(const Matrix& A) {
  if (A.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(A);
  return svd.singularValues()(0);
}

}  // namespace vmfb
