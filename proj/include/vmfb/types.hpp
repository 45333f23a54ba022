#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace vmfb {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand sizes do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix factorization failed or the input was numerically unusable.
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// An input violated a documented precondition (non-finite entries, bad
/// constants, empty sets, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The requested closed form is not available for this descriptor/metric
/// combination (e.g. the l1 prox under a non-diagonal metric).
class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

inline void require_same_dim(Index a, Index b, const char* what) {
  if (a != b) {
    throw DimensionError(std::string(what) + ": dimension mismatch (" +
                         std::to_string(a) + " vs " + std::to_string(b) + ")");
  }
}

inline void require_finite(const Vector& x, const char* what) {
  if (!x.allFinite()) {
    throw InvalidArgument(std::string(what) + ": non-finite entry");
  }
}

}  // namespace vmfb
