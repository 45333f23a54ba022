#pragma once

#include "vmfb/schedules.hpp"
#include "vmfb/types.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace vmfb {

/// One iteration of a solve. Quantities that were not computed are NaN.
struct IterationRecord {
  std::int64_t n = 0;
  /// Iterate x_n (empty when iterates are not recorded).
  Vector x;
  /// Forward point y_n, or the dual iterate for primal-dual solvers.
  Vector y;
  double gamma = 0.0;
  double lambda = 0.0;
  /// Fixed-point residual at x_n.
  double residual = 0.0;
  /// ||x_{n+1} - z||_{U_{n+1}^{-1}} and (1 + eta_n) ||x_n - z||_{U_n^{-1}} + eps_n.
  double fejer_lhs = 0.0;
  double fejer_rhs = 0.0;
  /// sum_{k <= n} ||B x_k - B x_ref||^2.
  double b_drift = 0.0;
  std::int64_t wall_clock_ns = 0;
};

enum class Termination { converged, max_iterations, diverged, non_finite };

std::string to_string(Termination t);

struct SolveTrace {
  std::vector<IterationRecord> records;
  Termination termination = Termination::max_iterations;
  /// Hypotheses that the caller asserts and the library cannot check.
  std::vector<std::string> assumptions;
  ValidationReport validation;
  double final_residual = 0.0;
  std::int64_t iterations = 0;
  std::int64_t wall_time_ns = 0;

  bool converged() const { return termination == Termination::converged; }
  void push(IterationRecord r);
};

inline constexpr const char* kTraceHeader =
    "n,residual,gamma,lambda,fejer_lhs,fejer_rhs,b_drift_partial_sum,wall_clock_ns";

/// Writes the trace as CSV with 17 significant digits. With `deterministic`
/// the timing column is written as 0 so that identical runs produce identical
/// files.
void write_csv(const SolveTrace& trace, std::ostream& out, bool deterministic = false);
void write_csv(const SolveTrace& trace, const std::string& path, bool deterministic = false);

}  // namespace vmfb
