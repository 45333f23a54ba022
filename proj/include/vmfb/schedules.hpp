/*
 * Metric, step and error sequences, and validators for the hypotheses under
 * which the forward-backward iterations converge.
 *
 * Schedules certify their infinite-horizon properties (sup ||U_n||, sum of
 * eta_n, summability of errors) by construction; the validators re-check
 * them on a finite prefix and report, they never throw.
 */
#pragma once

#include "vmfb/metric.hpp"
#include "vmfb/operators.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace vmfb {

struct MetricSchedule {
  Index dim = 0;
  std::function<Metric(std::int64_t)> generator;
  /// Smallest eta_n >= 0 with (1 + eta_n) U_{n+1} >= U_n.
  std::function<double(std::int64_t)> eta;
  /// Smallest nu_n >= 0 with (1 + nu_n) U_n >= U_{n+1}.
  std::function<double(std::int64_t)> nu;
  double alpha = 0.0;
  /// Claimed sup_n ||U_n||.
  double mu_bound = 0.0;
  /// Closed-form bounds on sum_n eta_n and sup_n eta_n.
  double eta_sum_bound = 0.0;
  double eta_sup = 0.0;
  /// (1 + nu_n) U_n >= U_{n+1} with summable nu_n is certified.
  bool reverse_chain = false;
  /// U_{n+1} >= U_n for all n.
  bool nondecreasing = false;
  std::string description;

  Metric at(std::int64_t n) const { return generator(n); }
  /// Copy with a different claimed sup ||U_n|| (no re-certification).
  MetricSchedule with_declared_mu(double mu) const;
};

MetricSchedule constant_schedule(const Metric& U);

/// U_n = base + amplitude rate^n D with D symmetric. Throws InvalidArgument if
/// some U_n could fall below a positive multiple of Id.
MetricSchedule perturbed_schedule(const Metric& base, const Matrix& D, double rate,
                                  double amplitude);

/// U_n = blockdiag(U_{1,n}, ..., U_{m,n}).
MetricSchedule block_diagonal_schedule(const std::vector<MetricSchedule>& blocks);

struct StepSchedule {
  double epsilon = 0.0;
  std::function<double(std::int64_t)> gamma;
  std::function<double(std::int64_t)> lambda;
  std::string description;

  static StepSchedule constant(double epsilon, double gamma, double lambda);
  /// epsilon = default_epsilon(beta, mu), gamma at the midpoint of
  /// [epsilon, (2 beta - epsilon)/mu], lambda = 1.
  static StepSchedule default_for(double beta, double mu);
};

/// 0.9 min{1, 2 beta / (mu + 1)}.
double default_epsilon(double beta, double mu);

struct ErrorSequence {
  Index dim = 0;
  std::function<Vector(std::int64_t)> term;
  /// Closed-form sum_n ||e_n||.
  double total = 0.0;

  Vector at(std::int64_t n) const { return term(n); }
  bool is_zero() const { return total == 0.0; }

  static ErrorSequence zero(Index dim);
  /// e_n = total (1 - ratio) ratio^n d_n with seeded unit directions d_n.
  static ErrorSequence geometric(Index dim, double total, double ratio, std::uint64_t seed);
};

/// a_n perturbs the resolvent step, b_n the forward evaluation.
struct ErrorSchedule {
  ErrorSequence a;
  ErrorSequence b;

  static ErrorSchedule none(Index dim);
};

// ---------------------------------------------------------------------------

struct HypothesisCheck {
  std::string name;
  bool passed = true;
  /// Smallest slack observed (negative on failure).
  double worst_margin = 0.0;
  /// First failing index, or -1.
  std::int64_t offending_index = -1;
  std::string detail;
};

struct ValidationReport {
  std::vector<HypothesisCheck> checks;

  bool passed() const;
  std::string to_string() const;
  void add(HypothesisCheck c) { checks.push_back(std::move(c)); }
};

enum class Policy { strict, warn };

/// Thrown by solvers in strict mode when validation fails.
class ValidationError : public Error {
 public:
  ValidationError(const std::string& what, ValidationReport report)
      : Error(what), report_(std::move(report)) {}
  const ValidationReport& report() const { return report_; }

 private:
  ValidationReport report_;
};

inline constexpr double kLoewnerSlack = 1e-10;

/// Checks epsilon, gamma_n, lambda_n ranges, ||U_n|| <= mu_bound, U_n >= alpha Id
/// and (1 + eta_n) U_{n+1} >= U_n for n < n_check.
ValidationReport validate_fb_hypotheses(const MetricSchedule& ms, const StepSchedule& ss, double beta,
                                    std::int64_t n_check);

struct PrimalDualValidation {
  ValidationReport report;
  std::vector<double> delta;
  std::vector<double> zeta;
};

/// delta_n = 1/sqrt(sum_i ||sqrt(U_{i,n}) L_i sqrt(U_n)||^2) - 1 and
/// zeta_n = delta_n / ((1 + delta_n) max{||U_n||, ||U_{i,n}||}) for n < n_check;
/// checks delta_n > 0, zeta_n >= 1/(2 beta - epsilon), epsilon in ]0, min{1, beta}[,
/// and that the primal and dual metrics are nondecreasing.
PrimalDualValidation validate_primal_dual_hypotheses(const MetricSchedule& primal,
                                       const std::vector<MetricSchedule>& dual,
                                       const std::vector<LinearMap>& L, double beta,
                                       double epsilon, std::int64_t n_check);

/// delta_n and zeta_n for one n.
std::pair<double, double> coupling_margins(const Metric& U, const std::vector<Metric>& Ui,
                                           const std::vector<LinearMap>& L);

}  // namespace vmfb
