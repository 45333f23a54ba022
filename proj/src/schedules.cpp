#include "vmfb/schedules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

namespace vmfb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

// Records the worst margin and the first failing index of a per-n check.
struct Tracker {
  HypothesisCheck check;
  explicit Tracker(std::string name) {
    check.name = std::move(name);
    check.worst_margin = kInf;
  }
  // `why` is only evaluated for the first failure.
  template <class F>
  void observe(std::int64_t n, double margin, bool ok, F&& why) {
    check.worst_margin = std::min(check.worst_margin, margin);
    if (!ok && check.passed) {
      check.passed = false;
      check.offending_index = n;
      check.detail = why();
    }
  }
  HypothesisCheck done() {
    if (check.worst_margin == kInf) check.worst_margin = 0.0;
    return check;
  }
};

HypothesisCheck single(std::string name, bool ok, double margin, std::string detail) {
  HypothesisCheck c;
  c.name = std::move(name);
  c.passed = ok;
  c.worst_margin = margin;
  c.detail = std::move(detail);
  return c;
}

}  // namespace

MetricSchedule MetricSchedule::with_declared_mu(double mu) const {
  MetricSchedule out = *this;
  out.mu_bound = mu;
  out.description = description + " [declared mu " + fmt(mu) + "]";
  return out;
}

MetricSchedule constant_schedule(const Metric& U) {
  MetricSchedule s;
  s.dim = U.dim();
  s.generator = [U](std::int64_t) { return U; };
  s.eta = [](std::int64_t) { return 0.0; };
  s.nu = [](std::int64_t) { return 0.0; };
  s.alpha = U.alpha();
  s.mu_bound = U.norm();
  s.eta_sum_bound = 0.0;
  s.eta_sup = 0.0;
  s.reverse_chain = true;
  s.nondecreasing = true;
  s.description = "constant";
  return s;
}

MetricSchedule perturbed_schedule(const Metric& base, const Matrix& D, double rate,
                                  double amplitude) {
  if (!(rate > 0.0 && rate < 1.0)) throw InvalidArgument("perturbed_schedule: rate must lie in ]0,1[");
  if (!std::isfinite(amplitude)) throw InvalidArgument("perturbed_schedule: non-finite amplitude");
  if (amplitude == 0.0) return constant_schedule(base);
  require_same_dim(base.dim(), D.rows(), "perturbed_schedule");
  require_same_dim(base.dim(), D.cols(), "perturbed_schedule");
  if (!D.allFinite()) throw InvalidArgument("perturbed_schedule: non-finite direction");
  const double scale = std::max(1.0, D.norm());
  if ((D - D.transpose()).norm() > kSymmetryTolerance * scale) {
    throw InvalidArgument("perturbed_schedule: direction is not symmetric");
  }
  const Matrix Ds = 0.5 * (D + D.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(Ds, Eigen::EigenvaluesOnly);
  const double dmin = eig.eigenvalues().minCoeff();
  const double dmax = eig.eigenvalues().maxCoeff();
  const double down = std::min({0.0, amplitude * dmin, amplitude * dmax});
  const double up = std::max({0.0, amplitude * dmin, amplitude * dmax});
  const double alpha = base.min_eigenvalue() + down;
  if (!(alpha > 0.0)) {
    throw InvalidArgument("perturbed_schedule: amplitude " + fmt(amplitude) +
                          " drives the smallest eigenvalue to " + fmt(alpha));
  }
  MetricSchedule s;
  s.dim = base.dim();
  s.generator = [base, Ds, rate, amplitude, alpha](std::int64_t n) {
    const Matrix M = base.matrix() + (amplitude * std::pow(rate, static_cast<double>(n))) * Ds;
    if ((M.array() == base.matrix().array()).all()) return base;
    return Metric(M, alpha);
  };
  s.eta = [g = s.generator](std::int64_t n) {
    return std::max(0.0, loewner_ratio(g(n + 1), g(n)) - 1.0);
  };
  s.nu = [g = s.generator](std::int64_t n) {
    return std::max(0.0, loewner_ratio(g(n), g(n + 1)) - 1.0);
  };
  s.alpha = alpha;
  s.mu_bound = base.norm() + up;
  // eta_n <= amplitude rate^n (1 - rate) lambda_max(D) / alpha when positive.
  s.eta_sum_bound = up / alpha;
  s.eta_sup = up * (1.0 - rate) / alpha;
  s.reverse_chain = true;
  s.nondecreasing = up == 0.0;
  s.description = "perturbed(rate " + fmt(rate) + ", amplitude " + fmt(amplitude) + ")";
  return s;
}

MetricSchedule block_diagonal_schedule(const std::vector<MetricSchedule>& blocks) {
  if (blocks.empty()) throw InvalidArgument("block_diagonal_schedule: no blocks");
  MetricSchedule s;
  s.alpha = kInf;
  s.description = "blocks(";
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    s.dim += b.dim;
    s.alpha = std::min(s.alpha, b.alpha);
    s.mu_bound = std::max(s.mu_bound, b.mu_bound);
    s.eta_sum_bound += b.eta_sum_bound;
    s.eta_sup = std::max(s.eta_sup, b.eta_sup);
    s.description += (i ? ", " : "") + b.description;
  }
  s.description += ")";
  s.reverse_chain = std::all_of(blocks.begin(), blocks.end(),
                                [](const MetricSchedule& b) { return b.reverse_chain; });
  s.nondecreasing = std::all_of(blocks.begin(), blocks.end(),
                                [](const MetricSchedule& b) { return b.nondecreasing; });
  s.generator = [blocks](std::int64_t n) {
    std::vector<Metric> ms;
    ms.reserve(blocks.size());
    for (const auto& b : blocks) ms.push_back(b.at(n));
    return Metric::block_diagonal(ms);
  };
  s.eta = [blocks](std::int64_t n) {
    double e = 0.0;
    for (const auto& b : blocks) e = std::max(e, b.eta(n));
    return e;
  };
  s.nu = [blocks](std::int64_t n) {
    double e = 0.0;
    for (const auto& b : blocks) e = std::max(e, b.nu(n));
    return e;
  };
  return s;
}

double default_epsilon(double beta, double mu) {
  if (!(beta > 0.0) || !(mu > 0.0)) throw InvalidArgument("default_epsilon: beta, mu must be > 0");
  return 0.9 * std::min(1.0, 2.0 * beta / (mu + 1.0));
}

StepSchedule StepSchedule::constant(double epsilon, double gamma, double lambda) {
  StepSchedule s;
  s.epsilon = epsilon;
  s.gamma = [gamma](std::int64_t) { return gamma; };
  s.lambda = [lambda](std::int64_t) { return lambda; };
  s.description = "constant(gamma " + fmt(gamma) + ", lambda " + fmt(lambda) + ")";
  return s;
}

StepSchedule StepSchedule::default_for(double beta, double mu) {
  const double eps = default_epsilon(beta, mu);
  // Constant operators are cocoercive for every beta; any gamma works.
  const double gamma = std::isinf(beta) ? 1.0 : 0.5 * (eps + (2.0 * beta - eps) / mu);
  return constant(eps, gamma, 1.0);
}

ErrorSequence ErrorSequence::zero(Index dim) {
  ErrorSequence e;
  e.dim = dim;
  e.term = [dim](std::int64_t) -> Vector { return Vector::Zero(dim); };
  e.total = 0.0;
  return e;
}

ErrorSequence ErrorSequence::geometric(Index dim, double total, double ratio, std::uint64_t seed) {
  if (!(total >= 0.0) || !std::isfinite(total)) throw InvalidArgument("geometric errors: total must be >= 0");
  if (!(ratio > 0.0 && ratio < 1.0)) throw InvalidArgument("geometric errors: ratio must lie in ]0,1[");
  if (dim <= 0) throw InvalidArgument("geometric errors: dimension must be positive");
  ErrorSequence e;
  e.dim = dim;
  e.total = total;
  e.term = [dim, total, ratio, seed](std::int64_t n) -> Vector {
    const double mag = total * (1.0 - ratio) * std::pow(ratio, static_cast<double>(n));
    if (mag == 0.0) return Vector::Zero(dim);
    const auto un = static_cast<std::uint64_t>(n);
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(un), static_cast<std::uint32_t>(un >> 32)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal;
    Vector d(dim);
    do {
      for (Index i = 0; i < dim; ++i) d(i) = normal(rng);
    } while (d.norm() == 0.0);
    return (mag / d.norm()) * d;
  };
  return e;
}

ErrorSchedule ErrorSchedule::none(Index dim) {
  return {ErrorSequence::zero(dim), ErrorSequence::zero(dim)};
}

bool ValidationReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const HypothesisCheck& c) { return c.passed; });
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  worst_margin=" << fmt(c.worst_margin);
    if (c.offending_index >= 0) os << "  n=" << c.offending_index;
    if (!c.detail.empty()) os << "  " << c.detail;
    os << "\n";
  }
  return os.str();
}

ValidationReport validate_fb_hypotheses(const MetricSchedule& ms, const StepSchedule& ss, double beta,
                                    std::int64_t n_check) {
  ValidationReport r;
  const double mu = ms.mu_bound;
  r.add(single("beta_positive", beta > 0.0, beta, "beta = " + fmt(beta)));
  const double eps_max = std::min(1.0, 2.0 * beta / (mu + 1.0));
  const double eps = ss.epsilon;
  r.add(single("epsilon_range", eps > 0.0 && eps <= eps_max, std::min(eps, eps_max - eps),
               "epsilon = " + fmt(eps) + " in ]0, " + fmt(eps_max) + "]"));
  const double g_hi = (2.0 * beta - eps) / mu;

  Tracker gamma("gamma_range"), lambda("lambda_range"), lower("metric_lower_bound"),
      upper("metric_upper_bound"), chain("loewner_chain"), eta("eta_certified");
  double eta_sum = 0.0;
  std::optional<Metric> prev;
  for (std::int64_t n = 0; n < n_check; ++n) {
    const double g = ss.gamma(n);
    const double gm = std::min(g - eps, g_hi - g);
    const double gtol = 1e-12 * std::max(1.0, std::abs(g_hi));
    gamma.observe(n, gm, std::isfinite(g) && gm >= -gtol, [&] { return std::string("gamma_n = " + fmt(g) + " outside [" + fmt(eps) + ", " + fmt(g_hi) + "]"); });
    const double l = ss.lambda(n);
    const double lm = std::min(l - eps, 1.0 - l);
    lambda.observe(n, lm, lm >= -1e-15, [&] { return std::string("lambda_n = " + fmt(l) + " outside [" + fmt(eps) + ", 1]"); });

    const Metric U = prev ? *prev : ms.at(n);
    const Metric Un1 = ms.at(n + 1);
    const double lo = U.min_eigenvalue() - ms.alpha;
    lower.observe(n, lo, lo >= -1e-12 * U.norm(), [&] { return std::string("smallest eigenvalue " + fmt(U.min_eigenvalue()) + " < alpha " + fmt(ms.alpha)); });
    const double hi = mu - U.norm();
    upper.observe(n, hi, hi >= -1e-12 * std::max(1.0, mu), [&] { return std::string("||U_n|| = " + fmt(U.norm()) + " exceeds declared mu " + fmt(mu)); });
    const double e = ms.eta(n);
    eta_sum += e;
    const bool eta_ok = e >= 0.0 && e <= ms.eta_sup + 1e-12 && eta_sum <= ms.eta_sum_bound + 1e-10;
    eta.observe(n, std::min(ms.eta_sup - e, ms.eta_sum_bound - eta_sum), eta_ok, [&] { return std::string("eta_n = " + fmt(e) + ", partial sum " + fmt(eta_sum) + " vs bounds " +
                    fmt(ms.eta_sup) + ", " + fmt(ms.eta_sum_bound)); });
    double cm = 0.0;
    if (!Un1.same_as(U)) {
      cm = min_symmetric_eigenvalue((1.0 + e) * Un1.matrix() - U.matrix());
    }
    chain.observe(n, cm, cm >= -kLoewnerSlack, [&] { return std::string("(1 + eta_n) U_{n+1} - U_n has eigenvalue " + fmt(cm)); });
    prev = Un1;
  }
  r.add(gamma.done());
  r.add(lambda.done());
  r.add(lower.done());
  r.add(upper.done());
  r.add(eta.done());
  r.add(chain.done());
  return r;
}

std::pair<double, double> coupling_margins(const Metric& U, const std::vector<Metric>& Ui,
                                           const std::vector<LinearMap>& L) {
  require_same_dim(static_cast<Index>(Ui.size()), static_cast<Index>(L.size()), "coupling_margins");
  double s = 0.0;
  double top = U.norm();
  for (std::size_t i = 0; i < L.size(); ++i) {
    require_same_dim(L[i].cols(), U.dim(), "coupling_margins");
    require_same_dim(L[i].rows(), Ui[i].dim(), "coupling_margins");
    Matrix P = L[i].matrix;
    for (Index j = 0; j < P.cols(); ++j) P.col(j) = Ui[i].apply_sqrt(P.col(j));
    for (Index k = 0; k < P.rows(); ++k) P.row(k) = U.apply_sqrt(P.row(k).transpose()).transpose();
    const double nrm = spectral_norm(P);
    s += nrm * nrm;
    top = std::max(top, Ui[i].norm());
  }
  if (s == 0.0) return {kInf, 1.0 / top};
  const double delta = 1.0 / std::sqrt(s) - 1.0;
  return {delta, delta / ((1.0 + delta) * top)};
}

PrimalDualValidation validate_primal_dual_hypotheses(const MetricSchedule& primal,
                                       const std::vector<MetricSchedule>& dual,
                                       const std::vector<LinearMap>& L, double beta,
                                       double epsilon, std::int64_t n_check) {
  PrimalDualValidation out;
  auto& r = out.report;
  r.add(single("beta_positive", beta > 0.0, beta, "beta = " + fmt(beta)));
  const double eps_max = std::min(1.0, beta);
  r.add(single("epsilon_range", epsilon > 0.0 && epsilon < eps_max,
               std::min(epsilon, eps_max - epsilon),
               "epsilon = " + fmt(epsilon) + " in ]0, " + fmt(eps_max) + "["));
  if (dual.size() != L.size()) {
    r.add(single("blocks", false, 0.0, "number of dual schedules differs from number of couplings"));
    return out;
  }
  for (std::size_t i = 0; i < L.size(); ++i) {
    if (L[i].cols() != primal.dim || L[i].rows() != dual[i].dim) {
      r.add(single("blocks", false, 0.0, "dimension mismatch in block " + std::to_string(i)));
      return out;
    }
  }
  const double zeta_min = 1.0 / (2.0 * beta - epsilon);
  Tracker mono_p("primal_nondecreasing"), delta_t("coupling_delta"), zeta_t("step_condition_zeta");
  std::vector<Tracker> mono_d;
  for (std::size_t i = 0; i < dual.size(); ++i) mono_d.emplace_back("dual_nondecreasing_" + std::to_string(i));

  auto fetch = [&](std::int64_t n) {
    std::vector<Metric> v;
    for (const auto& d : dual) v.push_back(d.at(n));
    return v;
  };
  Metric U = primal.at(0);
  std::vector<Metric> Ui = fetch(0);
  double delta = 0.0, zeta = 0.0;
  bool have = false;
  for (std::int64_t n = 0; n < n_check; ++n) {
    const Metric Un1 = primal.at(n + 1);
    const std::vector<Metric> Ui1 = fetch(n + 1);
    if (!have) {
      std::tie(delta, zeta) = coupling_margins(U, Ui, L);
      have = true;
    }
    out.delta.push_back(delta);
    out.zeta.push_back(zeta);
    delta_t.observe(n, delta, delta > 0.0, [&] { return std::string("infeasible scaling: sum_i ||sqrt(U_i,n) L_i sqrt(U_n)||^2 >= 1 (delta_n = " +
                        fmt(delta) + ")"); });
    zeta_t.observe(n, zeta - zeta_min, zeta >= zeta_min, [&] { return std::string("zeta_n = " + fmt(zeta) + " < 1/(2 beta - epsilon) = " + fmt(zeta_min)); });
    const double mp = Un1.same_as(U) ? 0.0 : min_symmetric_eigenvalue(Un1.matrix() - U.matrix());
    mono_p.observe(n, mp, mp >= -kLoewnerSlack, [&] { return std::string("U_{n+1} - U_n has eigenvalue " + fmt(mp)); });
    bool same = Un1.same_as(U);
    for (std::size_t i = 0; i < dual.size(); ++i) {
      const bool s = Ui1[i].same_as(Ui[i]);
      same = same && s;
      const double md = s ? 0.0 : min_symmetric_eigenvalue(Ui1[i].matrix() - Ui[i].matrix());
      mono_d[i].observe(n, md, md >= -kLoewnerSlack, [&] { return std::string("U_{i,n+1} - U_{i,n} has eigenvalue " + fmt(md)); });
    }
    have = have && same;
    U = Un1;
    Ui = Ui1;
  }
  r.add(mono_p.done());
  for (auto& t : mono_d) r.add(t.done());
  r.add(delta_t.done());
  r.add(zeta_t.done());
  return out;
}

}  // namespace vmfb
