#include "vmfb/experiment.hpp"

#include "vmfb/duality_cocoercive.hpp"
#include "vmfb/oracles.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <random>
#include <sstream>

#ifndef VMFB_CONFIG_DIR
#define VMFB_CONFIG_DIR "configs"
#endif

namespace vmfb {

using json = nlohmann::json;
namespace fs = std::filesystem;

int exit_code_for(Termination t) {
  switch (t) {
    case Termination::converged:
      return kExitConverged;
    case Termination::max_iterations:
      return kExitMaxIterations;
    case Termination::diverged:
    case Termination::non_finite:
      return kExitDiverged;
  }
  return kExitUsage;
}

ExperimentConfig apply_overrides(ExperimentConfig c, const RunOptions& o) {
  if (o.policy) c.policy = *o.policy;
  if (o.seed) c.seed = *o.seed;
  if (o.max_iter) c.stop.max_iter = *o.max_iter;
  return c;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  return h;
}

// Turns normalized descriptors into library objects. Randomized entries are
// seeded by (seed, field path) so they do not shift when the config grows.
class Builder {
 public:
  Builder(std::string base_dir, std::uint64_t seed) : base_dir_(std::move(base_dir)), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::mt19937_64 rng(const std::string& path) const {
    const std::uint64_t h = fnv1a(path);
    std::seed_seq seq{static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
  }

  std::vector<std::vector<double>> read_rows(const std::string& file, const std::string& path) const {
    const fs::path p = fs::path(file).is_absolute() ? fs::path(file) : fs::path(base_dir_) / file;
    std::ifstream in(p);
    if (!in) throw ConfigError(path + ": cannot open " + p.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(in, line)) {
      std::istringstream ls(line);
      std::vector<double> row;
      std::string tok;
      while (ls >> tok) {
        if (tok == "inf" || tok == "+inf") {
          row.push_back(kInf);
          continue;
        }
        if (tok == "-inf") {
          row.push_back(-kInf);
          continue;
        }
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(tok, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != tok.size()) throw ConfigError(path + ": bad number '" + tok + "' in " + p.string());
        row.push_back(v);
      }
      if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ConfigError(path + ": " + p.string() + " holds no numbers");
    return rows;
  }

  Vector vector(const json& j, const std::string& path) const {
    if (j.is_array()) {
      Vector v(static_cast<Index>(j.size()));
      for (std::size_t i = 0; i < j.size(); ++i) {
        const Index k = static_cast<Index>(i);
        if (j[i].is_string()) {
          v(k) = j[i].get<std::string>() == "inf" ? kInf : -kInf;
        } else {
          v(k) = j[i].get<double>();
        }
      }
      return v;
    }
    if (j.contains("file")) {
      const auto rows = read_rows(j["file"].get<std::string>(), path);
      std::vector<double> flat;
      for (const auto& r : rows) flat.insert(flat.end(), r.begin(), r.end());
      return Eigen::Map<const Vector>(flat.data(), static_cast<Index>(flat.size()));
    }
    if (j.contains("constant")) {
      return Vector::Constant(j["dim"].get<Index>(), j["constant"].get<double>());
    }
    const json& g = j["random"];
    auto gen = rng(path);
    std::normal_distribution<double> nd;
    Vector v(g["dim"].get<Index>());
    for (Index i = 0; i < v.size(); ++i) v(i) = g["scale"].get<double>() * nd(gen);
    return v;
  }

  Vector finite_vector(const json& j, const std::string& path) const {
    Vector v = vector(j, path);
    if (!v.allFinite()) throw ConfigError(path + ": entries must be finite");
    return v;
  }

  Matrix matrix(const json& j, const std::string& path) const {
    if (j.is_array()) {
      Matrix M(static_cast<Index>(j.size()), static_cast<Index>(j[0].size()));
      for (Index r = 0; r < M.rows(); ++r) {
        for (Index c = 0; c < M.cols(); ++c) M(r, c) = j[r][c].get<double>();
      }
      return M;
    }
    if (j.contains("file")) {
      const auto rows = read_rows(j["file"].get<std::string>(), path);
      Matrix M(static_cast<Index>(rows.size()), static_cast<Index>(rows[0].size()));
      for (Index r = 0; r < M.rows(); ++r) {
        if (static_cast<Index>(rows[r].size()) != M.cols()) {
          throw ConfigError(path + ": rows of different lengths in " + j["file"].get<std::string>());
        }
        for (Index c = 0; c < M.cols(); ++c) M(r, c) = rows[r][c];
      }
      if (!M.allFinite()) throw ConfigError(path + ": entries must be finite");
      return M;
    }
    if (j.contains("identity")) {
      return j["scale"].get<double>() * Matrix::Identity(j["identity"].get<Index>(), j["identity"].get<Index>());
    }
    if (j.contains("diagonal")) return finite_vector(j["diagonal"], path + ".diagonal").asDiagonal();
    auto gen = rng(path);
    std::normal_distribution<double> nd;
    if (j.contains("random")) {
      const json& g = j["random"];
      Matrix M(g["rows"].get<Index>(), g["cols"].get<Index>());
      for (Index c = 0; c < M.cols(); ++c) {
        for (Index r = 0; r < M.rows(); ++r) M(r, c) = g["scale"].get<double>() * nd(gen);
      }
      return M;
    }
    const json& g = j["random_spd"];
    const Index n = g["dim"].get<Index>();
    Matrix G(n, n);
    for (Index c = 0; c < n; ++c) {
      for (Index r = 0; r < n; ++r) G(r, c) = nd(gen);
    }
    const Matrix Q = Eigen::HouseholderQR<Matrix>(G).householderQ();
    Vector ev(n);
    const double lo = g["min_eig"].get<double>();
    const double hi = g["max_eig"].get<double>();
    for (Index i = 0; i < n; ++i) ev(i) = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
    Matrix S = Q * ev.asDiagonal() * Q.transpose();
    return 0.5 * (S + S.transpose());
  }

  ConvexSet set(const json& j, const std::string& path) const {
    const std::string t = j["type"];
    ConvexSet C;
    if (t == "halfspace") {
      C = HalfSpace{finite_vector(j["normal"], path + ".normal"), j["offset"].get<double>()};
    } else if (t == "box") {
      C = Box{vector(j["lower"], path + ".lower"), vector(j["upper"], path + ".upper")};
    } else if (t == "affine") {
      C = AffineSet{matrix(j["A"], path + ".A"), finite_vector(j["b"], path + ".b")};
    } else if (t == "ball") {
      C = Ball{finite_vector(j["center"], path + ".center"), j["radius"].get<double>()};
    } else if (t == "singleton") {
      C = Singleton{finite_vector(j["point"], path + ".point")};
    } else {
      C = WholeSpace{j["dim"].get<Index>()};
    }
    guard(path, [&] { validate_set(C); });
    return C;
  }

  ScalarFunction scalar(const json& j) const {
    const std::string t = j["type"];
    if (t == "abs") return AbsValue{j["weight"].get<double>()};
    if (t == "upper_bound") return UpperBound{j["bound"].get<double>()};
    return ScalarQuadratic{j["a"].get<double>(), j["b"].get<double>()};
  }

  Function function(const json& j, const std::string& path) const {
    const std::string t = j["type"];
    Function f;
    if (t == "zero") {
      f = ZeroFunction{j["dim"].get<Index>()};
    } else if (t == "indicator") {
      f = Indicator{set(j["set"], path + ".set")};
    } else if (t == "support") {
      f = Support{set(j["set"], path + ".set")};
    } else if (t == "l1") {
      f = L1Norm{finite_vector(j["weights"], path + ".weights")};
    } else if (t == "quadratic") {
      const Matrix Q = matrix(j["Q"], path + ".Q");
      const Vector q = j.contains("q") ? finite_vector(j["q"], path + ".q") : Vector::Zero(Q.rows());
      f = Quadratic{Q, q, j["c"].get<double>()};
    } else {
      f = ScalarComposition{finite_vector(j["u"], path + ".u"), scalar(j["phi"])};
    }
    guard(path, [&] { validate_function(f); });
    return f;
  }

  ResolventOperator op(const json& j, const std::string& path) const {
    const std::string t = j["type"];
    if (t == "zero") return ResolventOperator::zero(j["dim"].get<Index>());
    if (t == "subdifferential") {
      const Function f = function(j["f"], path + ".f");
      return guard(path, [&] { return ResolventOperator::subdifferential(f); });
    }
    const Matrix M = matrix(j["M"], path + ".M");
    const Vector q = j.contains("q") ? finite_vector(j["q"], path + ".q") : Vector::Zero(M.rows());
    return guard(path, [&] { return ResolventOperator::linear(M, q); });
  }

  CocoerciveOperator coco(const json& j, const std::string& path) const {
    const std::string t = j["type"];
    if (t == "zero") return CocoerciveOperator::zero(j["dim"].get<Index>());
    const Matrix M = matrix(j["M"], path + ".M");
    if (t == "least_squares") {
      const Vector b = finite_vector(j["b"], path + ".b");
      return guard(path, [&] { return CocoerciveOperator::least_squares(M, b); });
    }
    const Vector q = j.contains("q") ? finite_vector(j["q"], path + ".q") : Vector::Zero(M.rows());
    if (j.contains("beta")) {
      return guard(path, [&] { return CocoerciveOperator::affine(M, q, j["beta"].get<double>()); });
    }
    return guard(path, [&] { return CocoerciveOperator::affine(M, q); });
  }

  MetricSchedule metric_schedule(const json& j, const std::string& path) const {
    MetricSchedule s = guard(path, [&] {
      if (j["type"] == "constant") return constant_schedule(Metric(matrix(j["U"], path + ".U")));
      return perturbed_schedule(Metric(matrix(j["base"], path + ".base")), matrix(j["D"], path + ".D"),
                                j["rate"].get<double>(), j["amplitude"].get<double>());
    });
    if (j.contains("declared_mu")) s = s.with_declared_mu(j["declared_mu"].get<double>());
    return s;
  }

  std::vector<MetricSchedule> metric_list(const json& j, const std::string& path) const {
    std::vector<MetricSchedule> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      out.push_back(metric_schedule(j[i], path + "[" + std::to_string(i) + "]"));
    }
    return out;
  }

  /// `salt` separates the error sequences of one run.
  ErrorSequence error(const json& errors, const char* key, Index dim, std::uint64_t salt) const {
    if (!errors.contains(key) || errors[key]["type"] == "none") return ErrorSequence::zero(dim);
    const json& e = errors[key];
    return ErrorSequence::geometric(dim, e["total"].get<double>(), e["ratio"].get<double>(),
                                    seed_ * 1000003ull + salt);
  }

  template <class F>
  static auto guard(const std::string& path, F&& f) -> decltype(f()) {
    try {
      return f();
    } catch (const ConfigError&) {
      throw;
    } catch (const Error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }

 private:
  std::string base_dir_;
  std::uint64_t seed_;
};

// epsilon and gamma for an fb-type run; "auto" fills the gaps.
StepSchedule make_steps(const json& j, double beta, double mu) {
  const bool auto_gamma = j["gamma"].is_string();
  const bool auto_eps = j["epsilon"].is_string();
  const double lambda = j["lambda"].get<double>();
  if (auto_gamma && auto_eps && lambda == 1.0) return StepSchedule::default_for(beta, mu);
  double eps = auto_eps ? default_epsilon(beta, mu) : j["epsilon"].get<double>();
  double gamma = 0.0;
  if (auto_gamma) {
    gamma = std::isinf(beta) ? 1.0 : 0.5 * (eps + (2.0 * beta - eps) / mu);
  } else {
    gamma = j["gamma"].get<double>();
  }
  if (auto_eps) {
    // Largest admissible epsilon not above the default.
    const double room = std::min({gamma, lambda, std::isinf(beta) ? kInf : 2.0 * beta - gamma * mu});
    if (room > 0.0) eps = std::min(eps, room);
  }
  StepSchedule s = StepSchedule::constant(eps, gamma, lambda);
  s.description = "constant gamma = " + std::to_string(gamma) + ", lambda = " + std::to_string(lambda);
  return s;
}

RelaxationSchedule make_relaxation(const json& j, double beta) {
  const double lambda = j["lambda"].get<double>();
  double eps = 0.0;
  if (j["epsilon"].is_string()) {
    eps = std::min(0.5 * std::min(1.0, beta), lambda);
  } else {
    eps = j["epsilon"].get<double>();
  }
  return RelaxationSchedule::constant(eps, lambda);
}

double max_mu(const std::vector<MetricSchedule>& ms) {
  double mu = 0.0;
  for (const auto& s : ms) mu = std::max(mu, s.mu_bound);
  return mu;
}

json vec_json(const Vector& v) {
  json a = json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

json report_json(const ValidationReport& r) {
  json a = json::array();
  for (const auto& c : r.checks) {
    a.push_back({{"name", c.name},
                 {"passed", c.passed},
                 {"worst_margin", c.worst_margin},
                 {"offending_index", c.offending_index},
                 {"detail", c.detail}});
  }
  return a;
}

// Everything needed to run or validate one config.
struct Prepared {
  // fb
  std::optional<FBProblem> fb;
  std::optional<MetricSchedule> metric;
  std::optional<StepSchedule> steps;
  ErrorSchedule fb_errors;
  Vector x0;
  // strong
  std::optional<StronglyMonotoneProblem> strong;
  std::vector<SmoothedBlock> smoothed;
  Function f = ZeroFunction{};
  std::vector<ConstraintBlock> constraints;
  std::optional<ConvexSet> C;
  std::vector<MetricSchedule> dual_metrics;
  std::vector<Vector> v0;
  PrimalDualErrors pd_errors;
  // cocoercive
  std::optional<CocoerciveProblem> coco;
  std::optional<RelaxationSchedule> relax;
  CocoerciveErrors cc_errors;
  std::function<double(const Vector&)> h;
  Vector z;
};

std::vector<Vector> initial_duals(const Builder& b, const json& problem, const std::vector<Index>& rows) {
  std::vector<Vector> v;
  if (!problem.contains("v0")) {
    for (Index r : rows) v.push_back(Vector::Zero(r));
    return v;
  }
  const json& j = problem["v0"];
  if (j.size() != rows.size()) throw ConfigError("problem.v0: expected one vector per block");
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = "problem.v0[" + std::to_string(i) + "]";
    v.push_back(b.finite_vector(j[i], p));
    if (v.back().size() != rows[i]) throw ConfigError(p + ": wrong dimension");
  }
  return v;
}

std::vector<SmoothedBlock> smoothed_blocks(const Builder& b, const json& j, Index dim) {
  std::vector<SmoothedBlock> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = "problem.blocks[" + std::to_string(i) + "]";
    SmoothedBlock sb;
    sb.L = b.matrix(j[i]["L"], p + ".L");
    if (sb.L.cols() != dim) throw ConfigError(p + ".L: expected " + std::to_string(dim) + " columns");
    sb.g = b.function(j[i]["g"], p + ".g");
    if (j[i].contains("smoothing")) sb.smoothing = b.matrix(j[i]["smoothing"], p + ".smoothing");
    sb.r = j[i].contains("r") ? b.finite_vector(j[i]["r"], p + ".r") : Vector::Zero(sb.L.rows());
    out.push_back(std::move(sb));
  }
  return out;
}

void check_metric_count(const std::vector<MetricSchedule>& ms, std::size_t blocks) {
  if (ms.size() != blocks) {
    throw ConfigError("schedules.dual_metrics: expected " + std::to_string(blocks) +
                      " schedules, one per block");
  }
}

Prepared prepare(const ExperimentConfig& c) {
  const Builder b(c.base_dir, c.seed);
  const json& P = c.problem;
  const json& S = c.schedules;
  Prepared out;
  if (c.solver == SolverKind::fb) {
    FBProblem prob{b.op(P["A"], "problem.A"), b.coco(P["B"], "problem.B")};
    const Index n = prob.A.dim();
    if (prob.B.dim != n) throw ConfigError("problem.B: dimension differs from problem.A");
    out.x0 = P.contains("x0") ? b.finite_vector(P["x0"], "problem.x0") : Vector::Zero(n);
    if (out.x0.size() != n) throw ConfigError("problem.x0: wrong dimension");
    out.metric = b.metric_schedule(S["metric"], "schedules.metric");
    if (out.metric->dim != n) throw ConfigError("schedules.metric: wrong dimension");
    out.steps = make_steps(S["steps"], prob.B.beta, out.metric->mu_bound);
    out.fb_errors = {b.error(S["errors"], "a", n, 1), b.error(S["errors"], "b", n, 2)};
    out.fb = std::move(prob);
    return out;
  }
  out.z = b.finite_vector(P["z"], "problem.z");
  const Index n = out.z.size();
  if (c.solver == SolverKind::strong_pd) {
    out.dual_metrics = b.metric_list(S["dual_metrics"], "schedules.dual_metrics");
    if (c.form == "best_approximation") {
      out.C = b.set(P["C"], "problem.C");
      for (std::size_t i = 0; i < P["blocks"].size(); ++i) {
        const std::string p = "problem.blocks[" + std::to_string(i) + "]";
        const json& bj = P["blocks"][i];
        ConstraintBlock cb{b.matrix(bj["L"], p + ".L"), b.set(bj["D"], p + ".D"), Vector()};
        cb.r = bj.contains("r") ? b.finite_vector(bj["r"], p + ".r") : Vector::Zero(cb.L.rows());
        out.constraints.push_back(std::move(cb));
      }
      out.strong = Builder::guard("problem", [&] {
        return make_best_approximation_problem(out.z, *out.C, out.constraints);
      });
      check_metric_count(out.dual_metrics, out.constraints.size());
      out.steps = best_approximation_steps(*out.strong, out.dual_metrics);
    } else {
      out.f = b.function(P["f"], "problem.f");
      out.smoothed = smoothed_blocks(b, P["blocks"], n);
      out.strong = Builder::guard("problem", [&] {
        return make_strongly_convex_problem(out.z, out.f, out.smoothed);
      });
      check_metric_count(out.dual_metrics, out.smoothed.size());
      out.steps = make_steps(S["steps"], beta_dual(*out.strong), max_mu(out.dual_metrics));
    }
    std::vector<Index> rows;
    for (const auto& blk : out.strong->blocks) rows.push_back(blk.L.rows());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (out.dual_metrics[i].dim != rows[i]) {
        throw ConfigError("schedules.dual_metrics[" + std::to_string(i) + "]: wrong dimension");
      }
    }
    out.v0 = initial_duals(b, P, rows);
    out.pd_errors.a = b.error(S["errors"], "a", n, 1);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.pd_errors.b.push_back(b.error(S["errors"], "b", rows[i], 100 + i));
      out.pd_errors.d.push_back(b.error(S["errors"], "d", rows[i], 200 + i));
    }
    return out;
  }
  // cocoercive_pd / composite
  out.f = b.function(P["f"], "problem.f");
  const CocoerciveOperator grad_h = b.coco(P["grad_h"], "problem.grad_h");
  out.smoothed = smoothed_blocks(b, P["blocks"], n);
  out.coco = Builder::guard("problem", [&] { return make_composite_problem(out.z, out.f, grad_h, out.smoothed); });
  out.x0 = P.contains("x0") ? b.finite_vector(P["x0"], "problem.x0") : Vector::Zero(n);
  if (out.x0.size() != n) throw ConfigError("problem.x0: wrong dimension");
  out.metric = b.metric_schedule(S["primal_metric"], "schedules.primal_metric");
  if (out.metric->dim != n) throw ConfigError("schedules.primal_metric: wrong dimension");
  out.dual_metrics = b.metric_list(S["dual_metrics"], "schedules.dual_metrics");
  check_metric_count(out.dual_metrics, out.smoothed.size());
  std::vector<Index> rows;
  for (const auto& blk : out.coco->blocks) rows.push_back(blk.L.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (out.dual_metrics[i].dim != rows[i]) {
      throw ConfigError("schedules.dual_metrics[" + std::to_string(i) + "]: wrong dimension");
    }
  }
  out.v0 = initial_duals(b, P, rows);
  out.relax = make_relaxation(S["relaxation"], beta_primal_dual(*out.coco));
  out.cc_errors.a = b.error(S["errors"], "a", n, 1);
  out.cc_errors.c = b.error(S["errors"], "c", n, 3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.cc_errors.b.push_back(b.error(S["errors"], "b", rows[i], 100 + i));
    out.cc_errors.d.push_back(b.error(S["errors"], "d", rows[i], 200 + i));
  }
  // h itself, when grad_h pins it down up to a constant.
  const json& gh = P["grad_h"];
  if (gh["type"] == "zero") {
    out.h = [](const Vector&) { return 0.0; };
  } else if (gh["type"] == "least_squares") {
    const Matrix M = b.matrix(gh["M"], "problem.grad_h.M");
    const Vector r = b.finite_vector(gh["b"], "problem.grad_h.b");
    out.h = [M, r](const Vector& x) { return 0.5 * (M * x - r).squaredNorm(); };
  } else {
    const Matrix M = b.matrix(gh["M"], "problem.grad_h.M");
    const Vector q = gh.contains("q") ? b.finite_vector(gh["q"], "problem.grad_h.q") : Vector::Zero(M.rows());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, M.cwiseAbs().maxCoeff())) {
      out.h = [M, q](const Vector& x) { return 0.5 * x.dot(M * x) + q.dot(x); };
    }
  }
  return out;
}

// L x in r + D as rows of a QP; nullopt when D is not polyhedral.
bool add_polyhedral(const ConvexSet& D, const Matrix& L, const Vector& r, QPConstraints& qc) {
  if (const auto* h = std::get_if<HalfSpace>(&D)) {
    qc.halfspaces.push_back({L.transpose() * h->normal, h->offset + h->normal.dot(r)});
  } else if (const auto* bx = std::get_if<Box>(&D)) {
    const bool identity = L.rows() == L.cols() && L.isIdentity(0.0);
    if (identity) {
      qc.boxes.push_back({bx->lower + r, bx->upper + r});
    } else {
      for (Index i = 0; i < L.rows(); ++i) {
        if (std::isfinite(bx->upper(i))) qc.halfspaces.push_back({L.row(i).transpose(), bx->upper(i) + r(i)});
        if (std::isfinite(bx->lower(i))) qc.halfspaces.push_back({-L.row(i).transpose(), -bx->lower(i) - r(i)});
      }
    }
  } else if (const auto* af = std::get_if<AffineSet>(&D)) {
    qc.affine.push_back({af->A * L, af->b + af->A * r});
  } else if (const auto* s = std::get_if<Singleton>(&D)) {
    qc.affine.push_back({L, s->point + r});
  } else if (!std::holds_alternative<WholeSpace>(D)) {
    return false;
  }
  return true;
}

std::optional<Vector> qp_reference(const Prepared& pr, std::string& note) {
  const Index n = pr.z.size();
  QPConstraints qc;
  if (!add_polyhedral(*pr.C, Matrix::Identity(n, n), Vector::Zero(n), qc)) {
    note = "qp_oracle: C is not polyhedral";
    return std::nullopt;
  }
  for (const auto& cb : pr.constraints) {
    if (!add_polyhedral(cb.D, cb.L, cb.r, qc)) {
      note = "qp_oracle: a constraint set is not polyhedral";
      return std::nullopt;
    }
  }
  try {
    return qp_oracle(Matrix::Identity(n, n), -pr.z, qc).point;
  } catch (const OracleError& e) {
    note = e.what();
    return std::nullopt;
  }
}

std::int64_t n_check_for(const ExperimentConfig& c) { return c.stop.max_iter + 1; }

ValidationReport validate_prepared(const ExperimentConfig& c, const Prepared& pr) {
  const std::int64_t n_check = n_check_for(c);
  if (c.solver == SolverKind::fb) {
    return validate_fb_hypotheses(*pr.metric, *pr.steps, pr.fb->B.beta, n_check);
  }
  if (c.solver == SolverKind::strong_pd) {
    ValidationReport r = strong_duality_report(*pr.strong, pr.dual_metrics, *pr.steps, n_check);
    if (c.form == "best_approximation") r.add(step_norm_condition(*pr.strong, pr.dual_metrics));
    return r;
  }
  return cocoercive_pd_report(*pr.coco, *pr.metric, pr.dual_metrics, *pr.relax, n_check);
}

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  f << s;
}

}  // namespace

ValidationReport validate_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = apply_overrides(config, options);
  return validate_prepared(c, prepare(c));
}

ExperimentOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  const ExperimentConfig c = apply_overrides(config, options);
  const Prepared pr = prepare(c);
  ExperimentOutcome out;
  json summary;
  summary["name"] = c.name;
  summary["solver"] = to_string(c.solver);
  summary["form"] = c.form;
  summary["seed"] = c.seed;
  summary["policy"] = c.policy == Policy::strict ? "strict" : "warn";

  std::optional<Vector> reference;
  std::string ref_note;
  if (c.reference.is_array()) {
    reference = Builder(c.base_dir, c.seed).finite_vector(c.reference, "reference");
  } else if (c.reference.is_object() && c.reference["method"] == "reference_fb") {
    try {
      const double beta = pr.fb->B.beta;
      const double gamma = c.reference["gamma"].is_number() ? c.reference["gamma"].get<double>()
                           : std::isinf(beta)                 ? 1.0
                                                              : beta;
      reference = reference_fb(*pr.fb, gamma, Vector::Zero(pr.fb->A.dim()),
                               c.reference["iterations"].get<std::int64_t>())
                      .point;
    } catch (const Error& e) {
      ref_note = e.what();
    }
  } else if (c.reference.is_object()) {
    reference = qp_reference(pr, ref_note);
  }

  try {
    if (c.solver == SolverKind::fb) {
      FBOptions o;
      o.errors = pr.fb_errors;
      o.stop = c.stop;
      o.policy = c.policy;
      o.record_iterates = false;
      if (reference && reference->size() == pr.fb->A.dim()) o.reference = reference;
      FBResult r = fb_solve(*pr.fb, *pr.metric, *pr.steps, pr.x0, o);
      out.x = r.x;
      out.trace = std::move(r.trace);
    } else if (c.solver == SolverKind::strong_pd) {
      PrimalDualOptions o;
      o.errors = pr.pd_errors;
      o.stop = c.stop;
      o.policy = c.policy;
      o.record_iterates = false;
      PrimalDualResult r;
      if (c.form == "best_approximation") {
        r = solve_best_approximation(pr.z, *pr.C, pr.constraints, pr.dual_metrics, pr.v0, o);
      } else {
        r = solve_strongly_convex_min(pr.z, pr.f, pr.smoothed, pr.dual_metrics, *pr.steps, pr.v0, o);
        const double primal = strongly_convex_primal_objective(pr.z, pr.f, pr.smoothed, r.x);
        const auto dual = strongly_convex_dual_objective(pr.z, pr.f, pr.smoothed, r.v);
        summary["primal_objective"] = primal;
        if (dual) summary["duality_gap"] = primal + *dual;
      }
      json v = json::array();
      for (const auto& vi : r.v) v.push_back(vec_json(vi));
      summary["v"] = v;
      out.x = r.x;
      out.trace = std::move(r.trace);
    } else {
      CocoerciveOptions o;
      o.errors = pr.cc_errors;
      o.stop = c.stop;
      o.policy = c.policy;
      o.record_iterates = false;
      PrimalDualResult r = solve_cocoercive_pd(*pr.coco, *pr.metric, pr.dual_metrics, *pr.relax, pr.x0, pr.v0, o);
      summary["kkt_residual"] = kkt_residual(*pr.coco, r.x, r.v);
      if (pr.h) summary["objective"] = composite_objective(pr.z, pr.f, pr.h, pr.smoothed, r.x);
      out.x = r.x;
      out.trace = std::move(r.trace);
    }
  } catch (const ValidationError& e) {
    out.exit_code = kExitValidation;
    out.validation = e.report();
    summary["termination"] = "refused";
    summary["exit_code"] = kExitValidation;
    summary["validation"] = report_json(e.report());
    out.summary = summary;
    return out;
  }

  const SolveTrace& t = *out.trace;
  out.validation = t.validation;
  out.exit_code = exit_code_for(t.termination);
  summary["termination"] = to_string(t.termination);
  summary["exit_code"] = out.exit_code;
  summary["final_residual"] = t.final_residual;
  summary["iterations"] = t.iterations;
  summary["wall_time_ns"] = options.deterministic ? 0 : t.wall_time_ns;
  summary["validation"] = report_json(t.validation);
  summary["assumptions"] = t.assumptions;
  summary["x"] = vec_json(out.x);
  if (reference) {
    summary["reference"] = vec_json(*reference);
    if (reference->size() == out.x.size()) summary["reference_distance"] = (out.x - *reference).norm();
  }
  if (!ref_note.empty()) summary["reference_note"] = ref_note;
  out.summary = summary;

  if (options.write_outputs) {
    const fs::path dir(options.out_dir);
    fs::create_directories(dir);
    const fs::path tp = dir / c.trace_path;
    const fs::path sp = dir / c.summary_path;
    if (tp.has_parent_path()) fs::create_directories(tp.parent_path());
    if (sp.has_parent_path()) fs::create_directories(sp.parent_path());
    write_csv(t, tp.string(), options.deterministic);
    write_text(sp, summary.dump(2) + "\n");
    out.trace_file = tp.string();
    out.summary_file = sp.string();
  }
  return out;
}

std::string default_config_dir() {
  if (const char* env = std::getenv("VMFB_CONFIG_DIR")) return env;
  return VMFB_CONFIG_DIR;
}

std::vector<FixtureInfo> list_fixtures(const std::string& dir) {
  std::vector<FixtureInfo> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".cfg") continue;
    FixtureInfo info;
    info.path = e.path().string();
    info.name = e.path().stem().string();
    try {
      const ExperimentConfig c = load_config(info.path);
      info.solver = to_string(c.solver) + "/" + c.form;
      info.description = c.description;
    } catch (const Error& err) {
      info.solver = "?";
      info.description = std::string("unreadable: ") + err.what();
    }
    out.push_back(std::move(info));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

std::string resolve_config(const std::string& name_or_path, const std::string& dir) {
  if (fs::exists(name_or_path)) return name_or_path;
  for (const std::string& cand : {name_or_path, name_or_path + ".cfg"}) {
    const fs::path p = fs::path(dir) / cand;
    if (fs::exists(p)) return p.string();
  }
  throw ConfigError(name_or_path + ": no such config file or bundled fixture");
}

}  // namespace vmfb
