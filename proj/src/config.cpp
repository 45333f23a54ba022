#include "vmfb/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace vmfb {

using json = nlohmann::json;

std::string to_string(SolverKind k) {
  switch (k) {
    case SolverKind::fb:
      return "fb";
    case SolverKind::strong_pd:
      return "strong_pd";
    case SolverKind::cocoercive_pd:
      return "cocoercive_pd";
  }
  return "unknown";
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError((path.empty() ? "config" : path) + ": " + msg);
}

// Strict object reader: every key must be consumed before done().
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) fail(path_, "expected an object");
  }

  bool has(const std::string& k) const { return j_.contains(k); }
  std::string at(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  const std::string& path() const { return path_; }

  const json& req(const std::string& k) {
    seen_.insert(k);
    if (!j_.contains(k)) fail(path_, "missing field '" + k + "'");
    return j_.at(k);
  }
  const json* opt(const std::string& k) {
    seen_.insert(k);
    return j_.contains(k) ? &j_.at(k) : nullptr;
  }
  void done() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) fail(at(item.key()), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

double number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) fail(path, "expected a finite number");
  return v;
}

double positive(const json& j, const std::string& path) {
  const double v = number(j, path);
  if (!(v > 0.0)) fail(path, "expected a positive number");
  return v;
}

std::int64_t integer(const json& j, const std::string& path, std::int64_t lo) {
  if (!j.is_number_integer()) fail(path, "expected an integer");
  const std::int64_t v = j.get<std::int64_t>();
  if (v < lo) fail(path, "expected an integer >= " + std::to_string(lo));
  return v;
}

std::string string(const json& j, const std::string& path) {
  if (!j.is_string()) fail(path, "expected a string");
  return j.get<std::string>();
}

std::string choice(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  const std::string s = string(j, path);
  std::string list;
  for (const char* a : allowed) {
    if (s == a) return s;
    list += list.empty() ? a : std::string(", ") + a;
  }
  fail(path, "'" + s + "' is not one of {" + list + "}");
}

json number_or_auto(const json* j, const std::string& path) {
  if (!j) return "auto";
  if (j->is_string()) {
    if (j->get<std::string>() != "auto") fail(path, "expected a number or \"auto\"");
    return "auto";
  }
  return number(*j, path);
}

// Single-key generator objects share this check.
std::string generator_key(const json& j, const std::string& path,
                          std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    if (j.contains(k)) return k;
  }
  std::string list;
  for (const char* k : keys) list += list.empty() ? k : std::string(", ") + k;
  fail(path, "expected a list or an object with one of {" + list + "}");
}

json vector_desc(const json& j, const std::string& path) {
  if (j.is_array()) {
    if (j.empty()) fail(path, "empty vector");
    json out = json::array();
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (j[i].is_string()) {
        const std::string s = j[i].get<std::string>();
        if (s != "inf" && s != "-inf") fail(p, "expected a number, \"inf\" or \"-inf\"");
        out.push_back(s);
      } else {
        out.push_back(number(j[i], p));
      }
    }
    return out;
  }
  if (!j.is_object()) fail(path, "expected a vector");
  Fields f(j, path);
  const std::string key = generator_key(j, path, {"file", "constant", "random"});
  json out;
  if (key == "file") {
    out["file"] = string(f.req("file"), f.at("file"));
  } else if (key == "constant") {
    out["constant"] = number(f.req("constant"), f.at("constant"));
    out["dim"] = integer(f.req("dim"), f.at("dim"), 1);
  } else {
    Fields r(f.req("random"), f.at("random"));
    json g;
    g["dim"] = integer(r.req("dim"), r.at("dim"), 1);
    const json* s = r.opt("scale");
    g["scale"] = s ? positive(*s, r.at("scale")) : 1.0;
    r.done();
    out["random"] = g;
  }
  f.done();
  return out;
}

json matrix_desc(const json& j, const std::string& path) {
  if (j.is_array()) {
    if (j.empty()) fail(path, "empty matrix");
    json out = json::array();
    std::size_t cols = 0;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string p = path + "[" + std::to_string(i) + "]";
      if (!j[i].is_array() || j[i].empty()) fail(p, "expected a non-empty row");
      if (i == 0) cols = j[i].size();
      if (j[i].size() != cols) fail(p, "rows have different lengths");
      json row = json::array();
      for (std::size_t k = 0; k < cols; ++k) {
        row.push_back(number(j[i][k], p + "[" + std::to_string(k) + "]"));
      }
      out.push_back(row);
    }
    return out;
  }
  if (!j.is_object()) fail(path, "expected a matrix");
  Fields f(j, path);
  const std::string key = generator_key(j, path, {"file", "identity", "diagonal", "random", "random_spd"});
  json out;
  if (key == "file") {
    out["file"] = string(f.req("file"), f.at("file"));
  } else if (key == "identity") {
    out["identity"] = integer(f.req("identity"), f.at("identity"), 1);
    const json* s = f.opt("scale");
    out["scale"] = s ? number(*s, f.at("scale")) : 1.0;
  } else if (key == "diagonal") {
    out["diagonal"] = vector_desc(f.req("diagonal"), f.at("diagonal"));
  } else if (key == "random") {
    Fields r(f.req("random"), f.at("random"));
    json g;
    g["rows"] = integer(r.req("rows"), r.at("rows"), 1);
    g["cols"] = integer(r.req("cols"), r.at("cols"), 1);
    const json* s = r.opt("scale");
    g["scale"] = s ? positive(*s, r.at("scale")) : 1.0;
    r.done();
    out["random"] = g;
  } else {
    Fields r(f.req("random_spd"), f.at("random_spd"));
    json g;
    g["dim"] = integer(r.req("dim"), r.at("dim"), 1);
    const json* lo = r.opt("min_eig");
    const json* hi = r.opt("max_eig");
    g["min_eig"] = lo ? positive(*lo, r.at("min_eig")) : 1.0;
    g["max_eig"] = hi ? positive(*hi, r.at("max_eig")) : 10.0;
    if (g["max_eig"].get<double>() < g["min_eig"].get<double>()) {
      fail(r.path(), "max_eig < min_eig");
    }
    r.done();
    out["random_spd"] = g;
  }
  f.done();
  return out;
}

json set_desc(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type =
      choice(f.req("type"), f.at("type"), {"halfspace", "box", "affine", "ball", "singleton", "whole"});
  json out{{"type", type}};
  if (type == "halfspace") {
    out["normal"] = vector_desc(f.req("normal"), f.at("normal"));
    const json* o = f.opt("offset");
    out["offset"] = o ? number(*o, f.at("offset")) : 0.0;
  } else if (type == "box") {
    out["lower"] = vector_desc(f.req("lower"), f.at("lower"));
    out["upper"] = vector_desc(f.req("upper"), f.at("upper"));
  } else if (type == "affine") {
    out["A"] = matrix_desc(f.req("A"), f.at("A"));
    out["b"] = vector_desc(f.req("b"), f.at("b"));
  } else if (type == "ball") {
    out["center"] = vector_desc(f.req("center"), f.at("center"));
    const json* r = f.opt("radius");
    out["radius"] = r ? positive(*r, f.at("radius")) : 1.0;
  } else if (type == "singleton") {
    out["point"] = vector_desc(f.req("point"), f.at("point"));
  } else {
    out["dim"] = integer(f.req("dim"), f.at("dim"), 1);
  }
  f.done();
  return out;
}

json scalar_desc(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = choice(f.req("type"), f.at("type"), {"abs", "upper_bound", "quadratic"});
  json out{{"type", type}};
  if (type == "abs") {
    const json* w = f.opt("weight");
    out["weight"] = w ? number(*w, f.at("weight")) : 1.0;
  } else if (type == "upper_bound") {
    const json* b = f.opt("bound");
    out["bound"] = b ? number(*b, f.at("bound")) : 0.0;
  } else {
    const json* a = f.opt("a");
    const json* b = f.opt("b");
    out["a"] = a ? number(*a, f.at("a")) : 1.0;
    out["b"] = b ? number(*b, f.at("b")) : 0.0;
  }
  f.done();
  return out;
}

json function_desc(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = choice(f.req("type"), f.at("type"),
                                  {"zero", "indicator", "support", "l1", "quadratic", "scalar_composition"});
  json out{{"type", type}};
  if (type == "zero") {
    out["dim"] = integer(f.req("dim"), f.at("dim"), 1);
  } else if (type == "indicator" || type == "support") {
    out["set"] = set_desc(f.req("set"), f.at("set"));
  } else if (type == "l1") {
    out["weights"] = vector_desc(f.req("weights"), f.at("weights"));
  } else if (type == "quadratic") {
    out["Q"] = matrix_desc(f.req("Q"), f.at("Q"));
    if (const json* q = f.opt("q")) out["q"] = vector_desc(*q, f.at("q"));
    const json* c = f.opt("c");
    out["c"] = c ? number(*c, f.at("c")) : 0.0;
  } else {
    out["u"] = vector_desc(f.req("u"), f.at("u"));
    out["phi"] = scalar_desc(f.req("phi"), f.at("phi"));
  }
  f.done();
  return out;
}

json operator_desc(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = choice(f.req("type"), f.at("type"), {"subdifferential", "linear", "zero"});
  json out{{"type", type}};
  if (type == "subdifferential") {
    out["f"] = function_desc(f.req("f"), f.at("f"));
  } else if (type == "linear") {
    out["M"] = matrix_desc(f.req("M"), f.at("M"));
    if (const json* q = f.opt("q")) out["q"] = vector_desc(*q, f.at("q"));
  } else {
    out["dim"] = integer(f.req("dim"), f.at("dim"), 1);
  }
  f.done();
  return out;
}

json cocoercive_desc(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = choice(f.req("type"), f.at("type"), {"zero", "affine", "least_squares"});
  json out{{"type", type}};
  if (type == "zero") {
    out["dim"] = integer(f.req("dim"), f.at("dim"), 1);
  } else if (type == "affine") {
    out["M"] = matrix_desc(f.req("M"), f.at("M"));
    if (const json* q = f.opt("q")) out["q"] = vector_desc(*q, f.at("q"));
    if (const json* b = f.opt("beta")) out["beta"] = positive(*b, f.at("beta"));
  } else {
    out["M"] = matrix_desc(f.req("M"), f.at("M"));
    out["b"] = vector_desc(f.req("b"), f.at("b"));
  }
  f.done();
  return out;
}

json metric_schedule_desc(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = choice(f.req("type"), f.at("type"), {"constant", "perturbed"});
  json out{{"type", type}};
  if (type == "constant") {
    out["U"] = matrix_desc(f.req("U"), f.at("U"));
  } else {
    out["base"] = matrix_desc(f.req("base"), f.at("base"));
    out["D"] = matrix_desc(f.req("D"), f.at("D"));
    const double rate = number(f.req("rate"), f.at("rate"));
    if (!(rate >= 0.0 && rate < 1.0)) fail(f.at("rate"), "expected a rate in [0, 1[");
    out["rate"] = rate;
    const json* a = f.opt("amplitude");
    out["amplitude"] = a ? number(*a, f.at("amplitude")) : 1.0;
  }
  if (const json* mu = f.opt("declared_mu")) out["declared_mu"] = positive(*mu, f.at("declared_mu"));
  f.done();
  return out;
}

json metric_list_desc(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty list of metric schedules");
  json out = json::array();
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(metric_schedule_desc(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json steps_desc(const json* j, const std::string& path) {
  static const json empty = json::object();
  Fields f(j ? *j : empty, path);
  json out;
  out["gamma"] = number_or_auto(f.opt("gamma"), f.at("gamma"));
  out["epsilon"] = number_or_auto(f.opt("epsilon"), f.at("epsilon"));
  const json* l = f.opt("lambda");
  out["lambda"] = l ? number(*l, f.at("lambda")) : 1.0;
  f.done();
  return out;
}

json relaxation_desc(const json* j, const std::string& path) {
  static const json empty = json::object();
  Fields f(j ? *j : empty, path);
  json out;
  out["epsilon"] = number_or_auto(f.opt("epsilon"), f.at("epsilon"));
  const json* l = f.opt("lambda");
  out["lambda"] = l ? number(*l, f.at("lambda")) : 1.0;
  f.done();
  return out;
}

json error_seq_desc(const json& j, const std::string& path) {
  Fields f(j, path);
  const std::string type = choice(f.req("type"), f.at("type"), {"none", "geometric"});
  json out{{"type", type}};
  if (type == "geometric") {
    const double total = number(f.req("total"), f.at("total"));
    if (total < 0.0) fail(f.at("total"), "expected total >= 0");
    out["total"] = total;
    const json* r = f.opt("ratio");
    const double ratio = r ? number(*r, f.at("ratio")) : 0.5;
    if (!(ratio >= 0.0 && ratio < 1.0)) fail(f.at("ratio"), "expected a ratio in [0, 1[");
    out["ratio"] = ratio;
  }
  f.done();
  return out;
}

json errors_desc(const json* j, const std::string& path, std::initializer_list<const char*> keys) {
  json out = json::object();
  if (!j) return out;
  Fields f(*j, path);
  for (const char* k : keys) {
    if (const json* e = f.opt(k)) out[k] = error_seq_desc(*e, f.at(k));
  }
  f.done();
  return out;
}

json vector_list_desc(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a list of vectors");
  json out = json::array();
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(vector_desc(j[i], path + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json smoothed_blocks_desc(const json& j, const std::string& path, bool allow_empty) {
  if (!j.is_array() || (!allow_empty && j.empty())) fail(path, "expected a non-empty list of blocks");
  json out = json::array();
  for (std::size_t i = 0; i < j.size(); ++i) {
    Fields f(j[i], path + "[" + std::to_string(i) + "]");
    json b;
    b["L"] = matrix_desc(f.req("L"), f.at("L"));
    b["g"] = function_desc(f.req("g"), f.at("g"));
    if (const json* m = f.opt("smoothing")) b["smoothing"] = matrix_desc(*m, f.at("smoothing"));
    if (const json* r = f.opt("r")) b["r"] = vector_desc(*r, f.at("r"));
    f.done();
    out.push_back(b);
  }
  return out;
}

json problem_desc(const json& j, SolverKind solver, const std::string& form) {
  Fields f(j, "problem");
  json out;
  if (solver == SolverKind::fb) {
    out["A"] = operator_desc(f.req("A"), f.at("A"));
    out["B"] = cocoercive_desc(f.req("B"), f.at("B"));
    if (const json* x0 = f.opt("x0")) out["x0"] = vector_desc(*x0, f.at("x0"));
  } else if (form == "best_approximation") {
    out["z"] = vector_desc(f.req("z"), f.at("z"));
    out["C"] = set_desc(f.req("C"), f.at("C"));
    const json& bl = f.req("blocks");
    if (!bl.is_array() || bl.empty()) fail(f.at("blocks"), "expected a non-empty list of blocks");
    json blocks = json::array();
    for (std::size_t i = 0; i < bl.size(); ++i) {
      Fields g(bl[i], f.at("blocks") + "[" + std::to_string(i) + "]");
      json b;
      b["L"] = matrix_desc(g.req("L"), g.at("L"));
      b["D"] = set_desc(g.req("D"), g.at("D"));
      if (const json* r = g.opt("r")) b["r"] = vector_desc(*r, g.at("r"));
      g.done();
      blocks.push_back(b);
    }
    out["blocks"] = blocks;
    if (const json* v0 = f.opt("v0")) out["v0"] = vector_list_desc(*v0, f.at("v0"));
  } else {
    out["z"] = vector_desc(f.req("z"), f.at("z"));
    out["f"] = function_desc(f.req("f"), f.at("f"));
    const bool composite = solver == SolverKind::cocoercive_pd;
    if (composite) {
      out["grad_h"] = cocoercive_desc(f.req("grad_h"), f.at("grad_h"));
      if (const json* x0 = f.opt("x0")) out["x0"] = vector_desc(*x0, f.at("x0"));
    }
    out["blocks"] = smoothed_blocks_desc(f.req("blocks"), f.at("blocks"), composite);
    if (const json* v0 = f.opt("v0")) out["v0"] = vector_list_desc(*v0, f.at("v0"));
  }
  f.done();
  return out;
}

json schedules_desc(const json& j, SolverKind solver, const std::string& form) {
  Fields f(j, "schedules");
  json out;
  if (solver == SolverKind::fb) {
    out["metric"] = metric_schedule_desc(f.req("metric"), f.at("metric"));
    out["steps"] = steps_desc(f.opt("steps"), f.at("steps"));
    out["errors"] = errors_desc(f.opt("errors"), f.at("errors"), {"a", "b"});
  } else if (solver == SolverKind::strong_pd) {
    out["dual_metrics"] = metric_list_desc(f.req("dual_metrics"), f.at("dual_metrics"));
    if (form == "strongly_convex") {
      out["steps"] = steps_desc(f.opt("steps"), f.at("steps"));
    } else if (f.has("steps")) {
      fail(f.at("steps"), "best_approximation runs with gamma = lambda = 1; steps are not configurable");
    }
    out["errors"] = errors_desc(f.opt("errors"), f.at("errors"), {"a", "b", "d"});
  } else {
    out["primal_metric"] = metric_schedule_desc(f.req("primal_metric"), f.at("primal_metric"));
    const json* dm = f.opt("dual_metrics");
    out["dual_metrics"] = dm ? (dm->empty() ? json::array() : metric_list_desc(*dm, f.at("dual_metrics")))
                             : json::array();
    out["relaxation"] = relaxation_desc(f.opt("relaxation"), f.at("relaxation"));
    out["errors"] = errors_desc(f.opt("errors"), f.at("errors"), {"a", "b", "c", "d"});
  }
  f.done();
  return out;
}

json reference_desc(const json* j, SolverKind solver, const std::string& form) {
  if (!j || j->is_null()) return nullptr;
  if (j->is_array()) return vector_desc(*j, "reference");
  Fields f(*j, "reference");
  const std::string method = choice(f.req("method"), f.at("method"), {"reference_fb", "qp_oracle"});
  json out{{"method", method}};
  if (method == "reference_fb") {
    if (solver != SolverKind::fb) fail(f.at("method"), "reference_fb applies to the fb solver only");
    const json* g = f.opt("gamma");
    out["gamma"] = number_or_auto(g, f.at("gamma"));
    if (out["gamma"].is_number() && !(out["gamma"].get<double>() > 0.0)) {
      fail(f.at("gamma"), "expected a positive number");
    }
    const json* it = f.opt("iterations");
    out["iterations"] = it ? integer(*it, f.at("iterations"), 1) : 1000000;
  } else if (form != "best_approximation") {
    fail(f.at("method"), "qp_oracle applies to best_approximation problems only");
  }
  f.done();
  return out;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(text, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    const std::size_t upto = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
    for (std::size_t i = 0; i < upto; ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " +
                      e.what());
  }
  ExperimentConfig c;
  c.base_dir = base_dir;
  // Field paths are rooted at the document: "stop.tol", "problem.A.f".
  Fields f(j, "");
  c.name = string(f.req("name"), f.at("name"));
  if (c.name.empty()) fail(f.at("name"), "empty name");
  if (const json* d = f.opt("description")) c.description = string(*d, f.at("description"));
  const std::string solver = choice(f.req("solver"), f.at("solver"), {"fb", "strong_pd", "cocoercive_pd"});
  c.solver = solver == "fb" ? SolverKind::fb
             : solver == "strong_pd" ? SolverKind::strong_pd
                                     : SolverKind::cocoercive_pd;
  const json* form = f.opt("form");
  if (c.solver == SolverKind::fb) {
    c.form = form ? choice(*form, f.at("form"), {"inclusion"}) : "inclusion";
  } else if (c.solver == SolverKind::strong_pd) {
    c.form = form ? choice(*form, f.at("form"), {"strongly_convex", "best_approximation"})
                  : "strongly_convex";
  } else {
    c.form = form ? choice(*form, f.at("form"), {"composite"}) : "composite";
  }
  if (const json* s = f.opt("seed")) c.seed = static_cast<std::uint64_t>(integer(*s, f.at("seed"), 0));
  if (const json* p = f.opt("policy")) {
    c.policy = choice(*p, f.at("policy"), {"strict", "warn"}) == "strict" ? Policy::strict : Policy::warn;
  }
  if (const json* s = f.opt("stop")) {
    Fields st(*s, f.at("stop"));
    if (const json* t = st.opt("tol")) c.stop.tol = positive(*t, st.at("tol"));
    if (const json* m = st.opt("max_iter")) c.stop.max_iter = integer(*m, st.at("max_iter"), 0);
    st.done();
  }
  c.problem = problem_desc(f.req("problem"), c.solver, c.form);
  c.schedules = schedules_desc(f.req("schedules"), c.solver, c.form);
  c.reference = reference_desc(f.opt("reference"), c.solver, c.form);
  c.trace_path = c.name + ".csv";
  c.summary_path = c.name + ".summary.json";
  if (const json* o = f.opt("outputs")) {
    Fields out(*o, f.at("outputs"));
    if (const json* t = out.opt("trace")) c.trace_path = string(*t, out.at("trace"));
    if (const json* s = out.opt("summary")) c.summary_path = string(*s, out.at("summary"));
    out.done();
  }
  f.done();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::filesystem::path p(path);
  const std::string dir = p.has_parent_path() ? p.parent_path().string() : ".";
  try {
    return parse_config(ss.str(), dir);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  j["description"] = c.description;
  j["solver"] = to_string(c.solver);
  j["form"] = c.form;
  j["seed"] = c.seed;
  j["policy"] = c.policy == Policy::strict ? "strict" : "warn";
  j["stop"] = {{"tol", c.stop.tol}, {"max_iter", c.stop.max_iter}};
  j["problem"] = c.problem;
  j["schedules"] = c.schedules;
  if (!c.reference.is_null()) j["reference"] = c.reference;
  j["outputs"] = {{"trace", c.trace_path}, {"summary", c.summary_path}};
  return j;
}

std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b) { return to_json(a) == to_json(b); }

}  // namespace vmfb
