#include "doctest.h"

#include "vmfb/experiment.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace vmfb;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"({
  "name": "tiny",
  "solver": "fb",
  "problem": {
    "A": {"type": "zero", "dim": 2},
    "B": {"type": "affine", "M": {"identity": 2}, "q": [-1, 2]},
    "x0": [0, 0]
  },
  "schedules": {"metric": {"type": "constant", "U": {"identity": 2}}, "steps": {"gamma": "auto", "lambda": 1.0}}
})";

std::string error_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string s, const std::string& from, const std::string& to) {
  const auto at = s.find(from);
  REQUIRE(at != std::string::npos);
  return s.replace(at, from.size(), to);
}

fs::path scratch_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("vmfb_test_config_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("minimal config parses with defaults") {
  const ExperimentConfig c = parse_config(kMinimal);
  CHECK(c.name == "tiny");
  CHECK(c.solver == SolverKind::fb);
  CHECK(c.form == "inclusion");
  CHECK(c.policy == Policy::strict);
  CHECK(c.trace_path == "tiny.csv");
  CHECK(c.summary_path == "tiny.summary.json");
  CHECK(c.reference.is_null());
  const ExperimentOutcome o = run_experiment(c, {.write_outputs = false});
  CHECK(o.exit_code == kExitConverged);
  CHECK((o.x - Vector{{1.0, -2.0}}).norm() < 1e-7);
}

TEST_CASE("every bundled config survives a round trip") {
  const auto fixtures = list_fixtures();
  CHECK(fixtures.size() >= 13);
  for (const auto& fx : fixtures) {
    CAPTURE(fx.name);
    CHECK(fx.solver != "?");
    const ExperimentConfig a = load_config(fx.path);
    const std::string text = serialize_config(a);
    const ExperimentConfig b = parse_config(text, a.base_dir);
    CHECK(same_config(a, b));
    CHECK(serialize_config(b) == text);
    CHECK(to_json(a) == to_json(b));
  }
}

TEST_CASE("schema violations name the field") {
  CHECK(error_of(replace(kMinimal, "\"name\": \"tiny\",", "\"name\": \"tiny\", \"bogus\": 1,"))
            .find("bogus: unknown field") != std::string::npos);
  CHECK(error_of(replace(kMinimal, "\"lambda\": 1.0", "\"lambda\": 1.0, \"extra\": true"))
            .find("schedules.steps.extra: unknown field") != std::string::npos);
  CHECK(error_of(replace(kMinimal, "\"solver\": \"fb\"", "\"solver\": \"admm\"")).find("solver: ") !=
        std::string::npos);
  CHECK(error_of(replace(kMinimal, "\"x0\": [0, 0]", "\"x0\": [0, \"a\"]")).find("x0[1]") != std::string::npos);
  CHECK(error_of(replace(kMinimal, "\"name\": \"tiny\",", "")).find("missing field 'name'") != std::string::npos);
  CHECK(error_of(replace(kMinimal, "{\"identity\": 2}, \"q\"", "[[1, 0], [0]], \"q\"")).find("rows have different lengths") !=
        std::string::npos);
}

TEST_CASE("syntax errors report line and column") {
  const std::string bad = "{\n  \"name\": \"x\",\n  oops\n}";
  const std::string e = error_of(bad);
  CHECK(e.find("line 3") != std::string::npos);
  CHECK(e.find("column") != std::string::npos);
  // Comments are allowed.
  CHECK(error_of(std::string("// note\n") + kMinimal).empty());
}

TEST_CASE("overrides") {
  const ExperimentConfig c = parse_config(kMinimal);
  RunOptions o;
  o.policy = Policy::warn;
  o.seed = 42;
  o.max_iter = 7;
  const ExperimentConfig d = apply_overrides(c, o);
  CHECK(d.policy == Policy::warn);
  CHECK(d.seed == 42);
  CHECK(d.stop.max_iter == 7);
  CHECK_FALSE(same_config(c, d));
  CHECK(same_config(c, apply_overrides(c, {})));
}

TEST_CASE("bundled experiments end with their documented exit codes") {
  const std::vector<std::pair<std::string, int>> expected{
      {"halfspace_projection", kExitConverged}, {"vi_box", kExitConverged},
      {"strong_qp", kExitConverged},            {"best_approximation", kExitConverged},
      {"composite_min", kExitConverged},        {"gamma_out_of_range", kExitValidation},
      {"mu_understated", kExitValidation},      {"infeasible_scaling", kExitValidation},
      {"divergent_warn", kExitDiverged},        {"tangent_disk", kExitMaxIterations}};
  for (const auto& [name, code] : expected) {
    CAPTURE(name);
    const ExperimentOutcome o = run_experiment(load_config(resolve_config(name)), {.write_outputs = false});
    CHECK(o.exit_code == code);
    CHECK(o.summary["exit_code"] == code);
    CHECK(o.trace.has_value() == (code != kExitValidation));
    if (code == kExitValidation) CHECK(o.summary["termination"] == "refused");
  }
}

TEST_CASE("outputs and determinism") {
  const fs::path d = scratch_dir("outputs");
  const ExperimentConfig c = load_config(resolve_config("lasso_variable_metric"));
  RunOptions o;
  o.out_dir = (d / "a").string();
  o.deterministic = true;
  const ExperimentOutcome a = run_experiment(c, o);
  o.out_dir = (d / "b").string();
  const ExperimentOutcome b = run_experiment(c, o);
  REQUIRE(fs::exists(a.trace_file));
  REQUIRE(fs::exists(a.summary_file));
  CHECK(slurp(a.trace_file) == slurp(b.trace_file));
  CHECK(slurp(a.summary_file) == slurp(b.summary_file));
  CHECK(slurp(a.trace_file).rfind(kTraceHeader, 0) == 0);

  // Strict refusal writes nothing.
  o.out_dir = (d / "refused").string();
  const ExperimentOutcome r = run_experiment(load_config(resolve_config("gamma_out_of_range")), o);
  CHECK(r.exit_code == kExitValidation);
  CHECK(r.trace_file.empty());
  CHECK((!fs::exists(d / "refused") || fs::is_empty(d / "refused")));
  fs::remove_all(d);
}

TEST_CASE("matrices from files resolve against the config directory") {
  const fs::path d = scratch_dir("files");
  {
    std::ofstream m(d / "M.txt");
    m << "2 0\n0 2\n";
  }
  const std::string text = replace(kMinimal, "{\"identity\": 2}, \"q\"", "{\"file\": \"M.txt\"}, \"q\"");
  {
    std::ofstream cfg(d / "from_file.cfg");
    cfg << text;
  }
  const ExperimentOutcome o = run_experiment(load_config((d / "from_file.cfg").string()), {.write_outputs = false});
  CHECK(o.exit_code == kExitConverged);
  CHECK((o.x - Vector{{0.5, -1.0}}).norm() < 1e-7);

  fs::remove(d / "M.txt");
  CHECK_THROWS_AS(run_experiment(load_config((d / "from_file.cfg").string()), {.write_outputs = false}), ConfigError);
  fs::remove_all(d);
}

TEST_CASE("fixture lookup") {
  const std::string p = resolve_config("vi_box");
  CHECK(fs::exists(p));
  CHECK(resolve_config("vi_box.cfg") == p);
  CHECK(resolve_config(p) == p);
  CHECK_THROWS_AS(resolve_config("no_such_fixture"), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/x.cfg"), ConfigError);
  bool found = false;
  for (const auto& f : list_fixtures()) found = found || (f.name == "tangent_disk" && f.solver == "strong_pd/best_approximation");
  CHECK(found);
}

TEST_CASE("validation without running") {
  CHECK(validate_experiment(load_config(resolve_config("composite_min"))).passed());
  const ValidationReport r = validate_experiment(load_config(resolve_config("mu_understated")));
  CHECK_FALSE(r.passed());
  CHECK(r.to_string().find("metric_upper_bound") != std::string::npos);
}
