// vmfb: run, validate and list forward-backward experiments.
//
// Exit codes: 0 converged (or all hypotheses pass for `validate`), 1 usage or
// config error, 2 strict validation failure, 3 divergence, 4 iteration limit.

#include "vmfb/experiment.hpp"

#include "CLI11.hpp"

#include <cmath>
#include <cstdio>
#include <iostream>

namespace {

struct Common {
  std::string config;
  std::string out_dir = ".";
  bool strict = false;
  bool warn = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_iter;
  bool deterministic = false;
};

void add_common(CLI::App* app, Common& c, bool with_outputs) {
  app->add_option("--config", c.config, "Config file or bundled fixture name")->required();
  auto* s = app->add_flag("--strict", c.strict, "Refuse runs whose hypotheses fail");
  auto* w = app->add_flag("--warn", c.warn, "Report failed hypotheses and run anyway");
  s->excludes(w);
  app->add_option("--seed", c.seed, "Seed for randomized fixture data");
  app->add_option("--max-iter-override", c.max_iter, "Replace stop.max_iter")->check(CLI::NonNegativeNumber);
  if (with_outputs) {
    app->add_option("--out-dir", c.out_dir, "Directory for the trace and summary");
    app->add_flag("--deterministic", c.deterministic, "Zero the timing columns");
  }
}

vmfb::RunOptions to_options(const Common& c) {
  vmfb::RunOptions o;
  o.out_dir = c.out_dir;
  if (c.strict) o.policy = vmfb::Policy::strict;
  if (c.warn) o.policy = vmfb::Policy::warn;
  o.seed = c.seed;
  o.max_iter = c.max_iter;
  o.deterministic = c.deterministic;
  return o;
}

void print_report(std::ostream& os, const vmfb::ValidationReport& r) {
  os << r.to_string();
  if (!r.to_string().empty() && r.to_string().back() != '\n') os << '\n';
}

int run(const Common& c) {
  const vmfb::ExperimentConfig cfg = vmfb::load_config(vmfb::resolve_config(c.config));
  const vmfb::ExperimentOutcome out = vmfb::run_experiment(cfg, to_options(c));
  if (out.exit_code == vmfb::kExitValidation) {
    std::cerr << cfg.name << ": refused, hypotheses not satisfied\n";
    print_report(std::cerr, out.validation);
    return out.exit_code;
  }
  const auto& s = out.summary;
  char line[256];
  std::snprintf(line, sizeof line, "%s: %s after %lld iterations, residual %.3e", cfg.name.c_str(),
                s["termination"].get<std::string>().c_str(),
                static_cast<long long>(s["iterations"].get<std::int64_t>()),
                s["final_residual"].is_number() ? s["final_residual"].get<double>() : std::nan(""));
  std::cout << line << "\n";
  if (!out.validation.passed()) {
    std::cout << "warning: hypotheses not satisfied\n";
    print_report(std::cout, out.validation);
  }
  std::cout << "trace: " << out.trace_file << "\nsummary: " << out.summary_file << "\n";
  return out.exit_code;
}

int validate(const Common& c) {
  const vmfb::ExperimentConfig cfg = vmfb::load_config(vmfb::resolve_config(c.config));
  const vmfb::ValidationReport r = vmfb::validate_experiment(cfg, to_options(c));
  print_report(std::cout, r);
  std::cout << (r.passed() ? "all hypotheses hold" : "hypotheses not satisfied") << "\n";
  return r.passed() ? vmfb::kExitConverged : vmfb::kExitValidation;
}

int list_fixtures(const std::string& dir) {
  const auto fixtures = vmfb::list_fixtures(dir);
  if (fixtures.empty()) std::cout << "no fixtures in " << dir << "\n";
  for (const auto& f : fixtures) {
    std::printf("%-28s %-32s %s\n", f.name.c_str(), f.solver.c_str(), f.description.c_str());
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Variable-metric forward-backward experiments"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run_cmd = app.add_subcommand("run", "Run a config and write its trace and summary");
  add_common(run_cmd, run_opts, true);

  Common validate_opts;
  auto* validate_cmd = app.add_subcommand("validate", "Check the hypotheses of a config without running it");
  add_common(validate_cmd, validate_opts, false);

  std::string dir = vmfb::default_config_dir();
  auto* list_cmd = app.add_subcommand("list-fixtures", "List the bundled configs");
  list_cmd->add_option("--dir", dir, "Config directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : vmfb::kExitUsage;
  }

  try {
    if (*run_cmd) return run(run_opts);
    if (*validate_cmd) return validate(validate_opts);
    return list_fixtures(dir);
  } catch (const vmfb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return vmfb::kExitUsage;
  } catch (const vmfb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return vmfb::kExitUsage;
  }
}
