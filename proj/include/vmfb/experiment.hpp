/*
 * Config-driven experiment runner behind the vmfb command-line tool.
 */
#pragma once

#include "vmfb/config.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vmfb {

enum ExitCode : int {
  kExitConverged = 0,
  kExitUsage = 1,
  kExitValidation = 2,
  kExitDiverged = 3,
  kExitMaxIterations = 4,
};

int exit_code_for(Termination t);

struct RunOptions {
  std::string out_dir = ".";
  std::optional<Policy> policy;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> max_iter;
  /// Zeroes timing fields so repeated runs are byte-identical.
  bool deterministic = false;
  bool write_outputs = true;
};

ExperimentConfig apply_overrides(ExperimentConfig c, const RunOptions& o);

struct ExperimentOutcome {
  int exit_code = kExitUsage;
  /// Absent when strict validation refused the run.
  std::optional<SolveTrace> trace;
  ValidationReport validation;
  Vector x;
  nlohmann::json summary;
  std::string trace_file;
  std::string summary_file;
};

/// Builds and runs the configured solver. Strict-mode validation failures
/// give kExitValidation and write nothing; ConfigError propagates.
ExperimentOutcome run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

/// Hypothesis report for the configured run, without iterating.
ValidationReport validate_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct FixtureInfo {
  std::string name;
  std::string path;
  std::string solver;
  std::string description;
};

std::string default_config_dir();
std::vector<FixtureInfo> list_fixtures(const std::string& dir = default_config_dir());

/// An existing path, or the name of a bundled config (with or without ".cfg").
std::string resolve_config(const std::string& name_or_path, const std::string& dir = default_config_dir());

}  // namespace vmfb
