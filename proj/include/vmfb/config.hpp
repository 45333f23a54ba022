/*
 * Experiment configuration files.
 *
 * A config is a JSON document with a strict schema: unknown keys are
 * rejected and defaults are filled in during parsing, so that
 * parse(serialize(parse(text))) == parse(text). Matrices are inline
 * row-major lists, whitespace-separated text files ({"file": path}, relative
 * to the config) or seeded generators.
 */
#pragma once

#include "vmfb/fb.hpp"

#include "json.hpp"

#include <cstdint>
#include <string>

namespace vmfb {

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class SolverKind { fb, strong_pd, cocoercive_pd };

std::string to_string(SolverKind k);

struct ExperimentConfig {
  std::string name;
  std::string description;
  SolverKind solver = SolverKind::fb;
  /// fb: "inclusion"; strong_pd: "strongly_convex" | "best_approximation";
  /// cocoercive_pd: "composite".
  std::string form;
  std::uint64_t seed = 0;
  Policy policy = Policy::strict;
  StoppingRule stop;
  /// Normalized descriptors; see README for the schema.
  nlohmann::json problem;
  nlohmann::json schedules;
  /// Null when absent.
  nlohmann::json reference;
  std::string trace_path;
  std::string summary_path;
  /// Directory against which {"file": ...} entries resolve; not serialized.
  std::string base_dir = ".";
};

/// Throws ConfigError with a line/column or field-path diagnostic.
ExperimentConfig parse_config(const std::string& text, const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

nlohmann::json to_json(const ExperimentConfig& c);
std::string serialize_config(const ExperimentConfig& c);

bool same_config(const ExperimentConfig& a, const ExperimentConfig& b);

}  // namespace vmfb
