#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

/// Named, reproducible experiments and their reports.
///
/// A config document is a JSON object of knobs; every knob has a default
/// and the resolved values are echoed in the report. Unknown knobs are
/// rejected. Checks draw randomness from derive_seed(seed, check id).
namespace ergolab::experiments {

inline const std::vector<std::string> kExperiments{"identity-disjoint", "example1", "product-closure",
                                                   "rank1-family", "spectral-probe"};

struct ExperimentConfig {
  std::string experiment;
  nlohmann::json knobs = nlohmann::json::object();
  std::uint64_t seed = 0;
};

struct Check {
  std::string id;
  /// What the check reproduces, or "plumbing".
  std::string anchor;
  std::string description;
  nlohmann::json expected;
  nlohmann::json observed;
  std::optional<double> sigma;
  bool pass = false;

  friend bool operator==(const Check&, const Check&) = default;
};

struct ExperimentReport {
  std::string experiment;
  std::uint64_t seed = 0;
  /// Resolved knobs, defaults included.
  nlohmann::json config;
  std::vector<Check> checks;
  /// Tables and raw values backing the checks.
  nlohmann::json details = nlohmann::json::object();
  std::vector<std::string> notes;
  double wall_clock_seconds = 0.0;

  bool passed() const;
  std::vector<std::string> failing_checks() const;

  nlohmann::json to_json() const;
  static ExperimentReport from_json(const nlohmann::json& doc);

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

/// Throws ValidationError for unknown experiments or knobs.
ExperimentReport run_experiment(const ExperimentConfig& config);

/// The knobs an experiment accepts, with their defaults.
nlohmann::json default_knobs(const std::string& experiment);

enum class Format { Json, Csv, Markdown };
Format parse_format(const std::string& name);
std::string extension(Format f);

std::string render(const ExperimentReport& report, Format format);

/// Writes <dir>/<experiment>.<ext>; returns the path. Throws on I/O errors.
std::filesystem::path emit_report(const ExperimentReport& report, Format format, const std::filesystem::path& dir);

}  // namespace ergolab::experiments
