#include "ergolab/core/errors.hpp"
#include "ergolab/core/system.hpp"
#include "ergolab/experiments/experiments.hpp"
#include "ergolab/joinings/joinings.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <fstream>
#include <iostream>

namespace ex = ergolab::experiments;
using nlohmann::json;

namespace {

constexpr int kPass = 0;
constexpr int kCheckFailure = 2;
constexpr int kConfigError = 3;

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ergolab::ValidationError("config", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ergolab::ValidationError("config", path + ": " + e.what());
  }
}

std::uint64_t parse_seed(const std::string& text, const std::string& origin) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(text, &used, 0);
    if (used == text.size() && !text.empty() && text[0] != '-') return v;
  } catch (const std::exception&) {
  }
  throw ergolab::ValidationError("seed", origin + " is not an unsigned 64-bit integer: '" + text + "'");
}

// A spec document is a system spec, a joining spec ("systems" present), or
// an experiment config ({"experiment": name, "knobs": {...}}).
std::string validate_document(const json& doc) {
  if (!doc.is_object()) throw ergolab::ValidationError("", "expected a JSON object");
  if (doc.contains("experiment")) {
    const auto name = doc.at("experiment").get<std::string>();
    (void)ex::default_knobs(name);
    for (const auto& [key, _] : doc.items()) {
      if (key != "experiment" && key != "knobs" && key != "seed") {
        throw ergolab::ValidationError(key, "unknown field in experiment config");
      }
    }
    return "experiment config for " + name;
  }
  if (doc.contains("systems")) {
    const auto j = ergolab::joinings::build_joining(ergolab::joinings::JoiningSpec::from_json(doc));
    return "joining " + j.spec.kind + " of arity " + std::to_string(j.arity()) + (j.exact() ? " (exact)" : " (sampled)");
  }
  const auto sys = ergolab::build_system(ergolab::SystemSpec::from_json(doc));
  return "system " + sys.spec.kind + " of arity " + std::to_string(sys.arity()) +
         (sys.exact_integrals ? " (exact)" : " (sampled)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ergolab: measure-preserving systems, joinings and spectral probes"};
  app.require_subcommand(1);

  std::string experiment;
  std::string config_path;
  std::string seed_text;
  std::string out_dir;
  std::string format_name = "json";
  auto* run = app.add_subcommand("run", "run a named experiment and write its report");
  run->add_option("experiment", experiment, "identity-disjoint | example1 | product-closure | rank1-family | spectral-probe")
      ->required();
  run->add_option("--config", config_path, "JSON object of knobs (defaults apply to missing knobs)");
  run->add_option("--seed", seed_text, "master seed (falls back to ERGOLAB_SEED)");
  run->add_option("--out", out_dir, "output directory")->required();
  run->add_option("--format", format_name, "json | csv | markdown");

  std::string spec_path;
  auto* spec = app.add_subcommand("spec", "spec document utilities");
  spec->require_subcommand(1);
  auto* validate = spec->add_subcommand("validate", "validate a system, joining or experiment document");
  validate->add_option("file", spec_path)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*validate) {
      std::cout << "ok: " << validate_document(read_json(spec_path)) << "\n";
      return kPass;
    }

    ex::ExperimentConfig config;
    config.experiment = experiment;
    if (!seed_text.empty()) {
      config.seed = parse_seed(seed_text, "--seed");
    } else if (const char* env = std::getenv("ERGOLAB_SEED"); env != nullptr) {
      config.seed = parse_seed(env, "ERGOLAB_SEED");
    } else {
      throw ergolab::ValidationError("seed", "a seed is required: pass --seed or set ERGOLAB_SEED");
    }
    if (!config_path.empty()) {
      json doc = read_json(config_path);
      if (doc.is_object() && doc.contains("experiment")) {
        if (doc.at("experiment") != experiment) {
          throw ergolab::ValidationError("experiment", "config is for '" + doc.at("experiment").get<std::string>() +
                                                           "', not '" + experiment + "'");
        }
        doc = doc.value("knobs", json::object());
      }
      config.knobs = doc;
    }
    const auto format = ex::parse_format(format_name);
    const auto report = ex::run_experiment(config);
    const auto path = ex::emit_report(report, format, out_dir);
    std::cout << report.experiment << ": " << (report.passed() ? "pass" : "fail") << " (" << report.checks.size()
              << " checks) -> " << path.string() << "\n";
    if (!report.passed()) {
      std::cerr << "failing checks:\n";
      for (const auto& id : report.failing_checks()) std::cerr << "  " << id << "\n";
      return kCheckFailure;
    }
    return kPass;
  } catch (const ergolab::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kConfigError;
  }
}
