#include "ergolab/core/errors.hpp"
#include "ergolab/experiments/experiments.hpp"

#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace ergolab;
using namespace ergolab::experiments;
using nlohmann::json;

namespace {

ExperimentReport run(const std::string& name, json knobs = json::object(), std::uint64_t seed = 1) {
  return run_experiment({name, std::move(knobs), seed});
}

std::string without_clock(ExperimentReport r) {
  r.wall_clock_seconds = 0;
  return render(r, Format::Json);
}

std::string read(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ergolab-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

int cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(ERGOLAB_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("cheap experiments pass with defaults") {
  for (const std::string name : {"example1", "identity-disjoint", "spectral-probe"}) {
    const auto r = run(name);
    CAPTURE(name);
    CHECK(r.passed());
    CHECK(r.failing_checks().empty());
    CHECK_FALSE(r.checks.empty());
    CHECK(std::is_sorted(r.checks.begin(), r.checks.end(), [](const Check& a, const Check& b) { return a.id < b.id; }));
    for (const auto& c : r.checks) CHECK_FALSE(c.anchor.empty());
    const json defaults = default_knobs(name);
    for (const auto& [key, value] : defaults.items()) CHECK(r.config.contains(key));
  }
}

TEST_CASE("example1 report content") {
  const auto r = run("example1");
  auto find = [&](const std::string& id) {
    return *std::find_if(r.checks.begin(), r.checks.end(), [&](const Check& c) { return c.id == id; });
  };
  CHECK(find("spectral.joint-mass").observed.at("exact_mass_squared") == "1");
  CHECK(find("verdict.rotation-factor").observed == "joint system exhibits rotation factor, outside Erg-perp");
  CHECK(find("joining.eigencharacter").observed == "1/5");
}

TEST_CASE("reports are deterministic and seed-dependent") {
  CHECK(without_clock(run("identity-disjoint", json::object(), 5)) == without_clock(run("identity-disjoint", json::object(), 5)));
  CHECK(without_clock(run("spectral-probe", json::object(), 5)) == without_clock(run("spectral-probe", json::object(), 5)));
  const auto a = run("identity-disjoint", json::object(), 5);
  const auto b = run("identity-disjoint", json::object(), 6);
  CHECK(without_clock(a) != without_clock(b));
  CHECK(a.passed());
  CHECK(b.passed());
}

TEST_CASE("report serializations") {
  const auto r = run("example1");
  CHECK(ExperimentReport::from_json(json::parse(render(r, Format::Json))) == r);

  const std::string csv = render(r, Format::Csv);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.checks.size() + 1);
  CHECK(csv.rfind("check_id,anchor,expected,observed,sigma,verdict\n", 0) == 0);

  const std::string md = render(r, Format::Markdown);
  for (const auto& c : r.checks) {
    CHECK(md.find("### " + c.id + "\n\n- anchor: " + c.anchor + "\n") != std::string::npos);
  }
  std::size_t sections = 0;
  for (std::size_t pos = md.find("\n### "); pos != std::string::npos; pos = md.find("\n### ", pos + 1)) ++sections;
  CHECK(sections == r.checks.size());

  const auto dir = scratch("emit");
  const auto path = emit_report(r, Format::Csv, dir);
  CHECK(path == dir / "example1.csv");
  CHECK(read(path) == csv);
  CHECK_THROWS(emit_report(r, Format::Json, "/proc/ergolab-not-writable"));
  CHECK(parse_format("markdown") == Format::Markdown);
  CHECK_THROWS_AS(parse_format("xml"), ValidationError);
}

TEST_CASE("config errors are actionable") {
  auto field = [](const std::string& name, const json& knobs) {
    try {
      (void)run(name, knobs);
    } catch (const ValidationError& e) {
      return e.field();
    }
    return std::string("<accepted>");
  };
  CHECK(field("example2", json::object()) == "experiment");
  CHECK(field("example1", {{"alhpa", "1/5"}}) == "config.alhpa");
  CHECK(field("example1", {{"N", 8}}) == "config.N");
  CHECK(field("example1", {{"alpha", "sqrt(2)"}}) == "config.alpha");
  CHECK(field("spectral-probe", {{"system", {{"kind", "rotation"}}}}) == "config.system.params.angle");
  CHECK(field("rank1-family", {{"depth", 16}}) == "config.depth");
}

TEST_CASE("spectral probe on a user system") {
  const json knobs{{"system", {{"kind", "twist"}, {"params", {{"base_measure", "haar"}, {"cocycle", {{"kind", "affine"}, {"slope", "1"}}}}}}},
                   {"observable", {{"character", {0, 1}}}},
                   {"N", 1024},
                   {"angles", {{{"angle", "0"}, {"expect", "not-witnessed"}}, {{"angle", "1/7"}, {"expect", "not-witnessed"}}}},
                   {"fiber_scan", {{"angle", "1/7"}, {"observable", {{"character", {1}}}}, {"samples", 8}}}};
  const auto r = run("spectral-probe", knobs);
  CHECK(r.passed());
  CHECK(r.details.contains("fiber_scan"));
  const json wrong{{"angles", {{{"angle", "1/3"}, {"expect", "not-witnessed"}}}}};
  const auto f = run("spectral-probe", wrong);
  CHECK_FALSE(f.passed());
  CHECK(f.failing_checks() == std::vector<std::string>{"eigenvalue.1/3"});
}

TEST_CASE("command line") {
  const auto dir = scratch("cli");
  const auto cfg = dir / "probe.json";
  std::ofstream(cfg) << R"({"N": 256})";
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << R"({"M": 256})";
  const auto failing = dir / "failing.json";
  std::ofstream(failing) << R"({"angles": [{"angle": "1/3", "expect": "not-witnessed"}]})";
  const auto sys = dir / "system.json";
  std::ofstream(sys) << R"({"kind": "rotation", "params": {"angle": "1/3"}})";
  const std::string out = " --out " + (dir / "out").string();

  CHECK(cli("run spectral-probe --config " + cfg.string() + " --seed 4" + out) == 0);
  CHECK(std::filesystem::exists(dir / "out" / "spectral-probe.json"));
  CHECK(cli("run spectral-probe --config " + cfg.string() + " --seed 4 --format markdown" + out) == 0);
  CHECK(std::filesystem::exists(dir / "out" / "spectral-probe.md"));
  CHECK(cli("run spectral-probe --config " + failing.string() + " --seed 4" + out) == 2);
  CHECK(cli("run spectral-probe --config " + bad.string() + " --seed 4" + out) == 3);
  CHECK(cli("run spectral-probe --seed 4 --format xml" + out) == 3);
  CHECK(cli("run spectral-probe --seed minus-one" + out) == 3);
  CHECK(cli("run no-such-experiment --seed 4" + out) == 3);
  CHECK(cli("run spectral-probe" + out, "env -u ERGOLAB_SEED") == 3);
  CHECK(cli("run spectral-probe --format csv" + out, "env ERGOLAB_SEED=9") == 0);
  CHECK(cli("spec validate " + sys.string()) == 0);
  CHECK(cli("spec validate " + bad.string()) == 3);

  // Same seed from the flag and from the environment gives the same bytes.
  CHECK(cli("run spectral-probe --seed 9 --format csv --out " + (dir / "flag").string()) == 0);
  CHECK(read(dir / "flag" / "spectral-probe.csv") == read(dir / "out" / "spectral-probe.csv"));
}
