// One line per acceptance criterion; exit status 0 iff all pass.
#include "ergolab/core/system.hpp"
#include "ergolab/experiments/experiments.hpp"
#include "ergolab/joinings/joinings.hpp"
#include "ergolab/spectral/spectral.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

using namespace ergolab;
using nlohmann::json;
namespace ex = ergolab::experiments;
namespace jo = ergolab::joinings;
namespace sp = ergolab::spectral;

namespace {

constexpr std::uint64_t kSeed = 20240917;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " FAILED[" << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

System sys(const json& doc) { return build_system(SystemSpec::from_json(doc)); }

json rotation(const std::string& angle) { return {{"kind", "rotation"}, {"params", {{"angle", angle}}}}; }

json twist(const json& base = "haar") {
  return {{"kind", "twist"}, {"params", {{"base_measure", base}, {"cocycle", {{"kind", "affine"}, {"slope", "1"}}}}}};
}

std::map<std::string, ex::ExperimentReport> first_runs;

const ex::ExperimentReport& report(const std::string& name) {
  auto it = first_runs.find(name);
  if (it == first_runs.end()) it = first_runs.emplace(name, ex::run_experiment({name, json::object(), kSeed})).first;
  return it->second;
}

bool check_passed(const ex::ExperimentReport& r, const std::string& prefix, Outcome& o) {
  bool any = false;
  for (const auto& c : r.checks) {
    if (c.id.rfind(prefix, 0) != 0) continue;
    any = true;
    o.require(c.pass, c.id);
  }
  o.require(any, "no checks named " + prefix + "*");
  return any;
}

void example1_chain(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto j = jo::build_joining(jo::JoiningSpec{"example1-triple", {}, {{"alpha", "1/5"}}, std::nullopt});
  const auto marg = jo::marginal_check(j, 8);
  o.require(marg.exact && marg.pass, "marginals exact");
  const Frequency F{0, -1, 0, 1};
  const auto phase = jo::eigencharacter_phase(j, F);
  o.require(phase == Rational(1, 5), "F o P = e(1/5) F");
  o.require(jo::invariance_check(j, character_family(4, 1)).pass, "invariance");
  const auto r = jo::eigenvalue_refutation(j, F, Rational(1, 5), 4096);
  o.require(std::abs(r.joint.mass - 1.0) <= 1e-9, "joint mass 1");
  o.require(r.product.mass <= 2.0 / 4096, "product mass <= 2/N");
  const auto& rep = report("example1");
  o.require(rep.passed(), "example1 experiment");
  const double t = seconds_since(t0);
  o.require(t < 5.0, "runtime < 5 s");
  o.detail << "joint mass " << r.joint.mass << ", product mass " << r.product.mass << " (2/N = " << 2.0 / 4096
           << "), " << t << " s";
}

void spectral_engine(Outcome& o) {
  const auto rot = sp::correlation_sequence(sys(rotation("1/3")), sp::Character{{1}}, {4096, false, {}});
  const auto w = sp::wiener_atomic_mass(rot);
  o.require(w.exact_total_mass == Rational(1), "rotation atom mass 1");
  o.require(!w.atoms.empty() && w.atoms.front().eigenvalue_angle == Rational(1, 3), "atom at 1/3");
  for (std::int64_t N : {256, 1024, 4096}) {
    const auto c = sp::correlation_sequence(sys(twist()), sp::Character{{0, 1}}, {N, false, {}});
    o.require(sp::wiener_atomic_mass(c).exact_total_mass == Rational(1, N), "twist 1/N at N=" + std::to_string(N));
  }
  double worst = 0.0;
  for (const auto& [doc, k] : std::vector<std::pair<json, Frequency>>{{rotation("1/3"), {1}},
                                                                      {twist(), {1, 1}},
                                                                      {rotation("2/7"), {3}},
                                                                      {twist({{"kind", "cyclic"}, {"modulus", 5}}), {2, 1}}}) {
    const auto c = sp::correlation_sequence(sys(doc), sp::Character{k}, {64, false, {}});
    const double m = sp::toeplitz_min_eigenvalue(c, 64);
    worst = std::min(worst, m);
    o.require(m >= -1e-9, "Toeplitz PSD");
  }
  auto dirac = [](const std::string& at) { return json{{"kind", "dirac"}, {"at", at}}; };
  const auto ca = sp::correlation_sequence(sys(twist(dirac("1/3"))), sp::Character{{0, 1}}, {64, false, {}});
  const auto cb = sp::correlation_sequence(sys(twist(dirac("2/5"))), sp::Character{{0, 1}}, {64, false, {}});
  for (const Rational& wt : {Rational(0), Rational(1, 4), Rational(1, 2), Rational(1)}) {
    const json mix{{"kind", "mixture"},
                   {"components",
                    {{{"weight", format_rational(wt)}, {"measure", dirac("1/3")}},
                     {{"weight", format_rational(1 - wt)}, {"measure", dirac("2/5")}}}}};
    const auto c = sp::correlation_sequence(sys(twist(mix)), sp::Character{{0, 1}}, {64, false, {}});
    for (std::int64_t n = 0; n <= 64; ++n) {
      if (*c.exact_at(n) != wt * *ca.exact_at(n) + (1 - wt) * *cb.exact_at(n)) {
        o.require(false, "affine at w=" + format_rational(wt));
        break;
      }
    }
  }
  o.detail << "rotation mass 1, twist 1/N at N in {256,1024,4096}, min Toeplitz eigenvalue " << worst
           << ", mixtures affine at w in {0,1/4,1/2,1}";
}

void joinings_criterion(Outcome& o) {
  const json systems = {twist(), rotation("1/3")};
  const auto rel = jo::build_joining({"rel-indep", {SystemSpec::from_json(systems[0]), SystemSpec::from_json(systems[1])},
                                      {{"factors", {json::array(), json::array()}}}, std::nullopt});
  const auto prod = jo::product_of_components(rel);
  std::size_t compared = 0;
  for (const auto& k : character_family(3, 8)) {
    ++compared;
    if (*rel.integrate_exact(k) != *prod.integrate_exact(k)) {
      o.require(false, "rel-indep = product");
      break;
    }
  }
  const auto diag = jo::build_joining({"diagonal", {SystemSpec::from_json(twist())}, json::object(), std::nullopt});
  const auto off = jo::build_joining({"off-diagonal", {SystemSpec::from_json(twist())}, {{"power", 0}}, std::nullopt});
  for (const auto& k : character_family(4, 4)) {
    if (*diag.integrate_exact(k) != *off.integrate_exact(k)) {
      o.require(false, "diagonal = off-diagonal(0)");
      break;
    }
  }
  const auto graph = jo::build_joining({"graph", {SystemSpec::from_json(rotation("1/3"))},
                                        {{"map", {{"kind", "identity"}, {"params", {{"measure", "haar"}}}}}}, std::nullopt});
  const auto r = jo::product_consistency_test(graph, 1);
  o.require(r.witness == Frequency{1, -1}, "graph witness e(x - y)");
  o.require(*graph.integrate_exact({1, -1}) == ExactComplex(1), "graph value 1");
  o.require(jo::product_of_components(graph).integrate_exact({1, -1})->is_zero(), "product value 0");
  o.detail << compared << " characters rel-indep = product, diagonal = off-diagonal(0), graph refuted by e(x-y): 1 vs 0";
}

void identity_disjoint(Outcome& o) {
  const auto& r = report("identity-disjoint");
  check_passed(r, "joining.", o);
  check_passed(r, "von-neumann.", o);
  o.require(r.passed(), "all checks");
  o.detail << r.checks.size() << " checks, von Neumann norm " << r.details.at("von_neumann").at(0).at("norm").get<double>();
}

void product_closure(Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& r = report("product-closure");
  const double t = seconds_since(t0);
  std::size_t sampled = 0;
  for (const auto& c : r.checks) {
    if (c.id.ends_with(".sampled")) {
      ++sampled;
      o.require(c.pass, c.id);
    }
  }
  o.require(sampled == 3, "three sampled joinings");
  o.require(r.config.at("samples") == 100000, "10^5 samples");
  o.require(r.passed(), "all checks");
  o.require(t < 60.0, "runtime < 60 s");
  o.detail << sampled << " joinings consistent at 4 sigma with 10^5 samples, " << t << " s";
}

void rank1(Outcome& o) {
  const auto& r = report("rank1-family");
  for (const std::string prefix : {"words.", "coherence.", "dichotomy.", "continuity.", "partition.", "agreement."}) {
    check_passed(r, prefix, o);
  }
  o.require(r.passed(), "all checks");
  std::string table;
  for (const auto& row : r.details.at("dichotomy")) {
    table += row.at("pair").get<std::string>() + "=" + row.at("verdict").get<std::string>() + " ";
  }
  o.detail << table << "coherence through depth " << r.config.at("depth");
}

void determinism(Outcome& o) {
  for (const auto& name : ex::kExperiments) {
    auto a = report(name);
    auto b = ex::run_experiment({name, json::object(), kSeed});
    a.wall_clock_seconds = 0;
    b.wall_clock_seconds = 0;
    for (auto f : {ex::Format::Json, ex::Format::Csv, ex::Format::Markdown}) {
      o.require(ex::render(a, f) == ex::render(b, f), name + "." + ex::extension(f));
    }
  }
  o.detail << ex::kExperiments.size() << " experiments x 3 formats byte-identical on re-run";
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"example1-chain", example1_chain},       {"spectral-engine", spectral_engine},
      {"joinings", joinings_criterion},                 {"identity-disjointness", identity_disjoint},
      {"product-closure", product_closure},     {"rank1-family", rank1},
      {"determinism", determinism},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      fn(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " exception: " << e.what();
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name.c_str(), o.detail.str().c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
