#include "ergolab/experiments/experiments.hpp"

#include "ergolab/core/errors.hpp"
#include "ergolab/joinings/joinings.hpp"
#include "ergolab/rank1/rank1.hpp"
#include "ergolab/spectral/spectral.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace ergolab::experiments {
namespace {

using json = nlohmann::json;
namespace sp = ergolab::spectral;
namespace jn = ergolab::joinings;

const std::string kIdentityAnchor = "identity maps are disjoint from ergodic systems";
const std::string kTwistAnchor = "twist joining acquires the rotation by alpha as a factor";
const std::string kProductAnchor = "disjointness from all ergodic systems is closed under products";
const std::string kDichotomyAnchor = "rank-1 family: |a-b| dyadic iff isomorphic, otherwise disjoint";
const std::string kContinuityAnchor = "rank-1 family: stage words depend continuously on the digits";
const std::string kSaAnchor = "fibered rank-1 system S(a, x) = (a, T_a x)";
const std::string kWienerAnchor = "Wiener lemma: averaged squared correlations measure atoms";
const std::string kHerglotzAnchor = "Herglotz: correlation sequences are positive definite";
const std::string kPlumbing = "plumbing";

json dirac(const std::string& at) { return {{"kind", "dirac"}, {"at", at}}; }

json twist_spec() {
  return {{"kind", "twist"}, {"params", {{"base_measure", "haar"}, {"cocycle", {{"kind", "affine"}, {"slope", "1"}}}}}};
}

json defaults_for(const std::string& experiment) {
  if (experiment == "identity-disjoint") {
    return {{"identity_measure",
             {{"kind", "mixture"},
              {"components", {{{"weight", "1/2"}, {"measure", dirac("0")}}, {{"weight", "1/2"}, {"measure", dirac("1/2")}}}}}},
            {"rotation_angle", "1/3"},
            {"rotation_measure", {{"kind", "cyclic"}, {"modulus", 3}}},
            {"degree", 8},
            {"sampled_degree", 2},
            {"samples", 20000},
            {"N", 4096},
            {"precision", nullptr}};
  }
  if (experiment == "example1") {
    return {{"alpha", "1/5"},
            {"cocycle", {{"kind", "affine"}, {"slope", "1"}}},
            {"base_measure", "haar"},
            {"N", 4096},
            {"marginal_degree", 4},
            {"invariance_degree", 1},
            {"consistency_degree", 1},
            {"samples", 2000},
            {"precision", nullptr}};
  }
  if (experiment == "product-closure") {
    return {{"first", twist_spec()},
            {"second", twist_spec()},
            {"rotation", {{"kind", "rotation"}, {"params", {{"angle", "sqrt(2)"}}}, {"precision", 40}}},
            {"factors", {json::array({0, 2}), json::array({0})}},
            {"degree", 2},
            {"exact_degree", 2},
            {"samples", 100000}};
  }
  if (experiment == "rank1-family") {
    return {{"a", "1/4"},
            {"b", "3/4"},
            {"c", "1/3"},
            {"expected_dichotomy",
             {{"a-b", "isomorphic-family"}, {"a-c", "disjoint-family"}, {"b-c", "disjoint-family"}}},
            {"agreement_pairs", {{{"a", "1/4"}, {"b", "3/4"}, {"expected", 1}}, {{"a", "1/3"}, {"b", "5/12"}, {"expected", 3}}}},
            {"depth", 12},
            {"word_stages", 3},
            {"prefix_length", 6},
            {"partition_depth", 10},
            {"N", 4096},
            {"threshold", sp::kWeakMixingThreshold},
            {"observables",
             {{{"level", {{"stage", 0}, {"index", 0}}}},
              {{"level", {{"stage", 1}, {"index", 0}}}},
              {{"level", {{"stage", 2}, {"index", 3}}}},
              {{"level", {{"stage", 3}, {"index", 5}}}}}},
            {"fiber_base",
             {{"kind", "mixture"},
              {"components",
               {{{"weight", "1/3"}, {"measure", dirac("1/3")}},
                {{"weight", "1/3"}, {"measure", dirac("1/5")}},
                {{"weight", "1/3"}, {"measure", dirac("2/7")}}}}}},
            {"fiber_samples", 8},
            {"fiber_depth", 6}};
  }
  if (experiment == "spectral-probe") {
    return {{"system", {{"kind", "rotation"}, {"params", {{"angle", "1/3"}}}}},
            {"observable", {{"character", {1}}}},
            {"N", 4096},
            {"center", false},
            {"toeplitz_size", 64},
            {"threshold", sp::kEigenvalueThreshold},
            {"angles",
             {{{"angle", "1/3"}, {"expect", "eigenvalue-witnessed"}}, {{"angle", "0"}, {"expect", "not-witnessed"}}}},
            {"grid_denominator", sp::kAtomGridDenominator},
            {"candidates", json::array()},
            {"samples", 2000},
            {"fiber_scan", nullptr}};
  }
  throw ValidationError("experiment", "unknown experiment '" + experiment + "' (expected one of identity-disjoint, "
                                      "example1, product-closure, rank1-family, spectral-probe)");
}

json resolve(const std::string& experiment, const json& given) {
  json knobs = defaults_for(experiment);
  if (given.is_null()) return knobs;
  if (!given.is_object()) throw ValidationError("config", "config must be a JSON object of knobs");
  for (const auto& [key, value] : given.items()) {
    if (!knobs.contains(key)) {
      std::string known;
      for (const auto& [k, _] : knobs.items()) known += (known.empty() ? "" : ", ") + k;
      throw ValidationError("config." + key, "unknown knob for " + experiment + " (known: " + known + ")");
    }
    knobs[key] = value;
  }
  return knobs;
}

std::int64_t knob_int(const json& knobs, const std::string& key, std::int64_t min) {
  const json& v = knobs.at(key);
  if (!v.is_number_integer()) throw ValidationError("config." + key, "expected an integer");
  const auto x = v.get<std::int64_t>();
  if (x < min) throw ValidationError("config." + key, "must be >= " + std::to_string(min));
  return x;
}

double knob_double(const json& knobs, const std::string& key) {
  const json& v = knobs.at(key);
  if (!v.is_number()) throw ValidationError("config." + key, "expected a number");
  return v.get<double>();
}

std::optional<int> knob_precision(const json& knobs) {
  if (!knobs.contains("precision") || knobs.at("precision").is_null()) return std::nullopt;
  return static_cast<int>(knob_int(knobs, "precision", 1));
}

Rational knob_number(const json& knobs, const std::string& key, std::optional<int> precision) {
  return parse_number(knobs.at(key), precision, "config." + key);
}

ValidationError rescope(const ValidationError& e, const std::string& prefix) {
  std::string message = e.what();
  if (!e.field().empty() && message.rfind(e.field() + ": ", 0) == 0) message.erase(0, e.field().size() + 2);
  return ValidationError(prefix + (e.field().empty() ? "" : "." + e.field()), message);
}

// Parses and builds a system knob so that errors name the knob.
SystemSpec knob_system(const json& knobs, const std::string& key) {
  try {
    SystemSpec spec = SystemSpec::from_json(knobs.at(key));
    (void)build_system(spec);
    return spec;
  } catch (const ValidationError& e) {
    throw rescope(e, "config." + key);
  }
}

std::string rat(const Rational& r) { return format_rational(r); }

class Runner {
 public:
  Runner(const ExperimentConfig& config, ExperimentReport& report) : config_(config), report_(report) {}

  std::uint64_t seed(const std::string& id) const { return derive_seed(config_.seed, std::string_view(id)); }

  void add(std::string id, std::string anchor, std::string description, json expected, json observed, bool pass,
           std::optional<double> sigma = std::nullopt) {
    if (sigma && !std::isfinite(*sigma)) sigma.reset();
    report_.checks.push_back(Check{std::move(id), std::move(anchor), std::move(description), std::move(expected),
                                   std::move(observed), sigma, pass});
  }

  void detail(const std::string& key, json value) { report_.details[key] = std::move(value); }
  void note(std::string text) { report_.notes.push_back(std::move(text)); }

 private:
  const ExperimentConfig& config_;
  ExperimentReport& report_;
};

// ||(1/N) sum_{n<N} h o T^n||^2 from the centered correlation sequence.
double von_neumann_norm(const sp::CorrelationSeq& c, std::int64_t N, std::optional<Rational>* exact_square) {
  if (c.exact) {
    ExactComplex sum;
    for (std::int64_t d = -(N - 1); d < N; ++d) sum += *c.exact_at(d) * Rational(N - std::abs(d));
    if (auto r = sum.as_rational()) {
      *exact_square = *r / (Rational(N) * N);
      return std::sqrt(std::max(0.0, to_double(**exact_square)));
    }
  }
  std::complex<double> sum{0, 0};
  for (std::int64_t d = -(N - 1); d < N; ++d) sum += c.at(d) * static_cast<double>(N - std::abs(d));
  return std::sqrt(std::max(0.0, sum.real())) / static_cast<double>(N);
}

json consistency_observed(const jn::ConsistencyReport& r) {
  json o{{"verdict", r.verdict}, {"characters", r.characters}};
  if (r.witness) o["witness"] = *r.witness;
  if (!r.exact) o["max_z"] = std::isfinite(r.max_z) ? json(r.max_z) : json("inf");
  return o;
}

double max_std_error(const jn::ConsistencyReport& r) {
  double m = 0.0;
  for (const auto& row : r.rows) m = std::max(m, row.std_error);
  return m;
}

// ---------------------------------------------------------------------------

void identity_disjoint(Runner& run, const json& knobs) {
  const auto precision = knob_precision(knobs);
  const auto degree = knob_int(knobs, "degree", 1);
  const auto sampled_degree = knob_int(knobs, "sampled_degree", 1);
  const auto samples = static_cast<std::size_t>(knob_int(knobs, "samples", 2));
  const auto N = knob_int(knobs, "N", 16);

  SystemSpec id_spec{"identity", {{"measure", knobs.at("identity_measure")}}, precision};
  SystemSpec rot_spec{"rotation", {{"angle", knobs.at("rotation_angle")}, {"measure", knobs.at("rotation_measure")}},
                      precision};
  const System identity = build_system(id_spec);
  const System rotation = build_system(rot_spec);
  const Rational angle = knob_number(knobs, "rotation_angle", precision);

  // Ergodicity of the rotation, seen on characters: no centered character
  // carries mass at the eigenvalue 1.
  {
    double worst = 0.0;
    for (std::int64_t k = 1; k <= degree; ++k) {
      const auto c = sp::correlation_sequence(rotation, sp::Character{{k}}, {N, true, {}});
      worst = std::max(worst, sp::eigenvalue_mass(c, 0).mass);
    }
    run.add("ergodicity.rotation", kIdentityAnchor,
            "centered characters e(kx), 1 <= k <= degree, carry no mass at eigenvalue 1 under the rotation measure",
            "mass <= 2/N = " + json(2.0 / static_cast<double>(N)).dump(), worst, worst <= 2.0 / static_cast<double>(N));
  }
  // Haar on the circle is not ergodic for a rational angle p/q: e(qx) is invariant.
  {
    const BigInt q = boost::multiprecision::denominator(frac(angle));
    if (q <= 1024) {
      const auto qi = q.convert_to<std::int64_t>();
      const System circle = build_system(SystemSpec{"rotation", {{"angle", knobs.at("rotation_angle")}}, precision});
      const auto c = sp::correlation_sequence(circle, sp::Character{{qi}}, {N, true, {}});
      const double mass = sp::eigenvalue_mass(c, 0).mass;
      run.add("ergodicity.circle-haar-contrast", kPlumbing,
              "the same angle on Haar measure of the circle is not ergodic: e(" + std::to_string(qi) +
                  "x) is invariant, which is why the rotation lives on its finite orbit",
              "mass 1 at eigenvalue 1", mass, std::abs(mass - 1.0) <= 1e-9);
    }
  }

  const jn::JoiningSpec base_spec{"product", {id_spec, rot_spec}, json::object(), precision};
  struct Candidate {
    std::string id;
    jn::JoiningSpec spec;
  };
  std::vector<Candidate> candidates{
      {"joining.product", base_spec},
      {"joining.rel-indep-trivial", {"rel-indep", {id_spec, rot_spec}, {{"factors", {json::array(), json::array()}}}, precision}},
      {"joining.rel-indep-product-base",
       {"rel-indep", {id_spec, rot_spec}, {{"factors", {json::array({0}), json::array({0})}}, {"base", "product"}}, precision}},
  };
  for (const auto& cand : candidates) {
    const auto j = jn::build_joining(cand.spec);
    const auto r = jn::product_consistency_test(j, degree, {run.seed(cand.id), samples});
    run.add(cand.id + ".exact", kIdentityAnchor,
            "every cross-character integral equals the product value (" + r.note + ")",
            "consistent-with-product", consistency_observed(r), r.consistent());
  }
  // The factors differ as measures, so no diagonal coupling exists.
  {
    const std::string id = "joining.rel-indep-diagonal";
    std::string observed;
    try {
      (void)jn::build_joining({"rel-indep", {id_spec, rot_spec}, {{"factors", {json::array({0}), json::array({0})}}, {"base", "diagonal"}}, precision});
      observed = "constructed";
    } catch (const ValidationError& e) {
      observed = std::string("rejected: ") + e.what();
    } catch (const Unsupported& e) {
      observed = std::string("rejected: ") + e.what();
    }
    run.add(id, kIdentityAnchor, "coupling the two coordinates diagonally does not give a joining",
            "rejected", observed, observed.rfind("rejected", 0) == 0);
  }
  // Sampled joinings.
  const auto product = jn::build_joining(base_spec);
  {
    const std::string id = "joining.independent-sampler.sampled";
    const Measure m = product.joint.measure;
    const auto j = jn::make_custom_joining(product.components, [m](Rng& rng) { return m.sample(rng); },
                                           "independent draws");
    const auto r = jn::product_consistency_test(j, sampled_degree, {run.seed(id), samples});
    run.add(id, kIdentityAnchor, "independent sampler passes the 4 sigma product test", "consistent-with-product",
            consistency_observed(r), r.consistent(), max_std_error(r));
  }
  {
    const std::string id = "joining.coupled-sampler.not-invariant";
    const Measure id_m = identity.measure;
    const Measure rot_m = rotation.measure;
    // x determined by w: mass on the graph of a non-equivariant map.
    const auto j = jn::make_custom_joining(
        product.components,
        [rot_m](Rng& rng) {
          const Rational w = rot_m.sample(rng).at(0);
          return Point{w == 0 ? Rational(0) : Rational(1, 2), w};
        },
        "x = 0 iff w = 0");
    const auto r = jn::invariance_check(j, character_family(2, 1), {run.seed(id), samples});
    run.add(id, kIdentityAnchor, "a coupling that ties the identity coordinate to the rotation is not invariant",
            "not invariant", r.pass ? json("invariant") : json{{"first_failure", *r.first_failure}}, !r.pass);
  }
  // von Neumann: averages of centered characters along the rotation vanish.
  {
    double worst = 0.0;
    json per_k = json::array();
    for (std::int64_t k = 1; k <= degree; ++k) {
      const auto c = sp::correlation_sequence(rotation, sp::Character{{k}}, {N, true, {}});
      std::optional<Rational> exact_square;
      const double norm = von_neumann_norm(c, N, &exact_square);
      worst = std::max(worst, norm);
      per_k.push_back({{"k", k}, {"norm", norm}, {"exact_norm_squared", exact_square ? json(rat(*exact_square)) : json(nullptr)}});
    }
    run.detail("von_neumann", per_k);
    run.add("von-neumann.decay", kIdentityAnchor,
            "||(1/N) sum_{n<N} h o R^n|| for centered h = e(kx), 1 <= k <= degree",
            "<= 2/N = " + json(2.0 / static_cast<double>(N)).dump(), worst, worst <= 2.0 / static_cast<double>(N));
  }
}

// ---------------------------------------------------------------------------

void example1(Runner& run, const json& knobs) {
  const auto precision = knob_precision(knobs);
  const auto N = knob_int(knobs, "N", 16);
  const auto samples = static_cast<std::size_t>(knob_int(knobs, "samples", 2));
  const Rational alpha = frac(knob_number(knobs, "alpha", precision));

  jn::JoiningSpec spec{"example1-triple",
                       {},
                       {{"alpha", knobs.at("alpha")}, {"cocycle", knobs.at("cocycle")}, {"base_measure", knobs.at("base_measure")}},
                       precision};
  const auto j = jn::build_joining(spec);
  const Frequency F{0, -1, 0, 1};
  run.detail("joining", {{"spec", j.spec.to_json()}, {"notes", j.notes}, {"exact", j.exact()}});

  // Preconditions: beta_* rho atomless for both T and R.
  const char* names[] = {"T", "R"};
  for (std::size_t i = 0; i < 2; ++i) {
    const std::string id = std::string("preconditions.") + names[i] + ".cocycle-pushforward-atomless";
    const auto c = sp::correlation_sequence(j.components[i], sp::Character{{0, 1}}, {N, false, {run.seed(id), samples}});
    sp::AtomOptions atoms;
    atoms.grid_denominator = 1;
    const auto w = sp::wiener_atomic_mass(c, atoms);
    json observed{{"wiener_average", w.total_mass}};
    if (w.exact_total_mass) observed["exact"] = rat(*w.exact_total_mass);
    run.add(id, kTwistAnchor,
            "the fiber rotation angles have an atomless law: the Wiener average of their Fourier coefficients is 1/N",
            "<= 2/N = " + json(2.0 / static_cast<double>(N)).dump(), observed,
            w.total_mass <= 2.0 / static_cast<double>(N));
  }
  {
    const std::string id = "joining.marginals";
    const auto r = jn::marginal_check(j, knob_int(knobs, "marginal_degree", 1), {run.seed(id), samples});
    run.add(id, kTwistAnchor, "the triple joining projects onto the invariant measures of T and R",
            r.exact ? "exact equality" : "within 4 sigma",
            json{{"pass", r.pass}, {"characters", r.rows.size()}, {"exact", r.exact}}, r.pass);
  }
  {
    const std::string id = "joining.invariance";
    const auto r = jn::invariance_check(j, character_family(4, knob_int(knobs, "invariance_degree", 1)),
                                        {run.seed(id), samples});
    run.add(id, kTwistAnchor, "the triple joining is invariant under T x R",
            r.exact ? "exact equality" : "within 4 sigma",
            json{{"pass", r.pass}, {"characters", r.rows.size()}, {"exact", r.exact}}, r.pass);
  }
  {
    const std::string id = "joining.eigencharacter";
    std::optional<Rational> phase = jn::eigencharacter_phase(j, F);
    std::string how = "symbolic";
    if (!phase && !j.joint.measure.symbolic()) {
      // Pointwise on samples: <F, P x> - <F, x> must equal alpha exactly.
      how = "pointwise on samples";
      bool all = true;
      for (const auto& x : jn::sample_joining(j, run.seed(id), std::min<std::size_t>(samples, 1000))) {
        const Point y = j.joint.apply(x);
        Rational d = 0;
        for (std::size_t c = 0; c < F.size(); ++c) d += (y[c] - x[c]) * F[c];
        all = all && frac(d) == alpha;
      }
      if (all) phase = alpha;
    }
    run.add(id, kTwistAnchor,
            "F = e(z - y) satisfies F o P = e(alpha) F exactly (" + how + "), so |F| is invariant",
            rat(alpha), phase ? json(rat(*phase)) : json("not an eigencharacter"), phase && *phase == alpha);
  }
  const auto refutation = jn::eigenvalue_refutation(j, F, alpha, N);
  run.detail("eigenvalue_refutation", jn::to_json(refutation));
  {
    const auto& v = refutation.joint;
    json observed{{"mass", v.mass}};
    if (v.exact_mass_squared) observed["exact_mass_squared"] = rat(*v.exact_mass_squared);
    run.add("spectral.joint-mass", kTwistAnchor, "eigenvalue mass of F at e(alpha) under the joining",
            "1 (tolerance 1e-9)", observed, std::abs(v.mass - 1.0) <= 1e-9);
  }
  {
    const auto& v = refutation.product;
    json observed{{"mass", v.mass}};
    if (v.exact_mass_squared) observed["exact_mass_squared"] = rat(*v.exact_mass_squared);
    run.add("spectral.product-mass", kTwistAnchor, "eigenvalue mass of F at e(alpha) under the product joining",
            "0 within 2/N = " + json(refutation.product_bound).dump(), observed, v.mass <= refutation.product_bound);
  }
  run.add("verdict.rotation-factor", kTwistAnchor,
          "the joint system has e(alpha) as an eigenvalue, so it has the rotation by alpha as a factor",
          "joint system exhibits rotation factor, outside Erg-perp",
          refutation.refuted ? "joint system exhibits rotation factor, outside Erg-perp" : "no rotation factor witnessed",
          refutation.refuted);
  {
    const std::string id = "joining.product-consistency";
    const auto r = jn::product_consistency_test(j, knob_int(knobs, "consistency_degree", 1), {run.seed(id), samples});
    run.add(id, kTwistAnchor,
            "the triple joining is not the product; F itself integrates to 0 under both, the witness is the shared base "
            "coordinate",
            "refuted", consistency_observed(r), !r.consistent());
  }
}

// ---------------------------------------------------------------------------

void product_closure(Runner& run, const json& knobs) {
  const auto degree = knob_int(knobs, "degree", 1);
  const auto exact_degree = knob_int(knobs, "exact_degree", 0);
  const auto samples = static_cast<std::size_t>(knob_int(knobs, "samples", 2));
  const SystemSpec first = knob_system(knobs, "first");
  const SystemSpec second = knob_system(knobs, "second");
  const SystemSpec rotation = knob_system(knobs, "rotation");
  const SystemSpec ts{"product", {{"factors", {first.to_json(), second.to_json()}}}, std::nullopt};
  const json factors = knobs.at("factors");

  struct Candidate {
    std::string id;
    jn::JoiningSpec spec;
  };
  const std::vector<Candidate> candidates{
      {"product", {"product", {ts, rotation}, json::object(), std::nullopt}},
      {"rel-indep-trivial", {"rel-indep", {ts, rotation}, {{"factors", {json::array(), json::array()}}}, std::nullopt}},
      {"rel-indep-product-base", {"rel-indep", {ts, rotation}, {{"factors", factors}, {"base", "product"}}, std::nullopt}},
  };
  json built = json::array();
  for (const auto& cand : candidates) {
    const auto j = jn::build_joining(cand.spec);
    built.push_back({{"id", cand.id}, {"notes", j.notes}, {"exact", j.exact()}});
    if (exact_degree > 0 && j.exact()) {
      const std::string id = "joining." + cand.id + ".exact";
      const auto r = jn::product_consistency_test(j, exact_degree, {run.seed(id), samples});
      run.add(id, kProductAnchor, "exact product test on characters |k| <= " + std::to_string(exact_degree) + " (" + r.note + ")",
              "consistent-with-product", consistency_observed(r), r.consistent());
    }
    const std::string id = "joining." + cand.id + ".sampled";
    const auto r = jn::product_consistency_test(j, degree, {run.seed(id), samples, 4.0, true});
    run.add(id, kProductAnchor,
            "4 sigma product test with " + std::to_string(samples) + " samples on characters |k| <= " +
                std::to_string(degree),
            "consistent-with-product", consistency_observed(r), r.consistent(), max_std_error(r));
  }
  run.detail("joinings", built);
  {
    const std::string id = "joining.rel-indep-diagonal";
    std::string observed;
    try {
      (void)jn::build_joining({"rel-indep", {ts, rotation}, {{"factors", {json::array({0}), json::array({0})}}, {"base", "diagonal"}}, std::nullopt});
      observed = "constructed";
    } catch (const ValidationError& e) {
      observed = std::string("rejected: ") + e.what();
    } catch (const Unsupported& e) {
      observed = std::string("rejected: ") + e.what();
    }
    run.add(id, kProductAnchor,
            "identifying a base coordinate of the twists with the rotation coordinate is not invariant",
            "rejected", observed, observed.rfind("rejected", 0) == 0);
  }
  run.note("only joinings constructible here are tested; the product test is one-sided");
}

// ---------------------------------------------------------------------------

rank1::Rank1Spec knob_rank1(const json& knobs, const std::string& key, int depth) {
  const json& v = knobs.at(key);
  if (v.is_object() && v.contains("digits")) {
    std::vector<std::uint8_t> digits;
    for (char ch : v.at("digits").get<std::string>()) {
      if (ch != '0' && ch != '1') throw ValidationError("config." + key + ".digits", "digits must be 0 or 1");
      digits.push_back(static_cast<std::uint8_t>(ch - '0'));
    }
    return rank1::Rank1Spec::from_digits(std::move(digits), std::min<int>(depth, static_cast<int>(digits.size())));
  }
  return rank1::Rank1Spec::from_rational(parse_number(v, std::nullopt, "config." + key), depth);
}

std::string itinerary(const rank1::Rank1Map& m) {
  Rational x = m.level_lo(0) + m.cell_width() / 2;
  std::string out(1, m.level_letter(m.level_of(x)));
  out.reserve(static_cast<std::size_t>(m.levels()));
  for (std::int64_t i = 1; i < m.levels(); ++i) {
    x = m.apply(x);
    out += m.level_letter(m.level_of(x));
  }
  return out;
}

// Sources tile [0, 1) minus the top level, images tile it minus the base.
// Endpoints are checked to be exact multiples of the cell width, then
// compared as integer cell indices.
bool pieces_partition(const rank1::Rank1Map& m) {
  const std::int64_t L = m.levels();
  auto cell_of = [L](const Rational& r, std::int64_t& out) {
    const Rational scaled = r * L;
    if (boost::multiprecision::denominator(scaled) != 1) return false;
    out = boost::multiprecision::numerator(scaled).convert_to<std::int64_t>();
    return true;
  };
  std::vector<std::int64_t> src;
  std::vector<std::int64_t> img;
  for (std::int64_t i = 0; i < m.piece_count(); ++i) {
    const auto p = m.piece(i);
    std::int64_t lo = 0;
    std::int64_t hi = 0;
    std::int64_t shift = 0;
    if (!cell_of(p.lo, lo) || !cell_of(p.hi, hi) || !cell_of(p.translation, shift) || hi != lo + 1) return false;
    src.push_back(lo);
    img.push_back(lo + shift);
  }
  std::int64_t top = 0;
  std::int64_t base = 0;
  if (!cell_of(m.level_lo(m.levels() - 1), top) || !cell_of(m.level_lo(0), base)) return false;
  auto tiles = [L](std::vector<std::int64_t> v, std::int64_t hole) {
    std::sort(v.begin(), v.end());
    std::int64_t expect = 0;
    for (auto c : v) {
      if (expect == hole) ++expect;
      if (c != expect) return false;
      ++expect;
    }
    if (expect == hole) ++expect;
    return expect == L;
  };
  return tiles(src, top) && tiles(img, base) &&
         Rational(static_cast<std::int64_t>(src.size()), L) == m.defined_measure();
}

void rank1_family(Runner& run, const json& knobs) {
  const int depth = static_cast<int>(knob_int(knobs, "depth", 1));
  if (depth > rank1::kMaxMapDepth) {
    throw ValidationError("config.depth", "at most " + std::to_string(rank1::kMaxMapDepth));
  }
  const int word_stages = static_cast<int>(knob_int(knobs, "word_stages", 0));
  const int prefix_length = static_cast<int>(knob_int(knobs, "prefix_length", 0));
  const int partition_depth = static_cast<int>(knob_int(knobs, "partition_depth", 1));
  const auto N = knob_int(knobs, "N", 16);
  const double threshold = knob_double(knobs, "threshold");
  const std::vector<std::string> labels{"a", "b", "c"};
  std::map<std::string, rank1::Rank1Spec> params;
  for (const auto& l : labels) params.emplace(l, knob_rank1(knobs, l, depth));

  json words = json::object();
  for (const auto& l : labels) {
    const auto& spec = params.at(l);
    std::vector<std::int64_t> lengths;
    std::vector<std::int64_t> heights;
    std::vector<std::int64_t> want_lengths;
    std::vector<std::int64_t> want_heights;
    json stage_words = json::array();
    for (int n = 0; n <= std::min(word_stages, spec.depth); ++n) {
      const auto w = rank1::rank1_word(spec, n);
      lengths.push_back(w.length);
      heights.push_back(w.height);
      want_lengths.push_back(n == 0 ? 1 : 3 * want_lengths.back() + 1);
      want_heights.push_back(n == 0 ? 1 : 3 * want_heights.back());
      if (n <= 3) stage_words.push_back(rank1::spaced_word(w.word));
    }
    words[l] = {{"parameter", spec.describe()}, {"words", stage_words}};
    run.add("words." + l, kDichotomyAnchor, "word lengths and heights for stages 0.." + std::to_string(word_stages),
            json{{"lengths", want_lengths}, {"heights", want_heights}}, json{{"lengths", lengths}, {"heights", heights}},
            lengths == want_lengths && heights == want_heights);
    if (spec.depth >= 1) {
      const std::string want = spec.digit(1) == 0 ? "T s T T" : "T T s T";
      const std::string got = rank1::spaced_word(rank1::rank1_word(spec, 1).word);
      run.add("words." + l + ".first-stage", kDichotomyAnchor,
              "B_1 puts the spacer atop the first column for digit 0 and the second for digit 1", want, got, want == got);
    }
  }
  run.detail("words", words);

  for (const auto& l : labels) {
    const auto& spec = params.at(l);
    int through = 0;
    for (int d = 1; d <= spec.depth; ++d) {
      const auto m = rank1::Rank1Map(spec.digits(d));
      if (itinerary(m) != rank1::rank1_word(spec, d).word) break;
      through = d;
    }
    run.add("coherence." + l, kDichotomyAnchor,
            "the base level's itinerary under the stage-d map spells B_d, for d = 1..depth", json{{"through_depth", spec.depth}},
            json{{"through_depth", through}}, through == spec.depth);
  }

  const auto& expected = knobs.at("expected_dichotomy");
  json table = json::array();
  for (const auto& [x, y] : std::vector<std::pair<std::string, std::string>>{{"a", "b"}, {"a", "c"}, {"b", "c"}}) {
    const std::string pair = x + "-" + y;
    const auto v = rank1::dyadic_equivalence(params.at(x), params.at(y));
    table.push_back({{"pair", pair}, {"difference", rat(v.difference)}, {"verdict", rank1::to_string(v.verdict)}});
    const bool has_expectation = expected.is_object() && expected.contains(pair) && !expected.at(pair).is_null();
    const std::string want = has_expectation ? expected.at(pair).get<std::string>() : "";
    run.add("dichotomy." + pair, has_expectation ? kDichotomyAnchor : kPlumbing,
            "|" + x + " - " + y + "| = " + rat(v.difference) + ": " + v.reason, has_expectation ? json(want) : json(nullptr),
            rank1::to_string(v.verdict), !has_expectation || want == rank1::to_string(v.verdict));
  }
  run.detail("dichotomy", table);

  const json& pairs = knobs.at("agreement_pairs");
  if (!pairs.is_array()) throw ValidationError("config.agreement_pairs", "expected a list");
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const std::string field = "config.agreement_pairs[" + std::to_string(i) + "]";
    const Rational a = parse_number(pairs[i].at("a"), std::nullopt, field + ".a");
    const Rational b = parse_number(pairs[i].at("b"), std::nullopt, field + ".b");
    const int max_stage = 64;
    const auto ag = rank1::agreement_stage(rank1::Rank1Spec::from_rational(a, max_stage),
                                           rank1::Rank1Spec::from_rational(b, max_stage), max_stage);
    json observed = ag.first_difference ? json(*ag.first_difference) : json("agree through " + std::to_string(max_stage));
    bool pass = true;
    if (pairs[i].contains("expected")) pass = observed == pairs[i].at("expected");
    // Agreement through n - 1 digits must give identical stage words there.
    if (ag.first_difference && *ag.first_difference > 1) {
      const int n = *ag.first_difference - 1;
      pass = pass && rank1::rank1_word(rank1::Rank1Spec::from_rational(a, n), n).word ==
                         rank1::rank1_word(rank1::Rank1Spec::from_rational(b, n), n).word;
    }
    run.add("agreement." + std::to_string(i), kContinuityAnchor,
            "first differing binary digit of " + rat(a) + " and " + rat(b),
            pairs[i].contains("expected") ? pairs[i].at("expected") : json(nullptr), observed, pass);
  }

  {
    std::size_t prefixes = 0;
    std::size_t agreeing = 0;
    for (int n = 0; n <= prefix_length; ++n) {
      for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
        std::vector<std::uint8_t> p;
        for (int i = 0; i < n; ++i) p.push_back(static_cast<std::uint8_t>((bits >> i) & 1u));
        auto x = p;
        auto y = p;
        x.insert(x.end(), {0, 1, 1});
        y.insert(y.end(), {1, 0, 0});
        const auto sx = rank1::Rank1Spec::from_digits(x, static_cast<int>(x.size()));
        const auto sy = rank1::Rank1Spec::from_digits(y, static_cast<int>(y.size()));
        ++prefixes;
        bool same = rank1::rank1_word(sx, n).word == rank1::rank1_word(sy, n).word;
        if (n >= 1) same = same && rank1::Rank1Map(sx.digits(n)) == rank1::Rank1Map(sy.digits(n));
        const auto ag = rank1::agreement_stage(sx, sy, static_cast<int>(x.size()));
        same = same && ag.first_difference == n + 1;
        agreeing += same ? 1 : 0;
      }
    }
    run.add("continuity.prefixes", kContinuityAnchor,
            "digit streams sharing a prefix of length n <= " + std::to_string(prefix_length) +
                " have identical stage-n words and maps",
            json{{"identical", prefixes}}, json{{"identical", agreeing}}, agreeing == prefixes);
  }

  for (const auto& l : labels) {
    const auto& spec = params.at(l);
    int through = 0;
    for (int d = 1; d <= std::min(partition_depth, spec.depth); ++d) {
      if (!pieces_partition(rank1::Rank1Map(spec.digits(d)))) break;
      through = d;
    }
    const int want = std::min(partition_depth, spec.depth);
    run.add("partition." + l, kDichotomyAnchor,
            "map pieces are translations whose sources and images tile the defined set exactly",
            json{{"through_depth", want}}, json{{"through_depth", through}}, through == want);

    bool decay = true;
    Rational c = 0;
    json measures = json::array();
    for (int d = 1; d <= spec.depth; ++d) {
      const Rational undefined(1, rank1::stage_length(d));
      if (d == 1) c = undefined;
      Rational bound = c;
      for (int i = 1; i < d; ++i) bound /= 3;
      decay = decay && undefined <= bound;
      measures.push_back(rat(undefined));
    }
    run.add("undefined-decay." + l, kDichotomyAnchor,
            "undefined measure 1/L_d <= c (1/3)^(d-1) with c = 1/4, the depth-1 value",
            "holds for d = 1.." + std::to_string(spec.depth), json{{"holds", decay}, {"measures", measures}}, decay);
  }

  std::vector<sp::Observable> family;
  for (const auto& o : knobs.at("observables")) family.push_back(sp::observable_from_json(o));
  json wm_details = json::object();
  for (const auto& l : labels) {
    const auto sys = rank1::rank1_system(params.at(l));
    const auto r = sp::weak_mixing_test(sys, family, N, threshold);
    wm_details[l] = sp::to_json(r);
    double worst = 0.0;
    for (const auto& e : r.entries) worst = std::max(worst, e.mass);
    run.add("weak-mixing." + l, kWienerAnchor,
            "centered level indicators at depth " + std::to_string(depth) + " show no atoms; " + r.disclaimer,
            "no-atoms-detected (mass < " + json(threshold).dump() + ")", json{{"verdict", r.verdict}, {"max_mass", worst}},
            r.verdict == "no-atoms-detected");
  }
  run.detail("weak_mixing", wm_details);
  run.note("level-indicator correlations do not depend on the digits: the block offsets {0, L+1, 2L+1} and "
           "{0, L, 2L+1} have the same difference multiset, so the weak-mixing rows agree across parameters");

  {
    const int fd = static_cast<int>(knob_int(knobs, "fiber_depth", 1));
    const auto c_spec = params.at("c");
    if (c_spec.is_rational()) {
      const auto fs = rank1::make_Sa_system(Measure::dirac({c_spec.rational()}), fd);
      const auto fiber = fs.fiber({c_spec.rational()});
      const auto* t = dynamic_cast<const rank1::Rank1Transformation*>(fiber.map.get());
      const bool same = t && t->tower() == rank1::rank1_map(rank1::Rank1Spec::from_rational(c_spec.rational(), fd));
      run.add("Sa.dirac-fiber", kSaAnchor, "over a Dirac base the single fiber is T_c at the fiber depth", true, same, same);
    }
    const Measure base = parse_measure(knobs.at("fiber_base"), std::nullopt, "config.fiber_base");
    const auto fs = rank1::make_Sa_system(base, fd);
    const auto points = fs.base_measure().sample(run.seed("Sa.sampled-fibers"),
                                                 static_cast<std::size_t>(knob_int(knobs, "fiber_samples", 2)));
    std::size_t pairs_checked = 0;
    std::size_t agreeing = 0;
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (std::size_t k = i + 1; k < points.size(); ++k) {
        if (points[i] == points[k]) continue;
        const auto v = rank1::dyadic_equivalence(rank1::Rank1Spec::from_rational(points[i][0], fd),
                                                 rank1::Rank1Spec::from_rational(points[k][0], fd));
        const bool dyadic = is_dyadic(abs(points[i][0] - points[k][0]));
        ++pairs_checked;
        agreeing += (v.verdict == rank1::Dichotomy::IsomorphicFamily) == dyadic ? 1 : 0;
      }
    }
    run.add("Sa.sampled-fibers", kSaAnchor,
            "sampled fibers with non-dyadic parameter difference are reported disjoint, dyadic ones isomorphic",
            json{{"agreeing_pairs", pairs_checked}}, json{{"agreeing_pairs", agreeing}}, agreeing == pairs_checked);
    run.note("Haar-sampled parameters are dyadic rationals k/2^64, so their pairwise differences are always dyadic; "
             "the default fiber base is a mixture of non-dyadic atoms");
  }
}

// ---------------------------------------------------------------------------

void spectral_probe(Runner& run, const json& knobs) {
  const SystemSpec spec = knob_system(knobs, "system");
  const System sys = build_system(spec);
  const auto f = sp::observable_from_json(knobs.at("observable"));
  const auto N = knob_int(knobs, "N", 16);
  const bool center = knobs.at("center").get<bool>();
  const auto size = static_cast<std::size_t>(knob_int(knobs, "toeplitz_size", 1));
  const double threshold = knob_double(knobs, "threshold");
  MonteCarloOptions mc{run.seed("sequence"), static_cast<std::size_t>(knob_int(knobs, "samples", 2))};

  const auto c = sp::correlation_sequence(sys, f, {N, center, mc});
  run.detail("sequence", sp::to_json(c));
  const bool exact = c.is_exact();
  double se = 0.0;
  for (double s : c.std_errors) se = std::max(se, s);
  const double tol = exact ? 1e-9 : 4.0 * se + 1e-9;

  {
    bool ok = true;
    for (std::int64_t n = 1; n <= N && ok; ++n) ok = c.at(-n) == std::conj(c.at(n));
    if (c.exact) {
      for (std::int64_t n = 1; n <= std::min<std::int64_t>(N, 64) && ok; ++n) {
        ok = *c.exact_at(-n) == c.exact_at(n)->conj();
      }
    }
    run.add("sequence.hermitian", kHerglotzAnchor, "values(-n) = conj(values(n))", true, ok, ok);
  }
  {
    double worst = 0.0;
    for (std::int64_t n = 0; n <= N; ++n) worst = std::max(worst, std::abs(c.at(n)) - c.at(0).real());
    const bool real0 = std::abs(c.at(0).imag()) <= tol && c.at(0).real() >= -tol;
    run.add("sequence.bounded", kHerglotzAnchor, "values(0) real and nonnegative, |values(n)| <= values(0)",
            "max(|values(n)| - values(0)) <= " + json(tol).dump(), worst, real0 && worst <= tol,
            exact ? std::nullopt : std::optional<double>(se));
  }
  if (static_cast<std::int64_t>(size) - 1 <= N) {
    const double min_eig = sp::toeplitz_min_eigenvalue(c, size);
    const double eig_tol = exact ? 1e-9 : static_cast<double>(size) * tol;
    run.add("sequence.toeplitz-psd", kHerglotzAnchor,
            "smallest eigenvalue of the " + std::to_string(size) + "x" + std::to_string(size) + " Toeplitz matrix",
            ">= -" + json(eig_tol).dump(), min_eig, min_eig >= -eig_tol);
  }
  if (N >= 16) {
    sp::AtomOptions atoms;
    atoms.grid_denominator = static_cast<int>(knob_int(knobs, "grid_denominator", 1));
    for (const auto& cand : knobs.at("candidates")) atoms.candidates.push_back(parse_number(cand, spec.precision, "config.candidates"));
    const auto w = sp::wiener_atomic_mass(c, atoms);
    run.detail("atoms", sp::to_json(w));
    run.add("wiener.total-atomic-mass", kPlumbing, "Wiener average of |values(n)|^2 over n < N (reported)", nullptr,
            w.exact_total_mass ? json{{"mass", w.total_mass}, {"exact", rat(*w.exact_total_mass)}} : json{{"mass", w.total_mass}},
            true);
  }
  const json& angles = knobs.at("angles");
  if (!angles.is_array()) throw ValidationError("config.angles", "expected a list");
  for (std::size_t i = 0; i < angles.size(); ++i) {
    const std::string field = "config.angles[" + std::to_string(i) + "]";
    const json& a = angles[i];
    const Rational t = parse_number(a.is_object() ? a.at("angle") : a, spec.precision, field);
    const auto m = sp::eigenvalue_mass(c, t);
    const bool witnessed = m.mass > threshold;
    const std::string verdict = witnessed ? "eigenvalue-witnessed" : "not-witnessed";
    const bool has_expect = a.is_object() && a.contains("expect");
    run.add("eigenvalue." + rat(frac(t)), has_expect ? kWienerAnchor : kPlumbing,
            "mass of the observable at eigenvalue e(" + rat(frac(t)) + "), threshold " + json(threshold).dump(),
            has_expect ? a.at("expect") : json(nullptr), json{{"verdict", verdict}, {"mass", m.mass}},
            !has_expect || a.at("expect") == verdict);
  }
  const json& scan = knobs.at("fiber_scan");
  if (!scan.is_null()) {
    const auto fs = build_fibered(spec);
    sp::FiberScanOptions opt;
    opt.samples = scan.value("samples", std::size_t{32});
    opt.N = N;
    opt.threshold = threshold;
    opt.seed = run.seed("fiber-scan");
    const Rational t = parse_number(scan.at("angle"), spec.precision, "config.fiber_scan.angle");
    const auto f_fiber = sp::observable_from_json(scan.at("observable"));
    const auto r = sp::fiber_eigenvalue_scan(fs, f_fiber, t, opt);
    run.detail("fiber_scan", sp::to_json(r));
    const bool coherent = !r.flat || !r.flat->witnessed || r.witness_fraction > 0;
    run.add("fiber-scan.coherence", kWienerAnchor,
            "when the flat system witnesses the eigenvalue, some sampled fiber does too", true,
            json{{"witness_fraction", r.witness_fraction}, {"flat", r.flat_note}}, coherent);
  }
}

std::string csv_field(const std::string& s) {
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string plain(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  return v.dump();
}

}  // namespace

bool ExperimentReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

std::vector<std::string> ExperimentReport::failing_checks() const {
  std::vector<std::string> out;
  for (const auto& c : checks) {
    if (!c.pass) out.push_back(c.id);
  }
  return out;
}

json ExperimentReport::to_json() const {
  json cs = json::array();
  for (const auto& c : checks) {
    cs.push_back({{"id", c.id},
                  {"anchor", c.anchor},
                  {"description", c.description},
                  {"expected", c.expected},
                  {"observed", c.observed},
                  {"sigma", c.sigma ? json(*c.sigma) : json(nullptr)},
                  {"verdict", c.pass ? "pass" : "fail"}});
  }
  return {{"experiment", experiment},
          {"seed", seed},
          {"config", config},
          {"verdict", passed() ? "pass" : "fail"},
          {"failing_checks", failing_checks()},
          {"checks", std::move(cs)},
          {"details", details},
          {"notes", notes},
          {"wall_clock_seconds", wall_clock_seconds}};
}

ExperimentReport ExperimentReport::from_json(const json& doc) {
  ExperimentReport r;
  r.experiment = doc.at("experiment").get<std::string>();
  r.seed = doc.at("seed").get<std::uint64_t>();
  r.config = doc.at("config");
  for (const auto& c : doc.at("checks")) {
    Check check;
    check.id = c.at("id").get<std::string>();
    check.anchor = c.at("anchor").get<std::string>();
    check.description = c.at("description").get<std::string>();
    check.expected = c.at("expected");
    check.observed = c.at("observed");
    if (!c.at("sigma").is_null()) check.sigma = c.at("sigma").get<double>();
    check.pass = c.at("verdict").get<std::string>() == "pass";
    r.checks.push_back(std::move(check));
  }
  r.details = doc.at("details");
  r.notes = doc.at("notes").get<std::vector<std::string>>();
  r.wall_clock_seconds = doc.at("wall_clock_seconds").get<double>();
  return r;
}

json default_knobs(const std::string& experiment) { return defaults_for(experiment); }

ExperimentReport run_experiment(const ExperimentConfig& config) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport report;
  report.experiment = config.experiment;
  report.seed = config.seed;
  report.config = resolve(config.experiment, config.knobs);
  Runner run(config, report);
  if (config.experiment == "identity-disjoint") {
    identity_disjoint(run, report.config);
  } else if (config.experiment == "example1") {
    example1(run, report.config);
  } else if (config.experiment == "product-closure") {
    product_closure(run, report.config);
  } else if (config.experiment == "rank1-family") {
    rank1_family(run, report.config);
  } else {
    spectral_probe(run, report.config);
  }
  std::stable_sort(report.checks.begin(), report.checks.end(),
                   [](const Check& a, const Check& b) { return a.id < b.id; });
  report.wall_clock_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

Format parse_format(const std::string& name) {
  if (name == "json") return Format::Json;
  if (name == "csv") return Format::Csv;
  if (name == "markdown" || name == "md") return Format::Markdown;
  throw ValidationError("format", "expected json, csv or markdown, got '" + name + "'");
}

std::string extension(Format f) {
  switch (f) {
    case Format::Json:
      return "json";
    case Format::Csv:
      return "csv";
    case Format::Markdown:
      return "md";
  }
  return "txt";
}

std::string render(const ExperimentReport& report, Format format) {
  if (format == Format::Json) return report.to_json().dump(2) + "\n";
  if (format == Format::Csv) {
    std::string out = "check_id,anchor,expected,observed,sigma,verdict\n";
    for (const auto& c : report.checks) {
      out += csv_field(c.id) + "," + csv_field(c.anchor) + "," + csv_field(plain(c.expected)) + "," +
             csv_field(plain(c.observed)) + "," + (c.sigma ? json(*c.sigma).dump() : "") + "," +
             (c.pass ? "pass" : "fail") + "\n";
    }
    return out;
  }
  std::ostringstream md;
  md << "# " << report.experiment << "\n\n";
  md << "- seed: " << report.seed << "\n";
  md << "- verdict: " << (report.passed() ? "pass" : "fail") << "\n";
  md << "- wall clock: " << json(report.wall_clock_seconds).dump() << " s\n\n";
  md << "## Configuration\n\n```json\n" << report.config.dump(2) << "\n```\n\n";
  md << "## Checks\n\n";
  for (const auto& c : report.checks) {
    md << "### " << c.id << "\n\n";
    md << "- anchor: " << c.anchor << "\n";
    md << "- description: " << c.description << "\n";
    md << "- expected: `" << plain(c.expected) << "`\n";
    md << "- observed: `" << plain(c.observed) << "`\n";
    if (c.sigma) md << "- sigma: " << json(*c.sigma).dump() << "\n";
    md << "- verdict: " << (c.pass ? "pass" : "fail") << "\n\n";
  }
  if (!report.notes.empty()) {
    md << "## Notes\n\n";
    for (const auto& n : report.notes) md << "- " << n << "\n";
  }
  return md.str();
}

std::filesystem::path emit_report(const ExperimentReport& report, Format format, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir.string() + ": " + ec.message());
  const auto path = dir / (report.experiment + "." + extension(format));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render(report, format);
  if (!out) throw std::runtime_error("write failed for " + path.string());
  return path;
}

}  // namespace ergolab::experiments
