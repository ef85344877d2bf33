#include "ergolab/joinings/joinings.hpp"

#include "ergolab/core/errors.hpp"
#include "ergolab/core/parallel.hpp"

#include <cmath>
#include <map>
#include <numbers>
#include <set>

namespace ergolab::joinings {
namespace {

using json = nlohmann::json;

const std::set<std::string> kKinds{"product", "diagonal", "graph", "off-diagonal",
                                   "rel-indep", "example1-triple", "custom-sampler"};

std::size_t family_bound(std::size_t arity) {
  std::int64_t b = 8;
  while (b > 1 && std::pow(2.0 * static_cast<double>(b) + 1.0, static_cast<double>(arity)) > 4096.0) --b;
  return static_cast<std::size_t>(b);
}

const json& require(const json& doc, const std::string& key, const std::string& field) {
  if (!doc.is_object() || !doc.contains(key)) throw ValidationError(field + "." + key, "missing required field");
  return doc.at(key);
}

void require_systems(const JoiningSpec& spec, std::size_t count) {
  if (spec.systems.size() != count) {
    throw ValidationError("systems", spec.kind + " joins " + std::to_string(count) + " system(s), got " +
                                         std::to_string(spec.systems.size()));
  }
}

AffineForm pad(const AffineForm& f, std::size_t before, std::size_t total) {
  AffineForm out = AffineForm::constant(f.offset, total);
  for (std::size_t j = 0; j < f.coeffs.size(); ++j) out.coeffs[before + j] = f.coeffs[j];
  return out;
}

SymbolicPoint pad(const SymbolicPoint& p, std::size_t before, std::size_t total) {
  SymbolicPoint out;
  for (const auto& f : p) out.push_back(pad(f, before, total));
  return out;
}

Joining assemble(JoiningSpec spec, std::vector<System> systems, Measure measure, std::vector<std::string> notes) {
  Joining j;
  std::vector<TransformationPtr> maps;
  std::size_t offset = 0;
  for (const auto& s : systems) {
    j.offsets.push_back(offset);
    offset += s.arity();
    maps.push_back(s.map);
  }
  if (measure.arity() != offset) {
    throw ValidationError("measure", "joining measure has " + std::to_string(measure.arity()) +
                                         " coordinates, the systems have " + std::to_string(offset));
  }
  SystemSpec joint_spec{"joining", spec.to_json(), spec.precision};
  j.joint = make_system(std::move(joint_spec), std::make_shared<ProductMap>(std::move(maps)), std::move(measure));
  j.spec = std::move(spec);
  j.components = std::move(systems);
  j.notes = std::move(notes);
  return j;
}

Measure product_measure(const std::vector<System>& systems) {
  std::vector<Measure> parts;
  for (const auto& s : systems) parts.push_back(s.measure);
  return Measure::product(parts);
}

// (x, R x) pushed forward; sampled when R has no symbolic form.
Measure graph_measure(const System& s, TransformationPtr R, const std::string& description) {
  if (s.measure.symbolic()) {
    std::vector<MeasureComponent> comps;
    bool ok = true;
    for (const auto& c : s.measure.components()) {
      auto image = R->apply_symbolic(c.point);
      if (!image) {
        ok = false;
        break;
      }
      MeasureComponent out = c;
      out.point.insert(out.point.end(), image->begin(), image->end());
      comps.push_back(std::move(out));
    }
    if (ok) return Measure(std::move(comps), description);
  }
  Measure base = s.measure;
  return Measure(
      2 * s.arity(),
      [base, R](Rng& rng) {
        Point x = base.sample(rng);
        Point y = R->apply(x);
        x.insert(x.end(), y.begin(), y.end());
        return x;
      },
      description);
}

// Sum over components of integral e(<k, A P> - <k, B P>); 1 iff A = B in
// every character of k a.s.
std::optional<Frequency> commutation_violation(const System& s, const Transformation& R,
                                               const std::vector<Frequency>& family) {
  for (const auto& k : family) {
    ExactComplex total;
    for (const auto& c : s.measure.components()) {
      auto r = R.apply_symbolic(c.point);
      auto tr = r ? s.map->apply_symbolic(*r) : std::nullopt;
      auto t = s.map->apply_symbolic(c.point);
      auto rt = t ? R.apply_symbolic(*t) : std::nullopt;
      if (!tr || !rt) throw Unsupported("commutation check needs symbolic maps");
      AffineForm form = phase_form(k, *tr);
      form -= phase_form(k, *rt);
      auto part = integrate_phase(c, form);
      if (!part) throw Unsupported("commutation check needs exact integrals");
      total += *part;
    }
    if (total != ExactComplex(Rational(1))) return k;
  }
  return std::nullopt;
}

Joining build_graph(JoiningSpec spec, System s, TransformationPtr R, const std::string& label) {
  if (R->arity() != s.arity()) {
    throw ValidationError("params.map", "graph map acts on " + std::to_string(R->arity()) +
                                            " coordinates, the system has " + std::to_string(s.arity()));
  }
  std::vector<std::string> notes;
  if (s.exact_integrals && R->apply_symbolic(s.measure.components().front().point)) {
    const auto family = character_family(s.arity(), static_cast<std::int64_t>(family_bound(s.arity())));
    if (auto k = find_preservation_violation(s.measure, *R, family)) {
      throw ValidationError("params.map", "graph map does not preserve the measure: character " +
                                              frequency_json(*k).dump() + " changes its integral");
    }
    if (auto k = commutation_violation(s, *R, family)) {
      throw ValidationError("params.map", "graph map does not commute with T: character " +
                                              frequency_json(*k).dump() + " separates T R from R T");
    }
    notes.push_back("graph map preserves the measure and commutes with T on characters |k| <= " +
                    std::to_string(family_bound(s.arity())));
  } else {
    notes.push_back("graph map checks skipped: no exact integrals");
  }
  Measure m = graph_measure(s, R, label + " of " + s.measure.description());
  std::vector<System> systems{s, s};
  return assemble(std::move(spec), std::move(systems), std::move(m), std::move(notes));
}

std::vector<std::size_t> parse_indices(const json& doc, std::size_t arity, const std::string& field) {
  if (!doc.is_array()) throw ValidationError(field, "expected a list of coordinate indices");
  std::vector<std::size_t> out;
  std::set<std::size_t> seen;
  for (const auto& v : doc) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0 || v.get<std::size_t>() >= arity) {
      throw ValidationError(field, "coordinate indices must lie in [0, " + std::to_string(arity) + ")");
    }
    if (!seen.insert(v.get<std::size_t>()).second) throw ValidationError(field, "repeated coordinate index");
    out.push_back(v.get<std::size_t>());
  }
  return out;
}

Point factor_value(const MeasureComponent& c, const std::vector<std::size_t>& idx) {
  Point out;
  for (auto i : idx) out.push_back(c.point[i].offset);
  return out;
}

bool constant_on(const MeasureComponent& c, const std::vector<std::size_t>& idx) {
  for (auto i : idx) {
    if (!c.point[i].is_constant()) return false;
  }
  return true;
}

// Index of the single variable a coordinate equals, if it is exactly v_j.
std::optional<std::size_t> pure_variable(const AffineForm& f) {
  if (f.offset != 0) return std::nullopt;
  std::optional<std::size_t> hit;
  for (std::size_t j = 0; j < f.coeffs.size(); ++j) {
    if (f.coeffs[j] == 0) continue;
    if (f.coeffs[j] != 1 || hit) return std::nullopt;
    hit = j;
  }
  return hit;
}

MeasureComponent join_components(const MeasureComponent& a, const MeasureComponent& b, const Rational& weight) {
  MeasureComponent out;
  out.weight = weight;
  out.variables = a.variables;
  out.variables.insert(out.variables.end(), b.variables.begin(), b.variables.end());
  const std::size_t total = out.variables.size();
  out.point = pad(a.point, 0, total);
  auto right = pad(b.point, a.variables.size(), total);
  out.point.insert(out.point.end(), right.begin(), right.end());
  return out;
}

std::vector<MeasureComponent> diagonal_over_atoms(const Measure& mu, const Measure& nu, const std::vector<std::size_t>& fa,
                                                  const std::vector<std::size_t>& fb) {
  std::map<Point, Rational> pa;
  std::map<Point, Rational> pb;
  for (const auto& c : mu.components()) pa[factor_value(c, fa)] += c.weight;
  for (const auto& c : nu.components()) pb[factor_value(c, fb)] += c.weight;
  if (pa != pb) {
    throw ValidationError("params.factors", "the two factor measures differ, so the diagonal is not a joining of them");
  }
  std::vector<MeasureComponent> out;
  for (const auto& a : mu.components()) {
    const Point y = factor_value(a, fa);
    for (const auto& b : nu.components()) {
      if (factor_value(b, fb) != y) continue;
      out.push_back(join_components(a, b, a.weight * b.weight / pa.at(y)));
    }
  }
  return out;
}

std::vector<MeasureComponent> diagonal_over_haar(const MeasureComponent& a, const MeasureComponent& b,
                                                 const std::vector<std::size_t>& fa,
                                                 const std::vector<std::size_t>& fb) {
  // b's factor variables are identified with a's.
  std::map<std::size_t, std::size_t> rename;
  std::set<std::size_t> used_a;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    auto va = pure_variable(a.point[fa[i]]);
    auto vb = pure_variable(b.point[fb[i]]);
    if (!va || !vb || !used_a.insert(*va).second || rename.count(*vb) ||
        a.variables[*va] != b.variables[*vb] || a.variables[*va].kind == VariableKind::Interval) {
      throw Unsupported("rel-indep over a diagonal base needs factor coordinates that are atoms or distinct "
                        "Haar variables of matching groups");
    }
    rename[*vb] = *va;
  }
  MeasureComponent out;
  out.weight = a.weight * b.weight;
  out.variables = a.variables;
  for (std::size_t j = 0; j < b.variables.size(); ++j) {
    if (rename.count(j)) continue;
    rename[j] = out.variables.size();
    out.variables.push_back(b.variables[j]);
  }
  const std::size_t total = out.variables.size();
  out.point = pad(a.point, 0, total);
  for (const auto& f : b.point) {
    AffineForm g = AffineForm::constant(f.offset, total);
    for (std::size_t j = 0; j < f.coeffs.size(); ++j) g.coeffs[rename.at(j)] += f.coeffs[j];
    out.point.push_back(std::move(g));
  }
  return {out};
}

Joining build_rel_indep(JoiningSpec spec, std::vector<System> systems) {
  const json& p = spec.params;
  std::vector<std::size_t> fa;
  std::vector<std::size_t> fb;
  if (p.contains("factors")) {
    const json& f = p.at("factors");
    if (!f.is_array() || f.size() != 2) throw ValidationError("params.factors", "expected two index lists");
    fa = parse_indices(f[0], systems[0].arity(), "params.factors[0]");
    fb = parse_indices(f[1], systems[1].arity(), "params.factors[1]");
  }
  const std::string base = p.value("base", std::string("product"));
  if (base != "product" && base != "diagonal") {
    throw ValidationError("params.base", "expected \"product\" or \"diagonal\", got '" + base + "'");
  }
  std::vector<std::string> notes;
  if (fa.empty() && fb.empty()) {
    notes.push_back("trivial factor: the relatively independent joining is the product");
    Measure m = product_measure(systems);
    return assemble(std::move(spec), std::move(systems), std::move(m), std::move(notes));
  }
  if (base == "product") {
    notes.push_back("independent factors: fibers drawn independently over independent bases give the product");
    Measure m = product_measure(systems);
    return assemble(std::move(spec), std::move(systems), std::move(m), std::move(notes));
  }
  if (fa.size() != fb.size()) throw ValidationError("params.factors", "diagonal base needs equal factor arities");
  const Measure& mu = systems[0].measure;
  const Measure& nu = systems[1].measure;
  if (!mu.symbolic() || !nu.symbolic()) {
    throw Unsupported("rel-indep over a diagonal base needs symbolic fiber measures");
  }
  auto atoms = [](const Measure& m, const std::vector<std::size_t>& idx) {
    return std::all_of(m.components().begin(), m.components().end(),
                       [&](const MeasureComponent& c) { return constant_on(c, idx); });
  };
  std::vector<MeasureComponent> comps;
  if (atoms(mu, fa) && atoms(nu, fb)) {
    comps = diagonal_over_atoms(mu, nu, fa, fb);
    notes.push_back("factor measure is atomic; fibers are grouped by atom");
  } else if (mu.components().size() == 1 && nu.components().size() == 1) {
    comps = diagonal_over_haar(mu.components().front(), nu.components().front(), fa, fb);
    notes.push_back("factor coordinates are shared Haar variables; fibers drawn independently given them");
  } else {
    throw Unsupported("rel-indep over a diagonal base needs atomic factors or single-component Haar factors");
  }
  Measure m(std::move(comps), "rel-indep(" + mu.description() + ", " + nu.description() + ")");
  Joining j = assemble(std::move(spec), std::move(systems), std::move(m), std::move(notes));
  if (j.exact()) {
    const auto family = character_family(j.arity(), 1);
    auto report = invariance_check(j, family);
    if (!report.pass) {
      throw ValidationError("params.factors", "coupling the factors diagonally is not invariant: character " +
                                                  frequency_json(*report.first_failure).dump());
    }
  }
  return j;
}

json cocycle_json(const Cocycle& c, const Rational& shift) {
  if (c.is_affine()) {
    json slopes = json::array();
    for (const auto& s : c.as_affine().slopes) slopes.push_back(format_rational(s));
    return {{"kind", "affine"}, {"slope", slopes}, {"offset", format_rational(frac(c.as_affine().offset + shift))}};
  }
  json values = json::array();
  for (const auto& [at, v] : c.as_table()) {
    json a = json::array();
    for (const auto& x : at) a.push_back(format_rational(x));
    values.push_back({{"at", a}, {"value", format_rational(frac(v + shift))}});
  }
  return {{"kind", "table"}, {"values", values}};
}

Joining build_example1(JoiningSpec spec) {
  const json& p = spec.params;
  const auto precision = spec.precision;
  const Rational alpha = parse_number(require(p, "alpha", "params"), precision, "params.alpha");
  const json rho_doc = p.contains("base_measure") ? p.at("base_measure") : json("haar");
  const Measure rho = parse_measure(rho_doc, precision, "params.base_measure");
  if (rho.arity() != 1) throw ValidationError("params.base_measure", "the base is the circle");
  const json cocycle_doc = p.contains("cocycle") ? p.at("cocycle") : json{{"kind", "affine"}, {"slope", "1"}};
  const Cocycle beta = parse_cocycle(cocycle_doc, 1, precision, "params.cocycle");

  SystemSpec t_spec{"twist", {{"base_measure", rho_doc}, {"cocycle", cocycle_json(beta, 0)}}, precision};
  SystemSpec r_spec{"twist", {{"base_measure", rho_doc}, {"cocycle", cocycle_json(beta, alpha)}}, precision};
  spec.systems = {t_spec, r_spec};
  std::vector<System> systems{build_system(t_spec), build_system(r_spec)};

  Measure m;
  const std::string description = "x ~ " + rho.description() + ", y, z ~ Haar, x' = x";
  if (rho.symbolic()) {
    std::vector<MeasureComponent> comps;
    for (const auto& c : rho.components()) {
      MeasureComponent out;
      out.weight = c.weight;
      out.variables = c.variables;
      out.variables.push_back(Variable::circle());
      out.variables.push_back(Variable::circle());
      const std::size_t total = out.variables.size();
      const AffineForm x = pad(c.point[0], 0, total);
      out.point = {x, AffineForm::variable(total - 2, total), x, AffineForm::variable(total - 1, total)};
      comps.push_back(std::move(out));
    }
    m = Measure(std::move(comps), description);
  } else {
    m = Measure(
        4,
        [rho](Rng& rng) {
          const Rational x = rho.sample(rng).at(0);
          const Rational y = uniform_rational(rng);
          const Rational z = uniform_rational(rng);
          return Point{x, y, x, z};
        },
        description);
  }
  std::vector<std::string> notes{"coordinates (x, y, x', z); x' = x carries the shared base point",
                                 "P(x, y, x', z) = (x, y + beta(x), x', z + beta(x') + alpha)"};
  return assemble(std::move(spec), std::move(systems), std::move(m), std::move(notes));
}

struct DoubleSamples {
  std::size_t arity = 0;
  std::vector<double> coords;  // row-major
  // e(m x_j) for m = 0..degree, laid out [sample][coordinate][m].
  std::int64_t degree = 0;
  std::vector<std::complex<double>> powers;

  std::size_t count() const { return arity ? coords.size() / arity : 0; }
};

void build_powers(DoubleSamples& s, std::int64_t degree) {
  const std::size_t width = static_cast<std::size_t>(degree) + 1;
  s.degree = degree;
  s.powers.assign(s.coords.size() * width, {1.0, 0.0});
  for (std::size_t i = 0; i < s.coords.size(); ++i) {
    const double a = 2.0 * std::numbers::pi * s.coords[i];
    const std::complex<double> base{std::cos(a), std::sin(a)};
    for (std::size_t m = 1; m < width; ++m) s.powers[i * width + m] = s.powers[i * width + m - 1] * base;
  }
}

DoubleSamples to_doubles(const std::vector<Point>& points, std::size_t arity) {
  DoubleSamples out;
  out.arity = arity;
  out.coords.resize(points.size() * arity);
  parallel_for(points.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < arity; ++j) out.coords[i * arity + j] = to_double(points[i][j]);
  });
  return out;
}

std::complex<double> char_at(const Frequency& k, const double* x) {
  double phase = 0.0;
  for (std::size_t j = 0; j < k.size(); ++j) {
    if (k[j] != 0) phase += static_cast<double>(k[j]) * x[j];
  }
  phase -= std::floor(phase);
  const double a = 2.0 * std::numbers::pi * phase;
  return {std::cos(a), std::sin(a)};
}

struct Moments {
  std::complex<double> mean;
  double std_error = 0.0;
};

Moments character_moments(const Frequency& k, const DoubleSamples& s) {
  const std::size_t n = s.count();
  std::complex<double> sum{0, 0};
  const bool tabled = !s.powers.empty() &&
                      std::all_of(k.begin(), k.end(), [&](auto v) { return std::abs(v) <= s.degree; });
  if (tabled) {
    const std::size_t width = static_cast<std::size_t>(s.degree) + 1;
    for (std::size_t i = 0; i < n; ++i) {
      std::complex<double> z{1.0, 0.0};
      const std::complex<double>* row = &s.powers[i * s.arity * width];
      for (std::size_t j = 0; j < k.size(); ++j) {
        if (k[j] > 0) {
          z *= row[j * width + static_cast<std::size_t>(k[j])];
        } else if (k[j] < 0) {
          z *= std::conj(row[j * width + static_cast<std::size_t>(-k[j])]);
        }
      }
      sum += z;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) sum += char_at(k, &s.coords[i * s.arity]);
  }
  const double dn = static_cast<double>(n);
  const std::complex<double> mean = sum / dn;
  // |chi| = 1, so E|Z|^2 = 1.
  const double variance = std::max(0.0, (dn - dn * std::norm(mean)) / (dn - 1));
  return {mean, std::sqrt(variance / dn)};
}

bool within(const std::complex<double>& diff, double se, double sigmas) {
  return std::abs(diff) <= sigmas * se + 1e-12;
}

Frequency embed(const Frequency& block, std::size_t offset, std::size_t arity) {
  Frequency k(arity, 0);
  std::copy(block.begin(), block.end(), k.begin() + static_cast<std::ptrdiff_t>(offset));
  return k;
}

bool is_zero_frequency(const Frequency& k) {
  return std::all_of(k.begin(), k.end(), [](auto v) { return v == 0; });
}

json complex_json(const std::complex<double>& z) { return json::array({z.real(), z.imag()}); }

json check_json(const CharacterCheck& c) {
  json doc{{"character", frequency_json(c.k)},
           {"expected", complex_json(c.expected)},
           {"observed", complex_json(c.observed)},
           {"sigma", c.std_error},
           {"pass", c.pass}};
  if (c.exact_expected) doc["exact_expected"] = c.exact_expected->to_string();
  if (c.exact_observed) doc["exact_observed"] = c.exact_observed->to_string();
  return doc;
}

}  // namespace

JoiningSpec JoiningSpec::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("joining", "expected a JSON object");
  for (const auto& [key, value] : doc.items()) {
    if (key != "kind" && key != "systems" && key != "params" && key != "precision") {
      throw ValidationError(key, "unknown field in joining spec");
    }
  }
  JoiningSpec spec;
  if (!doc.contains("kind") || !doc.at("kind").is_string()) throw ValidationError("kind", "missing joining kind");
  spec.kind = doc.at("kind").get<std::string>();
  if (!kKinds.count(spec.kind)) throw ValidationError("kind", "unknown joining kind '" + spec.kind + "'");
  if (doc.contains("precision")) {
    if (!doc.at("precision").is_number_integer() || doc.at("precision").get<int>() < 1) {
      throw ValidationError("precision", "expected a positive integer");
    }
    spec.precision = doc.at("precision").get<int>();
  }
  if (doc.contains("systems")) {
    const json& systems = doc.at("systems");
    if (!systems.is_array()) throw ValidationError("systems", "expected a list of system specs");
    for (std::size_t i = 0; i < systems.size(); ++i) {
      try {
        SystemSpec s = SystemSpec::from_json(systems[i]);
        if (!s.precision) s.precision = spec.precision;
        spec.systems.push_back(std::move(s));
      } catch (const ValidationError& e) {
        throw ValidationError("systems[" + std::to_string(i) + "]." + e.field(), e.what());
      }
    }
  }
  if (doc.contains("params")) {
    if (!doc.at("params").is_object()) throw ValidationError("params", "expected an object");
    spec.params = doc.at("params");
  }
  return spec;
}

json JoiningSpec::to_json() const {
  json systems_doc = json::array();
  for (const auto& s : systems) systems_doc.push_back(s.to_json());
  json doc{{"kind", kind}, {"systems", systems_doc}, {"params", params}};
  if (precision) doc["precision"] = *precision;
  return doc;
}

Frequency Joining::block(const Frequency& k, std::size_t i) const {
  const auto begin = k.begin() + static_cast<std::ptrdiff_t>(offsets.at(i));
  return Frequency(begin, begin + static_cast<std::ptrdiff_t>(components.at(i).arity()));
}

Joining build_joining(const JoiningSpec& spec_in) {
  JoiningSpec spec = spec_in;
  if (!kKinds.count(spec.kind)) throw ValidationError("kind", "unknown joining kind '" + spec.kind + "'");
  if (spec.kind == "example1-triple") return build_example1(std::move(spec));

  std::vector<System> systems;
  for (std::size_t i = 0; i < spec.systems.size(); ++i) {
    try {
      systems.push_back(build_system(spec.systems[i]));
    } catch (const ValidationError& e) {
      throw ValidationError("systems[" + std::to_string(i) + "]." + e.field(), e.what());
    }
  }

  if (spec.kind == "product") {
    if (systems.empty()) throw ValidationError("systems", "product joining needs at least one system");
    Measure m = product_measure(systems);
    return assemble(std::move(spec), std::move(systems), std::move(m), {});
  }
  if (spec.kind == "diagonal") {
    require_systems(spec, 1);
    const System s = systems.front();
    return build_graph(std::move(spec), s, std::make_shared<IdentityMap>(s.arity()), "diagonal");
  }
  if (spec.kind == "graph") {
    require_systems(spec, 1);
    const System s = systems.front();
    SystemSpec r_spec;
    try {
      r_spec = SystemSpec::from_json(require(spec.params, "map", "params"));
      if (!r_spec.precision) r_spec.precision = spec.precision;
    } catch (const ValidationError& e) {
      throw ValidationError("params.map." + e.field(), e.what());
    }
    const System r = build_system(r_spec);
    return build_graph(std::move(spec), s, r.map, "graph");
  }
  if (spec.kind == "off-diagonal") {
    require_systems(spec, 1);
    const System s = systems.front();
    const json& n = require(spec.params, "power", "params");
    if (!n.is_number_integer()) throw ValidationError("params.power", "expected an integer");
    return build_graph(std::move(spec), s, std::make_shared<PowerMap>(s.map, n.get<std::int64_t>()), "off-diagonal");
  }
  if (spec.kind == "rel-indep") {
    require_systems(spec, 2);
    return build_rel_indep(std::move(spec), std::move(systems));
  }
  // custom-sampler
  if (systems.empty()) throw ValidationError("systems", "custom-sampler needs at least one system");
  const Measure parsed = parse_measure(require(spec.params, "measure", "params"), spec.precision, "params.measure");
  const Measure sampled(
      parsed.arity(), [parsed](Rng& rng) { return parsed.sample(rng); }, parsed.description() + " (sampled)");
  return assemble(std::move(spec), std::move(systems), sampled, {"custom sampler: integrals are sampled only"});
}

Joining make_custom_joining(std::vector<System> systems, Measure::Sampler sampler, std::string description) {
  if (systems.empty()) throw ValidationError("systems", "custom-sampler needs at least one system");
  JoiningSpec spec{"custom-sampler", {}, {{"sampler", description}}, std::nullopt};
  for (const auto& s : systems) spec.systems.push_back(s.spec);
  std::size_t arity = 0;
  for (const auto& s : systems) arity += s.arity();
  Measure m(arity, std::move(sampler), std::move(description));
  return assemble(std::move(spec), std::move(systems), std::move(m), {"custom sampler: integrals are sampled only"});
}

Joining product_of_components(const Joining& j) {
  JoiningSpec spec{"product", {}, json::object(), j.spec.precision};
  for (const auto& s : j.components) spec.systems.push_back(s.spec);
  return assemble(std::move(spec), j.components, product_measure(j.components), {});
}

std::vector<Point> sample_joining(const Joining& j, std::uint64_t seed, std::size_t count) {
  if (count < 1) throw ValidationError("count", "sample count must be >= 1");
  return j.joint.measure.sample(seed, count);
}

CheckReport invariance_check(const Joining& j, const std::vector<Frequency>& family, const SamplingOptions& opt) {
  if (family.empty()) throw ValidationError("family", "invariance check needs at least one character");
  CheckReport out;
  out.name = "invariance";
  out.rows.resize(family.size());
  if (j.exact() && !opt.sampled_only) {
    out.exact = true;
    parallel_for(family.size(), [&](std::size_t i) {
      CharacterCheck& row = out.rows[i];
      row.k = family[i];
      row.exact_expected = j.integrate_exact(family[i]);
      row.exact_observed = integrate_character_after(j.joint.measure, *j.joint.map, family[i], 1);
      if (!row.exact_expected || !row.exact_observed) throw Unsupported("exact joining lost exactness");
      row.expected = row.exact_expected->value();
      row.observed = row.exact_observed->value();
      row.pass = *row.exact_expected == *row.exact_observed;
    });
  } else {
    out.samples = opt.samples;
    const auto points = sample_joining(j, opt.seed, opt.samples);
    std::vector<Point> images(points.size());
    parallel_for(points.size(), [&](std::size_t i) { images[i] = j.joint.apply(points[i]); });
    const auto before = to_doubles(points, j.arity());
    const auto after = to_doubles(images, j.arity());
    parallel_for(family.size(), [&](std::size_t i) {
      CharacterCheck& row = out.rows[i];
      row.k = family[i];
      const std::size_t n = points.size();
      std::complex<double> sb{0, 0};
      std::complex<double> sa{0, 0};
      double sq = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        const auto b = char_at(row.k, &before.coords[s * before.arity]);
        const auto a = char_at(row.k, &after.coords[s * after.arity]);
        sb += b;
        sa += a;
        sq += std::norm(a - b);
      }
      const double dn = static_cast<double>(n);
      row.expected = sb / dn;
      row.observed = sa / dn;
      const auto diff = row.observed - row.expected;
      const double variance = std::max(0.0, (sq - dn * std::norm(diff)) / std::max(1.0, dn - 1));
      row.std_error = std::sqrt(variance / dn);
      row.pass = within(diff, row.std_error, opt.sigmas);
    });
  }
  for (const auto& row : out.rows) {
    if (!row.pass) {
      out.pass = false;
      out.first_failure = row.k;
      break;
    }
  }
  return out;
}

CheckReport marginal_check(const Joining& j, std::int64_t bound, const SamplingOptions& opt) {
  CheckReport out;
  out.name = "marginals";
  std::vector<Frequency> family;
  std::vector<std::size_t> owner;
  for (std::size_t i = 0; i < j.components.size(); ++i) {
    for (const auto& b : character_family(j.components[i].arity(), bound)) {
      if (is_zero_frequency(b)) continue;
      family.push_back(embed(b, j.offsets[i], j.arity()));
      owner.push_back(i);
    }
  }
  out.rows.resize(family.size());
  std::optional<DoubleSamples> samples;
  out.exact = j.exact() && !opt.sampled_only;
  if (!out.exact) {
    out.samples = opt.samples;
    samples = to_doubles(sample_joining(j, opt.seed, opt.samples), j.arity());
    build_powers(*samples, bound);
  }
  parallel_for(family.size(), [&](std::size_t i) {
    CharacterCheck& row = out.rows[i];
    row.k = family[i];
    const System& s = j.components[owner[i]];
    MonteCarloOptions mc{derive_seed(opt.seed, i), opt.samples};
    const auto own = integrate_character(s.measure, j.block(row.k, owner[i]), mc);
    row.expected = own.value;
    row.exact_expected = own.exact;
    if (samples) {
      const auto m = character_moments(row.k, *samples);
      row.observed = m.mean;
      row.std_error = std::hypot(m.std_error, own.std_error);
      row.pass = within(row.observed - row.expected, row.std_error, opt.sigmas);
      return;
    }
    row.exact_observed = j.integrate_exact(row.k);
    row.observed = row.exact_observed->value();
    if (row.exact_expected) {
      row.pass = *row.exact_expected == *row.exact_observed;
    } else {
      row.std_error = own.std_error;
      row.pass = within(row.observed - row.expected, row.std_error, opt.sigmas);
    }
  });
  for (const auto& row : out.rows) {
    if (!row.pass) {
      out.pass = false;
      out.first_failure = row.k;
      break;
    }
  }
  return out;
}

std::optional<Rational> eigencharacter_phase(const Joining& j, const Frequency& k) {
  if (!j.joint.measure.symbolic()) return std::nullopt;
  std::optional<Rational> phase;
  for (const auto& c : j.joint.measure.components()) {
    auto image = j.joint.map->apply_symbolic(c.point);
    if (!image) return std::nullopt;
    AffineForm form = phase_form(k, *image);
    form -= phase_form(k, c.point);
    // The difference must be constant on the component's support.
    for (std::size_t v = 0; v < form.coeffs.size(); ++v) {
      if (form.coeffs[v] == 0) continue;
      const Variable& var = c.variables[v];
      if (var.kind == VariableKind::Cyclic && form.coeffs[v] % var.modulus == 0) continue;
      return std::nullopt;
    }
    if (phase && *phase != form.offset) return std::nullopt;
    phase = form.offset;
  }
  return phase;
}

ConsistencyReport product_consistency_test(const Joining& j, std::int64_t degree, const SamplingOptions& opt) {
  if (degree < 1) throw ValidationError("degree", "degree must be >= 1");
  ConsistencyReport out;
  out.degree = degree;
  std::vector<Frequency> family;
  for (auto& k : character_family(j.arity(), degree)) {
    if (!is_zero_frequency(k)) family.push_back(std::move(k));
  }
  // Lowest degree first, positive leading entries first, so witnesses read
  // e(x - y) rather than e(-x + y).
  std::stable_sort(family.begin(), family.end(), [](const Frequency& a, const Frequency& b) {
    const auto sup = [](const Frequency& k) {
      std::int64_t m = 0;
      for (auto v : k) m = std::max(m, std::abs(v));
      return m;
    };
    if (sup(a) != sup(b)) return sup(a) < sup(b);
    return a > b;
  });
  out.characters = family.size();
  out.rows.resize(family.size());

  bool marginals_exact = true;
  for (const auto& s : j.components) marginals_exact = marginals_exact && s.measure.exact();
  out.exact = j.exact() && marginals_exact && !opt.sampled_only;

  std::optional<DoubleSamples> samples;
  if (!out.exact) {
    out.samples = opt.samples;
    samples = to_doubles(sample_joining(j, opt.seed, opt.samples), j.arity());
    build_powers(*samples, degree);
  }
  std::vector<double> z(family.size(), 0.0);
  parallel_for(family.size(), [&](std::size_t i) {
    CharacterCheck& row = out.rows[i];
    row.k = family[i];
    ExactComplex exact_product(Rational(1));
    std::complex<double> product{1, 0};
    double product_se = 0.0;
    bool product_exact = true;
    for (std::size_t c = 0; c < j.components.size(); ++c) {
      const Frequency b = j.block(row.k, c);
      if (is_zero_frequency(b)) continue;
      MonteCarloOptions mc{derive_seed(opt.seed, i * j.components.size() + c + 1), opt.samples};
      const auto v = integrate_character(j.components[c].measure, b, mc);
      product *= v.value;
      product_se += v.std_error;
      if (v.exact && product_exact) {
        exact_product *= *v.exact;
      } else {
        product_exact = false;
      }
    }
    row.expected = product;
    if (product_exact) row.exact_expected = exact_product;
    if (samples) {
      const auto m = character_moments(row.k, *samples);
      row.observed = m.mean;
      row.std_error = std::hypot(m.std_error, product_se);
    } else {
      row.exact_observed = j.integrate_exact(row.k);
      row.observed = row.exact_observed->value();
    }
    if (row.exact_observed && row.exact_expected) {
      row.pass = *row.exact_observed == *row.exact_expected;
      z[i] = row.pass ? 0.0 : std::numeric_limits<double>::infinity();
    } else {
      const double diff = std::abs(row.observed - row.expected);
      z[i] = row.std_error > 0 ? diff / row.std_error : (diff > 1e-12 ? std::numeric_limits<double>::infinity() : 0.0);
      row.pass = within(row.observed - row.expected, row.std_error, opt.sigmas);
    }
  });
  for (std::size_t i = 0; i < family.size(); ++i) {
    out.max_z = std::max(out.max_z, z[i]);
    if (!out.rows[i].pass && !out.witness) out.witness = out.rows[i].k;
  }
  out.verdict = out.witness ? "refuted" : "consistent-with-product";
  return out;
}

EigenvalueRefutation eigenvalue_refutation(const Joining& j, const Frequency& k, const Rational& angle, std::int64_t N,
                                           double threshold) {
  EigenvalueRefutation out;
  out.joint = spectral::detect_eigenvalue(j.joint, spectral::Character{k}, angle, N, threshold);
  const Joining product = product_of_components(j);
  out.product = spectral::detect_eigenvalue(product.joint, spectral::Character{k}, angle, N, threshold);
  out.product_bound = 2.0 / static_cast<double>(N);
  out.refuted = out.joint.witnessed && out.product.mass <= out.product_bound;
  return out;
}

json frequency_json(const Frequency& k) { return json(k); }

json to_json(const CheckReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back(check_json(row));
  return {{"name", r.name},
          {"exact", r.exact},
          {"samples", r.samples},
          {"pass", r.pass},
          {"first_failure", r.first_failure ? frequency_json(*r.first_failure) : json(nullptr)},
          {"rows", std::move(rows)}};
}

json to_json(const ConsistencyReport& r) {
  json rows = json::array();
  for (const auto& row : r.rows) rows.push_back(check_json(row));
  return {{"degree", r.degree},
          {"exact", r.exact},
          {"samples", r.samples},
          {"characters", r.characters},
          {"verdict", r.verdict},
          {"witness", r.witness ? frequency_json(*r.witness) : json(nullptr)},
          {"max_z", std::isfinite(r.max_z) ? json(r.max_z) : json("inf")},
          {"note", r.note},
          {"rows", std::move(rows)}};
}

json to_json(const EigenvalueRefutation& r) {
  return {{"joint", spectral::to_json(r.joint)},
          {"product", spectral::to_json(r.product)},
          {"product_bound", r.product_bound},
          {"refuted", r.refuted}};
}

std::string to_csv(const ConsistencyReport& r) {
  std::string out = "character,joint_re,joint_im,product_re,product_im,sigma,pass\n";
  for (const auto& row : r.rows) {
    std::string k;
    for (std::size_t i = 0; i < row.k.size(); ++i) k += (i ? " " : "") + std::to_string(row.k[i]);
    out += "\"" + k + "\"," + json(row.observed.real()).dump() + "," + json(row.observed.imag()).dump() + "," +
           json(row.expected.real()).dump() + "," + json(row.expected.imag()).dump() + "," +
           json(row.std_error).dump() + "," + (row.pass ? "true" : "false") + "\n";
  }
  return out;
}

}  // namespace ergolab::joinings
