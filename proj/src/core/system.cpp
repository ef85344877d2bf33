#include "ergolab/core/system.hpp"

#include "ergolab/core/errors.hpp"
#include "ergolab/rank1/rank1.hpp"

#include <boost/integer/common_factor.hpp>

#include <set>

namespace ergolab {
namespace {

using nlohmann::json;

const std::set<std::string>& known_kinds() {
  static const std::set<std::string> kinds{"rotation", "identity",     "twist",       "group-extension",
                                           "product",  "fibered",      "rank1-family"};
  return kinds;
}

const json& require(const json& params, const std::string& key, const std::string& field) {
  if (!params.is_object() || !params.contains(key)) throw ValidationError(field + "." + key, "missing");
  return params.at(key);
}

std::int64_t require_int(const json& doc, const std::string& field) {
  if (!doc.is_number_integer()) throw ValidationError(field, "expected an integer");
  return doc.get<std::int64_t>();
}

std::optional<int> effective_precision(const SystemSpec& spec, std::optional<int> inherited) {
  return spec.precision ? spec.precision : inherited;
}

// Structural invariance for rotations: every component must be Haar on the
// circle or Haar on a coset of a cyclic group that the angle preserves.
void check_rotation_invariant(const Measure& m, const Rational& angle) {
  if (m.arity() != 1) throw ValidationError("params.measure", "rotation measure must be one-dimensional");
  if (!m.symbolic()) throw ValidationError("params.measure", "rotation measure must be declarative");
  for (const auto& c : m.components()) {
    const AffineForm& f = c.point.front();
    bool invariant = false;
    if (f.is_constant()) {
      invariant = frac(angle) == 0;
    } else {
      for (std::size_t j = 0; j < f.coeffs.size(); ++j) {
        if (f.coeffs[j] == 0) continue;
        const Variable& v = c.variables[j];
        if (v.kind == VariableKind::Circle) {
          invariant = true;
        } else if (v.kind == VariableKind::Cyclic) {
          const std::int64_t step = boost::integer::gcd(f.coeffs[j] < 0 ? -f.coeffs[j] : f.coeffs[j], v.modulus);
          if (is_integer(angle * v.modulus / step)) invariant = true;
        }
      }
    }
    if (!invariant) {
      throw ValidationError("params.measure", "measure " + m.description() + " is not invariant under rotation by " +
                                                  format_rational(angle));
    }
  }
}

void check_table_support(const Cocycle& cocycle, const Measure& base, const std::string& field) {
  if (cocycle.is_affine()) return;
  if (!base.symbolic()) throw ValidationError(field, "a table cocycle needs a declarative base measure");
  for (const auto& c : base.components()) {
    Point at;
    for (const auto& f : c.point) {
      if (!f.is_constant()) {
        throw ValidationError(field, "a table cocycle needs a finitely supported base measure, got " +
                                         base.description());
      }
      at.push_back(f.offset);
    }
    cocycle.evaluate(at);
  }
}

System build(const SystemSpec& spec, std::optional<int> inherited);

System build_skew(const SystemSpec& spec, System base, const json& cocycle_doc, FiberGroup group,
                  std::optional<int> precision) {
  const Cocycle cocycle = parse_cocycle(cocycle_doc, base.arity(), precision, "params.cocycle");
  check_table_support(cocycle, base.measure, "params.cocycle");
  auto map = std::make_shared<SkewProduct>(base.map, cocycle, group);
  const Measure fiber = group.kind == FiberGroup::Kind::Circle ? Measure::haar() : Measure::cyclic_haar(group.modulus);
  const std::vector<Measure> parts{base.measure, fiber};
  return make_system(spec, std::move(map), Measure::product(parts));
}

FiberGroup parse_group(const json& doc) {
  if (doc.is_string() && doc.get<std::string>() == "circle") return FiberGroup::circle();
  if (!doc.is_object()) throw ValidationError("params.group", "expected {\"kind\": \"circle\"|\"cyclic\"}");
  const std::string kind = require(doc, "kind", "params.group").get<std::string>();
  if (kind == "circle") return FiberGroup::circle();
  if (kind == "cyclic") {
    const auto m = require_int(require(doc, "modulus", "params.group"), "params.group.modulus");
    if (m < 1) throw ValidationError("params.group.modulus", "must be >= 1");
    return FiberGroup::cyclic(m);
  }
  throw ValidationError("params.group.kind", "unknown group '" + kind + "'");
}

System build(const SystemSpec& spec, std::optional<int> inherited) {
  const auto precision = effective_precision(spec, inherited);
  const json& p = spec.params;
  if (!known_kinds().contains(spec.kind)) {
    throw ValidationError("kind", "unknown system kind '" + spec.kind + "'");
  }
  if (!p.is_object()) throw ValidationError("params", "expected an object");

  if (spec.kind == "rotation") {
    const Rational angle = frac(parse_number(require(p, "angle", "params"), precision, "params.angle"));
    Measure m = p.contains("measure") ? parse_measure(p.at("measure"), precision, "params.measure") : Measure::haar();
    check_rotation_invariant(m, angle);
    return make_system(spec, std::make_shared<Rotation>(angle), std::move(m));
  }
  if (spec.kind == "identity") {
    Measure m = parse_measure(require(p, "measure", "params"), precision, "params.measure");
    auto map = std::make_shared<IdentityMap>(m.arity());
    return make_system(spec, std::move(map), std::move(m));
  }
  if (spec.kind == "twist") {
    Measure base = parse_measure(require(p, "base_measure", "params"), precision, "params.base_measure");
    System base_system = make_system(SystemSpec{"identity", json::object(), precision},
                                     std::make_shared<IdentityMap>(base.arity()), base);
    return build_skew(spec, std::move(base_system), require(p, "cocycle", "params"), FiberGroup::circle(), precision);
  }
  if (spec.kind == "group-extension") {
    System base = build(SystemSpec::from_json(require(p, "base", "params")), precision);
    const FiberGroup group = parse_group(require(p, "group", "params"));
    return build_skew(spec, std::move(base), require(p, "cocycle", "params"), group, precision);
  }
  if (spec.kind == "product") {
    const json& factors = require(p, "factors", "params");
    if (!factors.is_array() || factors.empty()) {
      throw ValidationError("params.factors", "product needs a non-empty list of factors");
    }
    std::vector<TransformationPtr> maps;
    std::vector<Measure> measures;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      System f = build(SystemSpec::from_json(factors[i]), precision);
      maps.push_back(f.map);
      measures.push_back(f.measure);
    }
    return make_system(spec, std::make_shared<ProductMap>(std::move(maps)), Measure::product(measures));
  }
  if (spec.kind == "fibered") {
    return build_fibered(spec).flat();
  }
  // rank1-family
  const auto depth = require_int(require(p, "depth", "params"), "params.depth");
  if (depth < 1 || depth > rank1::kMaxMapDepth) {
    throw ValidationError("params.depth", "depth must be in [1, " + std::to_string(rank1::kMaxMapDepth) + "]");
  }
  rank1::Rank1Spec r;
  if (p.contains("digits")) {
    std::vector<std::uint8_t> digits;
    for (char c : p.at("digits").get<std::string>()) {
      if (c != '0' && c != '1') throw ValidationError("params.digits", "digits must be 0 or 1");
      digits.push_back(static_cast<std::uint8_t>(c - '0'));
    }
    r = rank1::Rank1Spec::from_digits(std::move(digits), static_cast<int>(depth));
  } else {
    const Rational a = parse_number(require(p, "a", "params"), precision, "params.a");
    if (a < 0 || a > 1) throw ValidationError("params.a", "parameter must lie in [0, 1]");
    r = rank1::Rank1Spec::from_rational(a, static_cast<int>(depth));
  }
  System sys = rank1::rank1_system(r);
  sys.spec = spec;
  return sys;
}

}  // namespace

SystemSpec SystemSpec::from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("", "system spec must be a JSON object");
  SystemSpec spec;
  if (!doc.contains("kind") || !doc.at("kind").is_string()) throw ValidationError("kind", "missing or not a string");
  spec.kind = doc.at("kind").get<std::string>();
  if (doc.contains("params")) spec.params = doc.at("params");
  if (doc.contains("precision")) {
    const auto prec = require_int(doc.at("precision"), "precision");
    if (prec < 0 || prec > 1000) throw ValidationError("precision", "must be in [0, 1000]");
    spec.precision = static_cast<int>(prec);
  }
  for (const auto& [key, _] : doc.items()) {
    if (key != "kind" && key != "params" && key != "precision") {
      throw ValidationError(key, "unknown top-level field (expected kind, params, precision)");
    }
  }
  return spec;
}

json SystemSpec::to_json() const {
  json doc{{"kind", kind}, {"params", params}};
  if (precision) doc["precision"] = *precision;
  return doc;
}

System make_system(SystemSpec spec, TransformationPtr map, Measure measure) {
  if (map->arity() != measure.arity()) {
    throw ValidationError("params", "map acts on " + std::to_string(map->arity()) + " coordinates, measure has " +
                                        std::to_string(measure.arity()));
  }
  bool exact = measure.exact();
  if (exact) {
    for (const auto& c : measure.components()) {
      if (!map->apply_symbolic(c.point) || !map->apply_inverse_symbolic(c.point)) {
        exact = false;
        break;
      }
    }
  }
  return System{std::move(spec), std::move(map), std::move(measure), exact};
}

System build_system(const SystemSpec& spec) { return build(spec, std::nullopt); }

void validate_spec(const SystemSpec& spec) { (void)build_system(spec); }

void validate_point(const System& system, const Point& p) {
  if (p.size() != system.arity()) {
    throw ValidationError("start", "point has " + std::to_string(p.size()) + " coordinates, space has " +
                                       std::to_string(system.arity()));
  }
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] < 0 || p[i] >= 1) {
      throw ValidationError("start", "coordinate " + std::to_string(i) + " = " + format_rational(p[i]) +
                                         " is outside [0, 1)");
    }
  }
}

std::vector<Point> orbit(const System& system, const Point& start, std::size_t n) {
  validate_point(system, start);
  std::vector<Point> out;
  out.reserve(n);
  Point cur = start;
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(cur);
    if (i + 1 < n) cur = system.apply(cur);
  }
  return out;
}

std::optional<ExactComplex> integrate_character_after(const Measure& measure, const Transformation& map,
                                                      const Frequency& k, std::int64_t steps) {
  if (k.size() != measure.arity()) throw ValidationError("frequency", "arity mismatch");
  if (!measure.symbolic()) return std::nullopt;
  ExactComplex total;
  for (const auto& c : measure.components()) {
    auto image = iterate_symbolic(map, c.point, steps);
    if (!image) return std::nullopt;
    auto part = integrate_phase(c, phase_form(k, *image));
    if (!part) return std::nullopt;
    total += *part;
  }
  return total;
}

std::vector<Frequency> character_family(std::size_t arity, std::int64_t bound) {
  std::vector<Frequency> out;
  Frequency k(arity, -bound);
  while (true) {
    out.push_back(k);
    std::size_t i = arity;
    while (i > 0) {
      --i;
      if (k[i] < bound) {
        ++k[i];
        break;
      }
      k[i] = -bound;
      if (i == 0) return out;
    }
    if (arity == 0) return out;
  }
}

std::optional<Frequency> find_preservation_violation(const Measure& measure, const Transformation& map,
                                                     const std::vector<Frequency>& family) {
  for (const auto& k : family) {
    auto before = measure.integrate_exact(k);
    auto after = integrate_character_after(measure, map, k, 1);
    if (!before || !after) throw Unsupported("preservation check needs exact integrals");
    if (*before != *after) return k;
  }
  return std::nullopt;
}

Rational parse_number(const json& doc, std::optional<int> precision, const std::string& field) {
  try {
    if (doc.is_string()) return parse_rational(doc.get<std::string>(), precision);
    if (doc.is_number_integer()) return Rational(doc.get<std::int64_t>());
  } catch (const ValidationError& e) {
    throw ValidationError(field, e.what());
  }
  throw ValidationError(field, "expected an exact number string such as \"1/3\", \"0.25\" or \"sqrt(2)\"");
}

Point parse_point(const json& doc, std::optional<int> precision, const std::string& field) {
  Point p;
  if (doc.is_array()) {
    for (std::size_t i = 0; i < doc.size(); ++i) {
      p.push_back(frac(parse_number(doc[i], precision, field + "[" + std::to_string(i) + "]")));
    }
  } else {
    p.push_back(frac(parse_number(doc, precision, field)));
  }
  return p;
}

Measure parse_measure(const json& doc, std::optional<int> precision, const std::string& field) {
  if (doc.is_string()) {
    const auto name = doc.get<std::string>();
    if (name == "haar") return Measure::haar();
    if (name == "point") return Measure::point();
    throw ValidationError(field, "unknown measure '" + name + "'");
  }
  if (!doc.is_object()) throw ValidationError(field, "expected a measure object");
  const std::string kind = require(doc, "kind", field).get<std::string>();
  if (kind == "haar") {
    const auto dim = doc.contains("dimension") ? require_int(doc.at("dimension"), field + ".dimension") : 1;
    if (dim < 1) throw ValidationError(field + ".dimension", "must be >= 1");
    return Measure::haar(static_cast<std::size_t>(dim));
  }
  if (kind == "point") return Measure::point();
  if (kind == "cyclic") {
    const auto m = require_int(require(doc, "modulus", field), field + ".modulus");
    if (m < 1) throw ValidationError(field + ".modulus", "must be >= 1");
    return Measure::cyclic_haar(m);
  }
  if (kind == "dirac") return Measure::dirac(parse_point(require(doc, "at", field), precision, field + ".at"));
  if (kind == "interval") {
    const Rational lo = parse_number(require(doc, "lo", field), precision, field + ".lo");
    const Rational hi = parse_number(require(doc, "hi", field), precision, field + ".hi");
    try {
      return Measure::interval(lo, hi);
    } catch (const ValidationError& e) {
      throw ValidationError(field, e.what());
    }
  }
  if (kind == "product") {
    const json& factors = require(doc, "factors", field);
    if (!factors.is_array() || factors.empty()) throw ValidationError(field + ".factors", "must be a non-empty list");
    std::vector<Measure> ms;
    for (std::size_t i = 0; i < factors.size(); ++i) {
      ms.push_back(parse_measure(factors[i], precision, field + ".factors[" + std::to_string(i) + "]"));
    }
    return Measure::product(ms);
  }
  if (kind == "mixture") {
    const json& comps = require(doc, "components", field);
    if (!comps.is_array() || comps.empty()) throw ValidationError(field + ".components", "must be a non-empty list");
    std::vector<std::pair<Rational, Measure>> parts;
    for (std::size_t i = 0; i < comps.size(); ++i) {
      const std::string sub = field + ".components[" + std::to_string(i) + "]";
      const Rational w = parse_number(require(comps[i], "weight", sub), precision, sub + ".weight");
      if (w < 0) throw ValidationError(sub + ".weight", "negative weight");
      parts.emplace_back(w, parse_measure(require(comps[i], "measure", sub), precision, sub + ".measure"));
      if (parts.back().second.arity() != parts.front().second.arity()) {
        throw ValidationError(sub + ".measure", "mixture components disagree on arity");
      }
    }
    try {
      return Measure::mixture(parts);
    } catch (const ValidationError& e) {
      throw ValidationError(field + ".components", e.what());
    }
  }
  throw ValidationError(field + ".kind", "unknown measure kind '" + kind + "'");
}

Cocycle parse_cocycle(const json& doc, std::size_t base_arity, std::optional<int> precision,
                      const std::string& field) {
  if (!doc.is_object()) throw ValidationError(field, "expected a cocycle object");
  const std::string kind = require(doc, "kind", field).get<std::string>();
  if (kind == "affine") {
    std::vector<Rational> slopes;
    const json& s = require(doc, "slope", field);
    if (s.is_array()) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        slopes.push_back(parse_number(s[i], precision, field + ".slope[" + std::to_string(i) + "]"));
      }
    } else {
      slopes.push_back(parse_number(s, precision, field + ".slope"));
    }
    if (slopes.size() != base_arity) {
      throw ValidationError(field + ".slope", "expected " + std::to_string(base_arity) + " slopes, got " +
                                                  std::to_string(slopes.size()));
    }
    const Rational offset = doc.contains("offset") ? parse_number(doc.at("offset"), precision, field + ".offset") : 0;
    return Cocycle::affine(std::move(slopes), offset);
  }
  if (kind == "table") {
    const json& values = require(doc, "values", field);
    if (!values.is_array() || values.empty()) throw ValidationError(field + ".values", "must be a non-empty list");
    Cocycle::Table table;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const std::string sub = field + ".values[" + std::to_string(i) + "]";
      Point at = parse_point(require(values[i], "at", sub), precision, sub + ".at");
      if (at.size() != base_arity) throw ValidationError(sub + ".at", "arity mismatch with the base");
      table[at] = parse_number(require(values[i], "value", sub), precision, sub + ".value");
    }
    return Cocycle::table(std::move(table));
  }
  throw ValidationError(field + ".kind", "unknown cocycle kind '" + kind + "'");
}

FiberedSystem::FiberedSystem(Measure base, FiberFn fiber, System flat, std::string description)
    : base_(std::move(base)), fiber_(std::move(fiber)), flat_(std::move(flat)), description_(std::move(description)) {}

FiberedSystem build_fibered(const SystemSpec& spec) {
  const auto precision = spec.precision;
  const json& p = spec.params;
  if (spec.kind != "fibered" && spec.kind != "twist") {
    throw ValidationError("kind", "only twist and fibered specs have a fibered view, got '" + spec.kind + "'");
  }
  Measure base = parse_measure(require(p, "base_measure", "params"), precision, "params.base_measure");
  const json* angle_doc = nullptr;
  if (spec.kind == "twist") {
    angle_doc = &require(p, "cocycle", "params");
  } else {
    const json& fiber = require(p, "fiber", "params");
    const std::string family = require(fiber, "family", "params.fiber").get<std::string>();
    if (family == "rank1") {
      const auto depth = require_int(require(fiber, "depth", "params.fiber"), "params.fiber.depth");
      if (base.arity() != 1) throw ValidationError("params.base_measure", "rank-1 parameter space is [0, 1]");
      if (depth < 1 || depth > rank1::kMaxMapDepth) throw ValidationError("params.fiber.depth", "out of range");
      FiberedSystem fs = rank1::make_Sa_system(base, static_cast<int>(depth));
      return FiberedSystem(fs.base_measure(), [fs](const Point& a) { return fs.fiber(a); },
                           System{spec, fs.flat().map, fs.flat().measure, fs.flat().exact_integrals},
                           fs.description());
    }
    if (family != "rotation") throw ValidationError("params.fiber.family", "unknown fiber family '" + family + "'");
    angle_doc = &require(fiber, "angle", "params.fiber");
  }
  const Cocycle angle = parse_cocycle(*angle_doc, base.arity(), precision,
                                      spec.kind == "twist" ? "params.cocycle" : "params.fiber.angle");
  check_table_support(angle, base, "params.cocycle");
  System base_system = make_system(SystemSpec{"identity", json::object(), precision},
                                   std::make_shared<IdentityMap>(base.arity()), base);
  auto map = std::make_shared<SkewProduct>(base_system.map, angle, FiberGroup::circle());
  const std::vector<Measure> parts{base, Measure::haar()};
  System flat = make_system(spec, std::move(map), Measure::product(parts));
  auto fiber_fn = [angle](const Point& parameter) {
    const Rational a = angle.evaluate(parameter);
    return make_system(SystemSpec{"rotation", json{{"angle", format_rational(a)}}, std::nullopt},
                       std::make_shared<Rotation>(a), Measure::haar());
  };
  return FiberedSystem(std::move(base), std::move(fiber_fn), std::move(flat),
                       "fibers: rotation by " + angle.describe());
}

}  // namespace ergolab
