#pragma once

#include "ergolab/core/measure.hpp"
#include "ergolab/core/transformation.hpp"

#include <json.hpp>

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace ergolab {

/// Declarative description of a measure-preserving system.
///
/// JSON form: {"kind": ..., "params": {...}, "precision": <int, optional>}.
/// Kinds and their params:
///
///   rotation         angle, measure (optional; Haar on T by default)
///   identity         measure
///   twist            base_measure, cocycle            (x, y) -> (x, y + beta(x))
///   group-extension  base (SystemSpec), cocycle, group {"kind": "circle"|"cyclic", "modulus"}
///   product          factors (non-empty list of SystemSpec)
///   fibered          base_measure, fiber {"family": "rotation", "angle": cocycle}
///                                  | {"family": "rank1", "depth": d}
///   rank1-family     a (exact number) or digits ("0110..."), depth
///
/// Numbers are strings: "p/q", integers, decimals, or "sqrt(n)[/m]"; the
/// latter require `precision` (decimal digits).
struct SystemSpec {
  std::string kind;
  nlohmann::json params = nlohmann::json::object();
  std::optional<int> precision;

  static SystemSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct System {
  SystemSpec spec;
  TransformationPtr map;
  Measure measure;
  /// Character integrals of the measure and of its images under the map
  /// are all exact.
  bool exact_integrals = false;

  std::size_t arity() const { return map->arity(); }
  Point apply(const Point& p) const { return map->apply(p); }
  Point apply_inverse(const Point& p) const { return map->apply_inverse(p); }
};

/// Wraps a map and its invariant measure, deciding exactness.
System make_system(SystemSpec spec, TransformationPtr map, Measure measure);

/// Throws ValidationError naming the offending field.
System build_system(const SystemSpec& spec);

/// Validates a spec without keeping the result.
void validate_spec(const SystemSpec& spec);

/// [start, T start, ..., T^{n-1} start].
std::vector<Point> orbit(const System& system, const Point& start, std::size_t n);

/// Throws ValidationError when p is not a point of the system's space.
void validate_point(const System& system, const Point& p);

/// Integral of chi_k o T^steps against the measure; empty when not exact.
std::optional<ExactComplex> integrate_character_after(const Measure& measure, const Transformation& map,
                                                      const Frequency& k, std::int64_t steps);

/// All frequency vectors of the given arity with sup-norm <= bound,
/// in lexicographic order.
std::vector<Frequency> character_family(std::size_t arity, std::int64_t bound);

/// Preservation check on a character family; returns the first violating
/// character, or nothing when all pass. Requires exact integrals.
std::optional<Frequency> find_preservation_violation(const Measure& measure, const Transformation& map,
                                                     const std::vector<Frequency>& family);

Measure parse_measure(const nlohmann::json& doc, std::optional<int> precision, const std::string& field);
Cocycle parse_cocycle(const nlohmann::json& doc, std::size_t base_arity, std::optional<int> precision,
                      const std::string& field);
Rational parse_number(const nlohmann::json& doc, std::optional<int> precision, const std::string& field);

Point parse_point(const nlohmann::json& doc, std::optional<int> precision, const std::string& field);

/// A system presented through its fibers: a base measure P over parameters
/// and a system for each parameter, together with the flat system on
/// (parameter, fiber point) whose invariant measure is the integral of the
/// fiber measures against P.
class FiberedSystem {
 public:
  using FiberFn = std::function<System(const Point&)>;

  FiberedSystem(Measure base, FiberFn fiber, System flat, std::string description);

  const Measure& base_measure() const noexcept { return base_; }
  System fiber(const Point& parameter) const { return fiber_(parameter); }
  const System& flat() const noexcept { return flat_; }
  const std::string& description() const noexcept { return description_; }
  std::size_t base_arity() const { return base_.arity(); }

 private:
  Measure base_;
  FiberFn fiber_;
  System flat_;
  std::string description_;
};

/// Builds the fibered view of a "fibered" or "twist" spec.
FiberedSystem build_fibered(const SystemSpec& spec);

}  // namespace ergolab
