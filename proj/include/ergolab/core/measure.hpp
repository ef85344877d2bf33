#pragma once

#include "ergolab/core/exact_complex.hpp"
#include "ergolab/core/rational.hpp"
#include "ergolab/core/rng.hpp"

#include <complex>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ergolab {

/// A point of a torus-like space; every coordinate lies in [0, 1).
using Point = std::vector<Rational>;

/// Integer frequency vector indexing the character exp(2 pi i <k, x>).
using Frequency = std::vector<std::int64_t>;

enum class VariableKind {
  Circle,    // Haar measure on R/Z
  Cyclic,    // Haar measure on (1/m)Z / Z
  Interval,  // uniform on [lo, hi); continuous but not Haar, sampled only
};

struct Variable {
  VariableKind kind = VariableKind::Circle;
  std::int64_t modulus = 0;
  Rational lo{0};
  Rational hi{1};

  static Variable circle() { return {}; }
  static Variable cyclic(std::int64_t m) { return {VariableKind::Cyclic, m, 0, 1}; }
  static Variable interval(Rational lo, Rational hi) { return {VariableKind::Interval, 0, std::move(lo), std::move(hi)}; }

  friend bool operator==(const Variable&, const Variable&) = default;
};

/// x = sum_j coeffs[j] * v_j + offset  (mod 1), v_j the component's variables.
/// Coefficients are integers so the form is well defined on the torus.
struct AffineForm {
  std::vector<std::int64_t> coeffs;
  Rational offset{0};

  static AffineForm constant(const Rational& value, std::size_t variables);
  static AffineForm variable(std::size_t index, std::size_t variables);

  bool is_constant() const;
  AffineForm& operator+=(const AffineForm& other);
  AffineForm& operator-=(const AffineForm& other);
  AffineForm& operator*=(std::int64_t scale);
  AffineForm& shift(const Rational& amount);

  friend bool operator==(const AffineForm&, const AffineForm&) = default;
};

using SymbolicPoint = std::vector<AffineForm>;

/// <k, point> as a single affine form.
AffineForm phase_form(const Frequency& k, const SymbolicPoint& point);

/// One term of a finite mixture: the law of `point` when the variables are
/// drawn independently.
struct MeasureComponent {
  Rational weight{1};
  std::vector<Variable> variables;
  SymbolicPoint point;
};

/// Integral of exp(2 pi i form) over the component's variables, times the
/// weight. Empty when an Interval variable enters with nonzero coefficient.
std::optional<ExactComplex> integrate_phase(const MeasureComponent& component, const AffineForm& form);

/// A probability measure on a product of circles, either as a finite
/// mixture of symbolic components or as an opaque sampler.
class Measure {
 public:
  using Sampler = std::function<Point(Rng&)>;

  Measure() = default;
  Measure(std::vector<MeasureComponent> components, std::string description);
  Measure(std::size_t arity, Sampler sampler, std::string description);

  static Measure haar(std::size_t dimension = 1);
  static Measure cyclic_haar(std::int64_t modulus);
  static Measure dirac(const Point& at);
  static Measure interval(const Rational& lo, const Rational& hi);
  /// The one-point space.
  static Measure point();
  static Measure product(std::span<const Measure> factors);
  static Measure mixture(const std::vector<std::pair<Rational, Measure>>& parts);

  std::size_t arity() const noexcept { return arity_; }
  bool symbolic() const noexcept { return !sampler_; }
  /// Symbolic with no Interval variables: every character integral is exact.
  bool exact() const;
  const std::vector<MeasureComponent>& components() const noexcept { return components_; }
  const std::string& description() const noexcept { return description_; }

  std::optional<ExactComplex> integrate_exact(const Frequency& k) const;

  Point sample(Rng& rng) const;
  std::vector<Point> sample(std::uint64_t seed, std::size_t count) const;

 private:
  std::size_t arity_ = 0;
  std::vector<MeasureComponent> components_;
  std::vector<double> cumulative_;
  Sampler sampler_;
  std::string description_;
};

Point evaluate(const SymbolicPoint& point, std::span<const Rational> variables);

/// "(x0,x1,...)" with exact coordinates.
std::string format_point(const Point& p);

/// exp(2 pi i <k, x>) in double precision.
std::complex<double> character_value(const Frequency& k, const Point& x);

struct MonteCarloOptions {
  std::uint64_t seed = 0;
  std::size_t samples = 10000;
};

/// Exact value when available, otherwise a Monte Carlo estimate.
struct CharacterIntegral {
  std::complex<double> value;
  std::optional<ExactComplex> exact;
  std::size_t samples = 0;
  double std_error = 0.0;
};

CharacterIntegral integrate_character(const Measure& measure, const Frequency& k, const MonteCarloOptions& mc = {});

}  // namespace ergolab
