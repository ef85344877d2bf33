#include "ergolab/core/measure.hpp"

#include "ergolab/core/errors.hpp"

#include <cmath>
#include <numbers>

namespace ergolab {
namespace {

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error("affine form coefficient overflow");
  return out;
}

std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
  std::int64_t out = 0;
  if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("affine form coefficient overflow");
  return out;
}

std::int64_t positive_mod(std::int64_t a, std::int64_t m) {
  const std::int64_t r = a % m;
  return r < 0 ? r + m : r;
}

Rational sample_variable(const Variable& v, Rng& rng) {
  switch (v.kind) {
    case VariableKind::Circle:
      return uniform_rational(rng);
    case VariableKind::Cyclic:
      return Rational(static_cast<long long>(uniform_index(rng, static_cast<std::uint64_t>(v.modulus))),
                      static_cast<long long>(v.modulus));
    case VariableKind::Interval:
      return v.lo + (v.hi - v.lo) * uniform_rational(rng);
  }
  return 0;
}

std::string join_descriptions(std::span<const Measure> factors, const char* sep) {
  std::string out;
  for (const auto& m : factors) {
    if (!out.empty()) out += sep;
    out += m.description();
  }
  return out;
}

}  // namespace

AffineForm AffineForm::constant(const Rational& value, std::size_t variables) {
  return AffineForm{std::vector<std::int64_t>(variables, 0), frac(value)};
}

AffineForm AffineForm::variable(std::size_t index, std::size_t variables) {
  AffineForm f{std::vector<std::int64_t>(variables, 0), Rational(0)};
  f.coeffs.at(index) = 1;
  return f;
}

bool AffineForm::is_constant() const {
  for (auto c : coeffs) {
    if (c != 0) return false;
  }
  return true;
}

AffineForm& AffineForm::operator+=(const AffineForm& other) {
  for (std::size_t j = 0; j < coeffs.size(); ++j) coeffs[j] = checked_add(coeffs[j], other.coeffs[j]);
  offset = frac(offset + other.offset);
  return *this;
}

AffineForm& AffineForm::operator-=(const AffineForm& other) {
  for (std::size_t j = 0; j < coeffs.size(); ++j) coeffs[j] = checked_add(coeffs[j], -other.coeffs[j]);
  offset = frac(offset - other.offset);
  return *this;
}

AffineForm& AffineForm::operator*=(std::int64_t scale) {
  for (auto& c : coeffs) c = checked_mul(c, scale);
  offset = frac(offset * scale);
  return *this;
}

AffineForm& AffineForm::shift(const Rational& amount) {
  offset = frac(offset + amount);
  return *this;
}

AffineForm phase_form(const Frequency& k, const SymbolicPoint& point) {
  if (k.size() != point.size()) {
    throw ValidationError("frequency", "arity mismatch: frequency has " + std::to_string(k.size()) +
                                           " entries, space has " + std::to_string(point.size()));
  }
  const std::size_t nvars = point.empty() ? 0 : point.front().coeffs.size();
  AffineForm out = AffineForm::constant(0, nvars);
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] == 0) continue;
    AffineForm term = point[i];
    term *= k[i];
    out += term;
  }
  return out;
}

std::optional<ExactComplex> integrate_phase(const MeasureComponent& component, const AffineForm& form) {
  bool vanishes = false;
  for (std::size_t j = 0; j < component.variables.size(); ++j) {
    const std::int64_t c = j < form.coeffs.size() ? form.coeffs[j] : 0;
    if (c == 0) continue;
    const Variable& v = component.variables[j];
    switch (v.kind) {
      case VariableKind::Circle:
        vanishes = true;
        break;
      case VariableKind::Cyclic:
        if (positive_mod(c, v.modulus) != 0) vanishes = true;
        break;
      case VariableKind::Interval:
        return std::nullopt;
    }
  }
  if (vanishes) return ExactComplex{};
  return ExactComplex::unit(form.offset) * component.weight;
}

Measure::Measure(std::vector<MeasureComponent> components, std::string description)
    : components_(std::move(components)), description_(std::move(description)) {
  if (components_.empty()) throw ValidationError("measure", "mixture has no components");
  arity_ = components_.front().point.size();
  Rational total = 0;
  double running = 0.0;
  for (const auto& c : components_) {
    if (c.point.size() != arity_) throw ValidationError("measure", "components disagree on arity");
    if (c.weight < 0) throw ValidationError("measure.weight", "negative mixture weight");
    for (const auto& f : c.point) {
      if (f.coeffs.size() != c.variables.size()) throw ValidationError("measure", "form/variable count mismatch");
    }
    total += c.weight;
    running += to_double(c.weight);
    cumulative_.push_back(running);
  }
  if (total != 1) {
    throw ValidationError("measure.weight", "mixture weights sum to " + format_rational(total) + ", expected 1");
  }
}

Measure::Measure(std::size_t arity, Sampler sampler, std::string description)
    : arity_(arity), sampler_(std::move(sampler)), description_(std::move(description)) {}

Measure Measure::haar(std::size_t dimension) {
  MeasureComponent c;
  c.variables.assign(dimension, Variable::circle());
  for (std::size_t i = 0; i < dimension; ++i) c.point.push_back(AffineForm::variable(i, dimension));
  return Measure({std::move(c)}, dimension == 1 ? "Haar(T)" : "Haar(T^" + std::to_string(dimension) + ")");
}

Measure Measure::cyclic_haar(std::int64_t modulus) {
  if (modulus < 1) throw ValidationError("measure.modulus", "cyclic modulus must be >= 1");
  MeasureComponent c;
  c.variables.push_back(Variable::cyclic(modulus));
  c.point.push_back(AffineForm::variable(0, 1));
  return Measure({std::move(c)}, "Haar(Z_" + std::to_string(modulus) + ")");
}

Measure Measure::dirac(const Point& at) {
  MeasureComponent c;
  std::string where;
  for (const auto& x : at) {
    c.point.push_back(AffineForm::constant(x, 0));
    if (!where.empty()) where += ",";
    where += format_rational(frac(x));
  }
  return Measure({std::move(c)}, "delta(" + where + ")");
}

Measure Measure::interval(const Rational& lo, const Rational& hi) {
  if (!(lo >= 0 && lo < hi && hi <= 1)) throw ValidationError("measure", "interval must satisfy 0 <= lo < hi <= 1");
  MeasureComponent c;
  c.variables.push_back(Variable::interval(lo, hi));
  c.point.push_back(AffineForm::variable(0, 1));
  return Measure({std::move(c)}, "Uniform[" + format_rational(lo) + "," + format_rational(hi) + ")");
}

Measure Measure::point() {
  MeasureComponent c;
  return Measure({std::move(c)}, "point");
}

Measure Measure::product(std::span<const Measure> factors) {
  if (factors.empty()) throw ValidationError("factors", "product of zero measures");
  for (const auto& f : factors) {
    if (!f.symbolic()) {
      std::vector<Measure> copies(factors.begin(), factors.end());
      std::size_t arity = 0;
      for (const auto& m : copies) arity += m.arity();
      return Measure(
          arity,
          [copies](Rng& rng) {
            Point out;
            for (const auto& m : copies) {
              Point p = m.sample(rng);
              out.insert(out.end(), p.begin(), p.end());
            }
            return out;
          },
          join_descriptions(factors, " x "));
    }
  }
  std::vector<MeasureComponent> acc = factors.front().components();
  for (std::size_t f = 1; f < factors.size(); ++f) {
    std::vector<MeasureComponent> next;
    for (const auto& left : acc) {
      for (const auto& right : factors[f].components()) {
        MeasureComponent c;
        c.weight = left.weight * right.weight;
        const std::size_t nl = left.variables.size();
        const std::size_t nr = right.variables.size();
        c.variables = left.variables;
        c.variables.insert(c.variables.end(), right.variables.begin(), right.variables.end());
        for (const auto& form : left.point) {
          AffineForm g = form;
          g.coeffs.resize(nl + nr, 0);
          c.point.push_back(std::move(g));
        }
        for (const auto& form : right.point) {
          AffineForm g{std::vector<std::int64_t>(nl, 0), form.offset};
          g.coeffs.insert(g.coeffs.end(), form.coeffs.begin(), form.coeffs.end());
          c.point.push_back(std::move(g));
        }
        next.push_back(std::move(c));
      }
    }
    acc = std::move(next);
  }
  return Measure(std::move(acc), join_descriptions(factors, " x "));
}

Measure Measure::mixture(const std::vector<std::pair<Rational, Measure>>& parts) {
  if (parts.empty()) throw ValidationError("components", "mixture has no components");
  std::vector<MeasureComponent> all;
  std::string description;
  for (const auto& [weight, m] : parts) {
    if (!m.symbolic()) throw Unsupported("mixtures of opaque samplers are not supported");
    if (m.arity() != parts.front().second.arity()) throw ValidationError("components", "mixture arity mismatch");
    for (auto c : m.components()) {
      c.weight *= weight;
      all.push_back(std::move(c));
    }
    if (!description.empty()) description += " + ";
    description += format_rational(weight) + "*" + m.description();
  }
  return Measure(std::move(all), description);
}

bool Measure::exact() const {
  if (!symbolic()) return false;
  for (const auto& c : components_) {
    for (const auto& v : c.variables) {
      if (v.kind == VariableKind::Interval) return false;
    }
  }
  return true;
}

std::optional<ExactComplex> Measure::integrate_exact(const Frequency& k) const {
  if (k.size() != arity_) {
    throw ValidationError("frequency", "arity mismatch: frequency has " + std::to_string(k.size()) +
                                           " entries, measure has arity " + std::to_string(arity_));
  }
  if (!symbolic()) return std::nullopt;
  ExactComplex total;
  for (const auto& c : components_) {
    auto part = integrate_phase(c, phase_form(k, c.point));
    if (!part) return std::nullopt;
    total += *part;
  }
  return total;
}

Point evaluate(const SymbolicPoint& point, std::span<const Rational> variables) {
  Point out;
  out.reserve(point.size());
  for (const auto& form : point) {
    Rational x = form.offset;
    for (std::size_t j = 0; j < form.coeffs.size(); ++j) {
      if (form.coeffs[j] != 0) x += variables[j] * form.coeffs[j];
    }
    out.push_back(frac(x));
  }
  return out;
}

std::string format_point(const Point& p) {
  std::string out = "(";
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (i) out += ",";
    out += format_rational(p[i]);
  }
  return out + ")";
}

Point Measure::sample(Rng& rng) const {
  if (sampler_) return sampler_(rng);
  std::size_t index = 0;
  if (components_.size() > 1) {
    const double u = uniform_double(rng) * cumulative_.back();
    while (index + 1 < components_.size() && u >= cumulative_[index]) ++index;
  }
  const auto& c = components_[index];
  std::vector<Rational> values;
  values.reserve(c.variables.size());
  for (const auto& v : c.variables) values.push_back(sample_variable(v, rng));
  return evaluate(c.point, values);
}

std::vector<Point> Measure::sample(std::uint64_t seed, std::size_t count) const {
  Rng rng(seed);
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(sample(rng));
  return out;
}

std::complex<double> character_value(const Frequency& k, const Point& x) {
  // Accumulate the phase exactly, then reduce once.
  Rational phase = 0;
  for (std::size_t i = 0; i < k.size(); ++i) {
    if (k[i] != 0) phase += x[i] * k[i];
  }
  const double angle = 2.0 * std::numbers::pi * to_double(frac(phase));
  return {std::cos(angle), std::sin(angle)};
}

CharacterIntegral integrate_character(const Measure& measure, const Frequency& k, const MonteCarloOptions& mc) {
  if (auto exact = measure.integrate_exact(k)) {
    return CharacterIntegral{exact->value(), exact, 0, 0.0};
  }
  if (mc.samples < 2) throw ValidationError("samples", "Monte Carlo needs at least two samples");
  Rng rng(mc.seed);
  std::complex<double> sum{0, 0};
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < mc.samples; ++i) {
    const auto v = character_value(k, measure.sample(rng));
    sum += v;
    sum_sq += std::norm(v);
  }
  const double n = static_cast<double>(mc.samples);
  const std::complex<double> mean = sum / n;
  const double variance = std::max(0.0, (sum_sq - n * std::norm(mean)) / (n - 1));
  return CharacterIntegral{mean, std::nullopt, mc.samples, std::sqrt(variance / n)};
}

}  // namespace ergolab
