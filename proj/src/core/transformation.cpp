#include "ergolab/core/transformation.hpp"

#include "ergolab/core/errors.hpp"

namespace ergolab {
namespace {

void require_arity(const Transformation& t, std::size_t got) {
  if (got != t.arity()) {
    throw ValidationError("point", "arity mismatch: " + t.describe() + " acts on " + std::to_string(t.arity()) +
                                       " coordinates, got " + std::to_string(got));
  }
}

}  // namespace

Point Rotation::apply(const Point& p) const {
  require_arity(*this, p.size());
  return {frac(p[0] + angle_)};
}

Point Rotation::apply_inverse(const Point& p) const {
  require_arity(*this, p.size());
  return {frac(p[0] - angle_)};
}

std::optional<SymbolicPoint> Rotation::apply_symbolic(const SymbolicPoint& p) const {
  require_arity(*this, p.size());
  SymbolicPoint out = p;
  out[0].shift(angle_);
  return out;
}

std::optional<SymbolicPoint> Rotation::apply_inverse_symbolic(const SymbolicPoint& p) const {
  require_arity(*this, p.size());
  SymbolicPoint out = p;
  out[0].shift(-angle_);
  return out;
}

std::string Rotation::describe() const { return "R_" + format_rational(angle_); }

Cocycle Cocycle::affine(std::vector<Rational> slopes, Rational offset) {
  return Cocycle(Affine{std::move(slopes), std::move(offset)});
}

Cocycle Cocycle::table(Table values) {
  if (values.empty()) throw ValidationError("cocycle.values", "empty cocycle table");
  const std::size_t n = values.begin()->first.size();
  Table normalized;
  for (auto& [at, v] : values) {
    if (at.size() != n) throw ValidationError("cocycle.values", "table keys disagree on arity");
    Point key;
    for (const auto& x : at) key.push_back(frac(x));
    normalized.emplace(std::move(key), frac(v));
  }
  return Cocycle(std::move(normalized));
}

std::size_t Cocycle::base_arity() const {
  if (is_affine()) return as_affine().slopes.size();
  return as_table().begin()->first.size();
}

Rational Cocycle::evaluate(const Point& base) const {
  if (base.size() != base_arity()) throw ValidationError("cocycle", "base point arity mismatch");
  if (is_affine()) {
    const auto& a = as_affine();
    Rational v = a.offset;
    for (std::size_t i = 0; i < base.size(); ++i) v += a.slopes[i] * base[i];
    return frac(v);
  }
  const auto& t = as_table();
  auto it = t.find(base);
  if (it == t.end()) throw ValidationError("cocycle.values", "cocycle table has no entry at " + format_point(base));
  return it->second;
}

std::optional<AffineForm> Cocycle::evaluate_symbolic(const SymbolicPoint& base) const {
  if (base.size() != base_arity()) throw ValidationError("cocycle", "base point arity mismatch");
  const std::size_t nvars = base.empty() ? 0 : base.front().coeffs.size();
  if (!is_affine()) {
    Point at;
    for (const auto& f : base) {
      if (!f.is_constant()) return std::nullopt;
      at.push_back(f.offset);
    }
    return AffineForm::constant(evaluate(at), nvars);
  }
  const auto& a = as_affine();
  AffineForm out = AffineForm::constant(a.offset, nvars);
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (a.slopes[i] == 0) continue;
    if (base[i].is_constant()) {
      out.shift(a.slopes[i] * base[i].offset);
    } else if (is_integer(a.slopes[i])) {
      AffineForm term = base[i];
      term *= to_int64(boost::multiprecision::numerator(a.slopes[i]));
      out += term;
    } else {
      // q * frac(u) depends on the representative of u when q is not an integer.
      return std::nullopt;
    }
  }
  return out;
}

std::string Cocycle::describe() const {
  if (is_affine()) {
    const auto& a = as_affine();
    std::string out;
    for (std::size_t i = 0; i < a.slopes.size(); ++i) {
      out += format_rational(a.slopes[i]) + "*x" + std::to_string(i) + " + ";
    }
    return out + format_rational(a.offset);
  }
  return "table[" + std::to_string(as_table().size()) + "]";
}

SkewProduct::SkewProduct(TransformationPtr base, Cocycle cocycle, FiberGroup group)
    : base_(std::move(base)), cocycle_(std::move(cocycle)), group_(group) {
  if (cocycle_.base_arity() != base_->arity()) {
    throw ValidationError("params.cocycle", "cocycle acts on " + std::to_string(cocycle_.base_arity()) +
                                                " coordinates but the base has " + std::to_string(base_->arity()));
  }
  if (group_.kind == FiberGroup::Kind::Cyclic && group_.modulus < 1) {
    throw ValidationError("params.group.modulus", "cyclic group modulus must be >= 1");
  }
}

Rational SkewProduct::group_value(const Rational& phase) const {
  if (group_.kind == FiberGroup::Kind::Cyclic && !is_integer(phase * group_.modulus)) {
    throw ValidationError("params.cocycle", "cocycle value " + format_rational(phase) + " is not in Z_" +
                                                std::to_string(group_.modulus));
  }
  return phase;
}

Point SkewProduct::apply(const Point& p) const {
  require_arity(*this, p.size());
  Point base(p.begin(), p.end() - 1);
  const Rational shift = group_value(cocycle_.evaluate(base));
  Point out = base_->apply(base);
  out.push_back(frac(p.back() + shift));
  return out;
}

Point SkewProduct::apply_inverse(const Point& p) const {
  require_arity(*this, p.size());
  Point out = base_->apply_inverse(Point(p.begin(), p.end() - 1));
  const Rational shift = group_value(cocycle_.evaluate(out));
  out.push_back(frac(p.back() - shift));
  return out;
}

std::optional<SymbolicPoint> SkewProduct::apply_symbolic(const SymbolicPoint& p) const {
  require_arity(*this, p.size());
  SymbolicPoint base(p.begin(), p.end() - 1);
  auto shift = cocycle_.evaluate_symbolic(base);
  auto moved = base_->apply_symbolic(base);
  if (!shift || !moved) return std::nullopt;
  if (group_.kind == FiberGroup::Kind::Cyclic) {
    if (!shift->is_constant()) return std::nullopt;
    group_value(shift->offset);
  }
  AffineForm fiber = p.back();
  fiber += *shift;
  moved->push_back(std::move(fiber));
  return moved;
}

std::optional<SymbolicPoint> SkewProduct::apply_inverse_symbolic(const SymbolicPoint& p) const {
  require_arity(*this, p.size());
  auto base = base_->apply_inverse_symbolic(SymbolicPoint(p.begin(), p.end() - 1));
  if (!base) return std::nullopt;
  auto shift = cocycle_.evaluate_symbolic(*base);
  if (!shift) return std::nullopt;
  if (group_.kind == FiberGroup::Kind::Cyclic) {
    if (!shift->is_constant()) return std::nullopt;
    group_value(shift->offset);
  }
  AffineForm fiber = p.back();
  fiber -= *shift;
  base->push_back(std::move(fiber));
  return base;
}

std::string SkewProduct::describe() const {
  const std::string g =
      group_.kind == FiberGroup::Kind::Circle ? "T" : "Z_" + std::to_string(group_.modulus);
  return "(" + base_->describe() + ")_{" + cocycle_.describe() + "} over " + g;
}

ProductMap::ProductMap(std::vector<TransformationPtr> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) throw ValidationError("params.factors", "product needs at least one factor");
  for (const auto& f : factors_) arity_ += f->arity();
}

template <class Fn>
auto ProductMap::split_apply(const auto& p, Fn&& fn) const {
  require_arity(*this, p.size());
  using Vec = std::decay_t<decltype(p)>;
  std::optional<Vec> out(std::in_place);
  std::size_t offset = 0;
  for (const auto& f : factors_) {
    Vec part(p.begin() + static_cast<std::ptrdiff_t>(offset),
             p.begin() + static_cast<std::ptrdiff_t>(offset + f->arity()));
    auto image = fn(*f, part);
    if (!image) return std::optional<Vec>{};
    out->insert(out->end(), image->begin(), image->end());
    offset += f->arity();
  }
  return out;
}

Point ProductMap::apply(const Point& p) const {
  return *split_apply(p, [](const Transformation& f, const Point& x) { return std::optional<Point>(f.apply(x)); });
}

Point ProductMap::apply_inverse(const Point& p) const {
  return *split_apply(
      p, [](const Transformation& f, const Point& x) { return std::optional<Point>(f.apply_inverse(x)); });
}

std::optional<SymbolicPoint> ProductMap::apply_symbolic(const SymbolicPoint& p) const {
  return split_apply(p, [](const Transformation& f, const SymbolicPoint& x) { return f.apply_symbolic(x); });
}

std::optional<SymbolicPoint> ProductMap::apply_inverse_symbolic(const SymbolicPoint& p) const {
  return split_apply(p, [](const Transformation& f, const SymbolicPoint& x) { return f.apply_inverse_symbolic(x); });
}

std::string ProductMap::describe() const {
  std::string out;
  for (const auto& f : factors_) {
    if (!out.empty()) out += " x ";
    out += f->describe();
  }
  return out;
}

Point PowerMap::apply(const Point& p) const { return iterate(*base_, p, power_); }
Point PowerMap::apply_inverse(const Point& p) const { return iterate(*base_, p, -power_); }

std::optional<SymbolicPoint> PowerMap::apply_symbolic(const SymbolicPoint& p) const {
  return iterate_symbolic(*base_, p, power_);
}

std::optional<SymbolicPoint> PowerMap::apply_inverse_symbolic(const SymbolicPoint& p) const {
  return iterate_symbolic(*base_, p, -power_);
}

std::string PowerMap::describe() const { return "(" + base_->describe() + ")^" + std::to_string(power_); }

Point iterate(const Transformation& map, Point p, std::int64_t steps) {
  if (steps >= 0) {
    for (std::int64_t i = 0; i < steps; ++i) p = map.apply(p);
  } else {
    for (std::int64_t i = 0; i < -steps; ++i) p = map.apply_inverse(p);
  }
  return p;
}

std::optional<SymbolicPoint> iterate_symbolic(const Transformation& map, SymbolicPoint p, std::int64_t steps) {
  std::optional<SymbolicPoint> cur(std::move(p));
  const std::int64_t count = steps >= 0 ? steps : -steps;
  for (std::int64_t i = 0; i < count && cur; ++i) {
    cur = steps >= 0 ? map.apply_symbolic(*cur) : map.apply_inverse_symbolic(*cur);
  }
  return cur;
}

}  // namespace ergolab
