#pragma once

#include "ergolab/core/measure.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace ergolab {

/// An invertible map of a product of circles. `apply` is exact on rational
/// points. The symbolic variants push an affine parametrization through the
/// map and return nothing when the image is not affine with integer
/// coefficients; this is what makes character integrals exact.
class Transformation {
 public:
  virtual ~Transformation() = default;

  virtual std::size_t arity() const = 0;
  virtual Point apply(const Point& p) const = 0;
  virtual Point apply_inverse(const Point& p) const = 0;
  virtual std::optional<SymbolicPoint> apply_symbolic(const SymbolicPoint&) const { return std::nullopt; }
  virtual std::optional<SymbolicPoint> apply_inverse_symbolic(const SymbolicPoint&) const { return std::nullopt; }
  virtual std::string describe() const = 0;
};

using TransformationPtr = std::shared_ptr<const Transformation>;

class Rotation final : public Transformation {
 public:
  explicit Rotation(Rational angle) : angle_(frac(angle)) {}

  const Rational& angle() const noexcept { return angle_; }
  std::size_t arity() const override { return 1; }
  Point apply(const Point& p) const override;
  Point apply_inverse(const Point& p) const override;
  std::optional<SymbolicPoint> apply_symbolic(const SymbolicPoint& p) const override;
  std::optional<SymbolicPoint> apply_inverse_symbolic(const SymbolicPoint& p) const override;
  std::string describe() const override;

 private:
  Rational angle_;
};

class IdentityMap final : public Transformation {
 public:
  explicit IdentityMap(std::size_t arity) : arity_(arity) {}

  std::size_t arity() const override { return arity_; }
  Point apply(const Point& p) const override { return p; }
  Point apply_inverse(const Point& p) const override { return p; }
  std::optional<SymbolicPoint> apply_symbolic(const SymbolicPoint& p) const override { return p; }
  std::optional<SymbolicPoint> apply_inverse_symbolic(const SymbolicPoint& p) const override { return p; }
  std::string describe() const override { return "Id(" + std::to_string(arity_) + ")"; }

 private:
  std::size_t arity_;
};

/// A map from base points to phases: affine x -> <q, x> + c, or a lookup
/// table over finitely many base points.
class Cocycle {
 public:
  struct Affine {
    std::vector<Rational> slopes;
    Rational offset{0};
  };
  using Table = std::map<Point, Rational>;

  static Cocycle affine(std::vector<Rational> slopes, Rational offset);
  static Cocycle table(Table values);

  std::size_t base_arity() const;
  bool is_affine() const noexcept { return std::holds_alternative<Affine>(rep_); }
  const Affine& as_affine() const { return std::get<Affine>(rep_); }
  const Table& as_table() const { return std::get<Table>(rep_); }

  /// Value in [0, 1).
  Rational evaluate(const Point& base) const;
  /// Empty when the value is not an integer-affine form of the variables.
  std::optional<AffineForm> evaluate_symbolic(const SymbolicPoint& base) const;
  std::string describe() const;

 private:
  explicit Cocycle(std::variant<Affine, Table> rep) : rep_(std::move(rep)) {}
  std::variant<Affine, Table> rep_;
};

struct FiberGroup {
  enum class Kind { Circle, Cyclic };
  Kind kind = Kind::Circle;
  std::int64_t modulus = 0;

  static FiberGroup circle() { return {}; }
  static FiberGroup cyclic(std::int64_t m) { return {Kind::Cyclic, m}; }
};

/// T_phi(x, g) = (T x, g + phi(x)) with the group written additively mod 1.
class SkewProduct final : public Transformation {
 public:
  SkewProduct(TransformationPtr base, Cocycle cocycle, FiberGroup group);

  const Transformation& base() const noexcept { return *base_; }
  const Cocycle& cocycle() const noexcept { return cocycle_; }
  const FiberGroup& group() const noexcept { return group_; }

  std::size_t arity() const override { return base_->arity() + 1; }
  Point apply(const Point& p) const override;
  Point apply_inverse(const Point& p) const override;
  std::optional<SymbolicPoint> apply_symbolic(const SymbolicPoint& p) const override;
  std::optional<SymbolicPoint> apply_inverse_symbolic(const SymbolicPoint& p) const override;
  std::string describe() const override;

 private:
  Rational group_value(const Rational& phase) const;

  TransformationPtr base_;
  Cocycle cocycle_;
  FiberGroup group_;
};

class ProductMap final : public Transformation {
 public:
  explicit ProductMap(std::vector<TransformationPtr> factors);

  const std::vector<TransformationPtr>& factors() const noexcept { return factors_; }
  std::size_t arity() const override { return arity_; }
  Point apply(const Point& p) const override;
  Point apply_inverse(const Point& p) const override;
  std::optional<SymbolicPoint> apply_symbolic(const SymbolicPoint& p) const override;
  std::optional<SymbolicPoint> apply_inverse_symbolic(const SymbolicPoint& p) const override;
  std::string describe() const override;

 private:
  template <class Fn>
  auto split_apply(const auto& p, Fn&& fn) const;

  std::vector<TransformationPtr> factors_;
  std::size_t arity_ = 0;
};

/// T^n for any integer n (n = 0 is the identity).
class PowerMap final : public Transformation {
 public:
  PowerMap(TransformationPtr base, std::int64_t power) : base_(std::move(base)), power_(power) {}

  std::size_t arity() const override { return base_->arity(); }
  Point apply(const Point& p) const override;
  Point apply_inverse(const Point& p) const override;
  std::optional<SymbolicPoint> apply_symbolic(const SymbolicPoint& p) const override;
  std::optional<SymbolicPoint> apply_inverse_symbolic(const SymbolicPoint& p) const override;
  std::string describe() const override;

 private:
  TransformationPtr base_;
  std::int64_t power_;
};

/// Applies `map` (or its inverse when steps < 0) |steps| times.
Point iterate(const Transformation& map, Point p, std::int64_t steps);
std::optional<SymbolicPoint> iterate_symbolic(const Transformation& map, SymbolicPoint p, std::int64_t steps);

}  // namespace ergolab
