#pragma once

#include "ergolab/core/rational.hpp"

#include <complex>
#include <map>
#include <optional>
#include <string>

namespace ergolab {

/// An element of the cyclotomic closure of Q, held as a finite formal sum
///
///     sum_j c_j * exp(2 pi i theta_j),   c_j in Q, theta_j in [0, 1) ∩ Q.
///
/// Every character integral of a finite mixture of Haar and Dirac measures
/// under an affine torus map is of this form, so these values are exact.
///
/// The representation is not unique (1 + exp(i pi) = 0). Equality and
/// zero tests reduce modulo the cyclotomic polynomial Phi_n after grouping
/// terms into classes whose relative phases have denominators at most
/// kMaxReductionOrder. Within that bound the test is exact; beyond it a
/// vanishing combination that spans several classes is reported nonzero.
class ExactComplex {
 public:
  static constexpr std::int64_t kMaxReductionOrder = 1024;

  ExactComplex() = default;
  explicit ExactComplex(const Rational& real);

  /// exp(2 pi i phase), phase taken mod 1.
  static ExactComplex unit(const Rational& phase);

  const std::map<Rational, Rational>& terms() const noexcept { return terms_; }
  std::size_t term_count() const noexcept { return terms_.size(); }

  ExactComplex& operator+=(const ExactComplex& other);
  ExactComplex& operator-=(const ExactComplex& other);
  ExactComplex& operator*=(const ExactComplex& other);
  ExactComplex& operator*=(const Rational& scale);

  friend ExactComplex operator+(ExactComplex a, const ExactComplex& b) { return a += b; }
  friend ExactComplex operator-(ExactComplex a, const ExactComplex& b) { return a -= b; }
  friend ExactComplex operator*(ExactComplex a, const ExactComplex& b) { return a *= b; }
  friend ExactComplex operator*(ExactComplex a, const Rational& s) { return a *= s; }
  friend ExactComplex operator*(const Rational& s, ExactComplex a) { return a *= s; }

  ExactComplex conj() const;
  /// |z|^2 as an exact value (z times its conjugate).
  ExactComplex norm() const;

  std::complex<double> value() const;

  bool is_zero() const;
  friend bool operator==(const ExactComplex& a, const ExactComplex& b) { return (a - b).is_zero(); }
  friend bool operator!=(const ExactComplex& a, const ExactComplex& b) { return !(a == b); }

  /// The value as a rational number when it is one (after reduction).
  std::optional<Rational> as_rational() const;

  /// Terms as "c*e(theta)" joined by " + ", "0" when empty.
  std::string to_string() const;

 private:
  void add_term(const Rational& phase, const Rational& coefficient);

  std::map<Rational, Rational> terms_;
};

}  // namespace ergolab
