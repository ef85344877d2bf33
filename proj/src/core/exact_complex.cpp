#include "ergolab/core/exact_complex.hpp"

#include <boost/integer/common_factor.hpp>
#include <numbers>

#include <mutex>
#include <vector>

namespace ergolab {
namespace {

using IntPoly = std::vector<std::int64_t>;  // coefficient of x^j at index j

// Exact division of integer polynomials; divisor must be monic.
IntPoly divide_exact(IntPoly dividend, const IntPoly& divisor) {
  const std::size_t dd = divisor.size() - 1;
  IntPoly quotient(dividend.size() - dd, 0);
  for (std::size_t i = dividend.size(); i-- > dd;) {
    const std::int64_t c = dividend[i];
    quotient[i - dd] = c;
    if (c == 0) continue;
    for (std::size_t j = 0; j <= dd; ++j) dividend[i - dd + j] -= c * divisor[j];
  }
  return quotient;
}

const IntPoly& cyclotomic(std::int64_t n) {
  static std::mutex mutex;
  static std::map<std::int64_t, IntPoly> cache;
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(n); it != cache.end()) return it->second;
  }
  IntPoly poly(static_cast<std::size_t>(n) + 1, 0);
  poly[0] = -1;
  poly[static_cast<std::size_t>(n)] = 1;
  for (std::int64_t d = 1; d < n; ++d) {
    if (n % d == 0) poly = divide_exact(std::move(poly), cyclotomic(d));
  }
  std::lock_guard lock(mutex);
  return cache.emplace(n, std::move(poly)).first->second;
}

// Reduces sum_j coeffs[j] x^j modulo Phi_n and reports whether the remainder vanishes.
bool vanishes_mod_cyclotomic(std::vector<Rational> coeffs, std::int64_t n) {
  const IntPoly& phi = cyclotomic(n);
  const std::size_t deg = phi.size() - 1;
  for (std::size_t i = coeffs.size(); i-- > deg;) {
    if (coeffs[i] == 0) continue;
    const Rational c = coeffs[i];
    for (std::size_t j = 0; j <= deg; ++j) {
      if (phi[j] != 0) coeffs[i - deg + j] -= c * phi[j];
    }
  }
  for (std::size_t i = 0; i < deg && i < coeffs.size(); ++i) {
    if (coeffs[i] != 0) return false;
  }
  return true;
}

struct PhaseClass {
  Rational anchor;
  std::int64_t order = 1;
  std::vector<std::pair<Rational, Rational>> members;  // (relative phase, coefficient)
};

std::vector<PhaseClass> group_by_relative_order(const std::map<Rational, Rational>& terms) {
  std::vector<PhaseClass> classes;
  for (const auto& [phase, coeff] : terms) {
    bool placed = false;
    for (auto& cls : classes) {
      const Rational rel = frac(phase - cls.anchor);
      const BigInt den = boost::multiprecision::denominator(rel);
      if (den > ExactComplex::kMaxReductionOrder) continue;
      const std::int64_t order = boost::integer::lcm(cls.order, den.convert_to<std::int64_t>());
      if (order > ExactComplex::kMaxReductionOrder) continue;
      cls.order = order;
      cls.members.emplace_back(rel, coeff);
      placed = true;
      break;
    }
    if (!placed) classes.push_back(PhaseClass{phase, 1, {{Rational(0), coeff}}});
  }
  return classes;
}

bool class_vanishes(const PhaseClass& cls) {
  if (cls.members.size() == 1) return cls.members.front().second == 0;
  std::vector<Rational> coeffs(static_cast<std::size_t>(cls.order), Rational(0));
  for (const auto& [rel, coeff] : cls.members) {
    const auto index = (rel * cls.order).convert_to<BigInt>().convert_to<std::int64_t>();
    coeffs[static_cast<std::size_t>(index)] += coeff;
  }
  return vanishes_mod_cyclotomic(std::move(coeffs), cls.order);
}

}  // namespace

ExactComplex::ExactComplex(const Rational& real) {
  if (real != 0) terms_.emplace(Rational(0), real);
}

ExactComplex ExactComplex::unit(const Rational& phase) {
  ExactComplex z;
  z.terms_.emplace(frac(phase), Rational(1));
  return z;
}

void ExactComplex::add_term(const Rational& phase, const Rational& coefficient) {
  if (coefficient == 0) return;
  auto [it, inserted] = terms_.try_emplace(phase, coefficient);
  if (!inserted) {
    it->second += coefficient;
    if (it->second == 0) terms_.erase(it);
  }
}

ExactComplex& ExactComplex::operator+=(const ExactComplex& other) {
  for (const auto& [phase, coeff] : other.terms_) add_term(phase, coeff);
  return *this;
}

ExactComplex& ExactComplex::operator-=(const ExactComplex& other) {
  for (const auto& [phase, coeff] : other.terms_) add_term(phase, -coeff);
  return *this;
}

ExactComplex& ExactComplex::operator*=(const ExactComplex& other) {
  ExactComplex product;
  for (const auto& [p1, c1] : terms_) {
    for (const auto& [p2, c2] : other.terms_) product.add_term(frac(p1 + p2), c1 * c2);
  }
  *this = std::move(product);
  return *this;
}

ExactComplex& ExactComplex::operator*=(const Rational& scale) {
  if (scale == 0) {
    terms_.clear();
    return *this;
  }
  for (auto& [phase, coeff] : terms_) coeff *= scale;
  return *this;
}

ExactComplex ExactComplex::conj() const {
  ExactComplex z;
  for (const auto& [phase, coeff] : terms_) z.add_term(frac(-phase), coeff);
  return z;
}

ExactComplex ExactComplex::norm() const { return *this * conj(); }

std::complex<double> ExactComplex::value() const {
  std::complex<double> sum{0.0, 0.0};
  for (const auto& [phase, coeff] : terms_) {
    const double angle = 2.0 * std::numbers::pi * to_double(phase);
    sum += to_double(coeff) * std::complex<double>(std::cos(angle), std::sin(angle));
  }
  return sum;
}

bool ExactComplex::is_zero() const {
  if (terms_.empty()) return true;
  for (const auto& cls : group_by_relative_order(terms_)) {
    if (!class_vanishes(cls)) return false;
  }
  return true;
}

std::optional<Rational> ExactComplex::as_rational() const {
  if (terms_.empty()) return Rational(0);
  if (terms_.size() == 1 && terms_.begin()->first == 0) return terms_.begin()->second;
  // A real rational r satisfies z - r == 0; the candidate is the mean over
  // each class's conjugates, so probe via the phase-0 coefficient after
  // reducing the non-trivial terms into it.
  std::map<Rational, Rational> others = terms_;
  others.erase(Rational(0));
  ExactComplex residual;
  residual.terms_ = std::move(others);
  // Try to express the residual as a rational: its numeric value is a
  // candidate, but only rationals with small denominators arise here.
  const auto approx = residual.value();
  if (std::abs(approx.imag()) > 1e-9) return std::nullopt;
  for (std::int64_t den = 1; den <= kMaxReductionOrder; ++den) {
    const double scaled = approx.real() * static_cast<double>(den);
    const double rounded = std::round(scaled);
    if (std::abs(scaled - rounded) > 1e-6) continue;
    const Rational candidate(BigInt(static_cast<long long>(rounded)), BigInt(den));
    if (residual == ExactComplex(candidate)) {
      auto it = terms_.find(Rational(0));
      return candidate + (it == terms_.end() ? Rational(0) : it->second);
    }
    break;
  }
  return std::nullopt;
}

std::string ExactComplex::to_string() const {
  if (terms_.empty()) return "0";
  std::string out;
  for (const auto& [phase, coeff] : terms_) {
    if (!out.empty()) out += " + ";
    out += format_rational(coeff);
    if (phase != 0) out += "*e(" + format_rational(phase) + ")";
  }
  return out;
}

}  // namespace ergolab
