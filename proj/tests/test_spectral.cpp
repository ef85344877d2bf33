#include "generators.hpp"

#include "ergolab/core/errors.hpp"
#include "ergolab/core/system.hpp"
#include "ergolab/rank1/rank1.hpp"
#include "ergolab/spectral/spectral.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace ergolab;
using namespace ergolab::spectral;
using nlohmann::json;

namespace {

System sys(const json& doc) { return build_system(SystemSpec::from_json(doc)); }

json rotation(const std::string& angle) { return {{"kind", "rotation"}, {"params", {{"angle", angle}}}}; }

json twist(const json& base) {
  return {{"kind", "twist"}, {"params", {{"base_measure", base}, {"cocycle", {{"kind", "affine"}, {"slope", "1"}}}}}};
}

// |(1/N) sum_{n<N} e(n d)| in closed form.
double geometric_mass(double d, std::int64_t N) {
  const double s = std::sin(std::numbers::pi * d);
  if (std::abs(s) < 1e-15) return 1.0;
  return std::abs(std::sin(std::numbers::pi * static_cast<double>(N) * d) / (static_cast<double>(N) * s));
}

CorrelationSeq seq(const System& s, const Frequency& k, std::int64_t N, bool center = false) {
  return correlation_sequence(s, Character{k}, {N, center, {}});
}

}  // namespace

TEST_CASE("rotation correlations are e(-n alpha) exactly") {
  Rng rng(8);
  for (int trial = 0; trial < 10; ++trial) {
    const Rational a = gen::unit_rational(rng, 200);
    const auto c = seq(sys(rotation(gen::text(a))), {1}, 64);
    REQUIRE(c.is_exact());
    for (std::int64_t n = -64; n <= 64; ++n) CHECK(*c.exact_at(n) == ExactComplex::unit(-n * a));
  }
  const auto dec = seq(sys({{"kind", "rotation"}, {"params", {{"angle", "0.1234"}}}, {"precision", 4}}), {1}, 16);
  CHECK(*dec.exact_at(3) == ExactComplex::unit(Rational(-3 * 1234, 10000)));
}

TEST_CASE("twist and identity correlations") {
  const auto c = seq(sys(twist("haar")), {0, 1}, 32);
  CHECK(*c.exact_at(0) == ExactComplex(1));
  for (std::int64_t n = 1; n <= 32; ++n) CHECK(c.exact_at(n)->is_zero());
  const auto id = seq(sys({{"kind", "identity"}, {"params", {{"measure", "haar"}}}}), {1}, 32);
  for (std::int64_t n = -32; n <= 32; ++n) CHECK(*id.exact_at(n) == ExactComplex(1));
}

TEST_CASE("Wiener averages") {
  const auto rot = wiener_atomic_mass(seq(sys(rotation("1/3")), {1}, 4096));
  CHECK(rot.exact_total_mass == Rational(1));
  for (const auto& [n, mass] : rot.trace) CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE_FALSE(rot.atoms.empty());
  CHECK(rot.atoms.front().eigenvalue_angle == Rational(1, 3));

  for (std::int64_t N : {256, 1024, 4096}) {
    const auto w = wiener_atomic_mass(seq(sys(twist("haar")), {0, 1}, N));
    CHECK(w.exact_total_mass == Rational(1, N));
    CHECK(w.total_mass <= 2.0 / static_cast<double>(N));
  }
  const auto id = wiener_atomic_mass(seq(sys({{"kind", "identity"}, {"params", {{"measure", "haar"}}}}), {1}, 512));
  CHECK(id.exact_total_mass == Rational(1));
}

TEST_CASE("eigenvalue detection on a rotation") {
  const auto s = sys(rotation("1/3"));
  const auto hit = detect_eigenvalue(s, Character{{1}}, Rational(1, 3));
  CHECK(hit.witnessed);
  CHECK(hit.exact_mass_squared == Rational(1));
  const auto miss = detect_eigenvalue(s, Character{{1}}, Rational(0));
  CHECK_FALSE(miss.witnessed);
  CHECK(miss.mass <= 2.0 / 4096);
  CHECK_THROWS_AS(detect_eigenvalue(s, Character{{1}}, Rational(0), 8), ValidationError);
}

TEST_CASE("property: off-angle masses match the geometric sum") {
  Rng rng(314);
  const std::int64_t N = 1024;
  for (int trial = 0; trial < 20; ++trial) {
    const Rational a = gen::unit_rational(rng, 50);
    const Rational t = gen::unit_rational(rng, 50);
    const auto c = seq(sys(rotation(gen::text(a))), {1}, N);
    const double d = to_double(frac(t - a));
    const double mass = eigenvalue_mass(c, t).mass;
    CAPTURE(gen::text(a));
    CAPTURE(gen::text(t));
    CHECK(mass == doctest::Approx(geometric_mass(d, N)).epsilon(1e-9));
    if (t != a) {
      CHECK(mass <= 1.0 / (static_cast<double>(N) * std::abs(std::sin(std::numbers::pi * d))) + 1e-12);
      if (std::abs(std::sin(std::numbers::pi * d)) >= 0.5) CHECK(mass <= 2.0 / static_cast<double>(N));
    } else {
      CHECK(mass >= 1.0 - 1e-9);
    }
  }
}

TEST_CASE("property: correlation sequences are Hermitian, bounded and positive definite") {
  Rng rng(2718);
  for (int trial = 0; trial < 16; ++trial) {
    const json doc = gen::system(rng);
    const auto s = sys(doc);
    Frequency k(s.arity());
    for (auto& v : k) v = gen::integer(rng, -3, 3);
    const bool center = trial % 2 == 1;
    CAPTURE(doc.dump());
    const auto c = seq(s, k, 128, center);
    REQUIRE(c.is_exact());
    CHECK(c.at(0).imag() == 0.0);
    CHECK(c.at(0).real() >= -1e-12);
    for (std::int64_t n = 1; n <= 128; ++n) {
      CHECK(*c.exact_at(-n) == c.exact_at(n)->conj());
      CHECK(std::abs(c.at(n)) <= c.at(0).real() + 1e-12);
    }
    for (std::size_t size : {2u, 16u, 64u}) CHECK(toeplitz_min_eigenvalue(c, size) >= -1e-9);

    AtomOptions opt;
    opt.grid_denominator = 16;
    const auto w = wiener_atomic_mass(c, opt);
    const double v0 = c.at(0).real();
    CHECK(w.total_mass >= -1e-9);
    CHECK(w.total_mass <= v0 * v0 + 1e-9);
    for (const auto& atom : w.atoms) CHECK(atom.mass * atom.mass <= w.total_mass + 1e-9);
  }
}

TEST_CASE("property: coefficients are affine in mixture weights") {
  Rng rng(99);
  for (int trial = 0; trial < 6; ++trial) {
    const std::string a = gen::text(gen::unit_rational(rng));
    const std::string b = gen::text(gen::unit_rational(rng));
    auto dirac = [](const std::string& at) { return json{{"kind", "dirac"}, {"at", at}}; };
    const auto ca = seq(sys(twist(dirac(a))), {0, 1}, 64);
    const auto cb = seq(sys(twist(dirac(b))), {0, 1}, 64);
    for (const Rational& w : {Rational(0), Rational(1, 4), Rational(1, 2), Rational(1)}) {
      const json mix{{"kind", "mixture"},
                     {"components",
                      {{{"weight", gen::text(w)}, {"measure", dirac(a)}}, {{"weight", gen::text(1 - w)}, {"measure", dirac(b)}}}}};
      const auto c = seq(sys(twist(mix)), {0, 1}, 64);
      for (std::int64_t n = -64; n <= 64; ++n) {
        CHECK(*c.exact_at(n) == w * *ca.exact_at(n) + (1 - w) * *cb.exact_at(n));
      }
    }
  }
}

TEST_CASE("Monte Carlo correlations stay within 4 standard errors") {
  // Twist over the uniform law on [0, 1/2): values(n) = 2 * int_0^{1/2} e(-n x) dx.
  const auto s = sys(twist({{"kind", "interval"}, {"lo", "0"}, {"hi", "1/2"}}));
  REQUIRE_FALSE(s.exact_integrals);
  const auto c = correlation_sequence(s, Character{{0, 1}}, {16, false, {123, 20000}});
  CHECK(c.method == Method::MonteCarlo);
  for (std::int64_t n = 1; n <= 16; ++n) {
    const std::complex<double> e = std::exp(std::complex<double>(0, -std::numbers::pi * static_cast<double>(n)));
    const std::complex<double> oracle = (e - 1.0) / std::complex<double>(0, -std::numbers::pi * static_cast<double>(n));
    CHECK(std::abs(c.at(n) - oracle) <= 4.0 * c.std_errors[static_cast<std::size_t>(n)] + 1e-12);
  }
  const auto again = correlation_sequence(s, Character{{0, 1}}, {16, false, {123, 20000}});
  CHECK(again.values == c.values);
}

TEST_CASE("level-indicator correlations match a walk through the tower") {
  const auto spec = rank1::Rank1Spec::from_rational(Rational(1, 3), 5);
  const auto s = rank1::rank1_system(spec);
  const rank1::Rank1Map map(spec.digits(5));
  const std::int64_t L = map.levels();
  for (const auto& [stage, level] : std::vector<std::pair<int, std::int64_t>>{{0, 0}, {1, 2}, {2, 7}, {3, 0}}) {
    const auto c = correlation_sequence(s, LevelIndicator{stage, level}, {40, false, {}});
    CHECK(c.method == Method::Rank1Level);
    const auto positions = rank1::level_positions(map, stage, level);
    const std::set<std::int64_t> in_a(positions.begin(), positions.end());
    for (std::int64_t n = 0; n <= 40; ++n) {
      std::int64_t hits = 0;
      for (auto p : positions) {
        Rational x = map.level_lo(p) + map.cell_width() / 2;
        bool ok = true;
        for (std::int64_t i = 0; i < n && ok; ++i) {
          if (map.level_of(x) == L - 1) {
            ok = false;
          } else {
            x = map.apply(x);
          }
        }
        if (ok && in_a.contains(map.level_of(x))) ++hits;
      }
      CHECK(c.at(n).real() == doctest::Approx(static_cast<double>(hits) / static_cast<double>(L)).epsilon(1e-12));
    }
  }
}

TEST_CASE("weak-mixing test") {
  const auto id = weak_mixing_test(sys({{"kind", "identity"}, {"params", {{"measure", "haar"}}}}), {Character{{1}}}, 1024);
  CHECK(id.verdict == "atoms-detected");
  const auto rot = weak_mixing_test(sys(rotation("1/3")), {Character{{1}}}, 1024);
  CHECK(rot.verdict == "atoms-detected");
  const auto r1 = weak_mixing_test(rank1::rank1_system(rank1::Rank1Spec::from_rational(Rational(1, 3), 12)),
                                   {LevelIndicator{0, 0}, LevelIndicator{1, 0}, LevelIndicator{2, 3}, LevelIndicator{3, 5}});
  CHECK(r1.verdict == "no-atoms-detected");
  CHECK(r1.disclaimer == kWeakMixingDisclaimer);
}

TEST_CASE("fiber eigenvalue scans") {
  FiberScanOptions opt;
  opt.samples = 16;
  opt.N = 1024;
  opt.seed = 4;
  const auto haar = fiber_eigenvalue_scan(build_fibered(SystemSpec::from_json(twist("haar"))), Character{{1}},
                                          Rational(1, 7), opt);
  CHECK(haar.witness_fraction == 0.0);
  REQUIRE(haar.flat.has_value());
  CHECK_FALSE(haar.flat->witnessed);

  const json constant{{"kind", "fibered"},
                      {"params",
                       {{"base_measure", "haar"},
                        {"fiber", {{"family", "rotation"}, {"angle", {{"kind", "affine"}, {"slope", "0"}, {"offset", "1/3"}}}}}}}};
  const auto all = fiber_eigenvalue_scan(build_fibered(SystemSpec::from_json(constant)), Character{{1}}, Rational(1, 3), opt);
  CHECK(all.witness_fraction == 1.0);
  REQUIRE(all.flat.has_value());
  CHECK(all.flat->witnessed);

  const auto single = fiber_eigenvalue_scan(build_fibered(SystemSpec::from_json(twist({{"kind", "dirac"}, {"at", "1/3"}}))),
                                            Character{{1}}, Rational(1, 3), opt);
  CHECK(single.witness_fraction == 1.0);
  REQUIRE(single.flat.has_value());
  CHECK(single.flat->witnessed);
}

TEST_CASE("report serialization") {
  const auto c = seq(sys(rotation("1/4")), {1}, 4);
  const json j = to_json(c);
  CHECK(j.at("N") == 4);
  CHECK(j.at("values").size() == 5);  // n = 0..N, the rest by symmetry
  const std::string csv = to_csv(c);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 10);
  CHECK(csv.rfind("n,re,im\n", 0) == 0);
  CHECK(observable_from_json(observable_to_json(LevelIndicator{2, 5})).index() == 1);
  CHECK_THROWS_AS(observable_from_json(json{{"wave", 1}}), ValidationError);
}
