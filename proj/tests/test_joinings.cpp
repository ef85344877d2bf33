#include "generators.hpp"

#include "ergolab/core/errors.hpp"
#include "ergolab/joinings/joinings.hpp"

#include <doctest.h>

#include <cmath>

using namespace ergolab;
using namespace ergolab::joinings;
using nlohmann::json;

namespace {

json rotation(const std::string& angle) { return {{"kind", "rotation"}, {"params", {{"angle", angle}}}}; }

json twist(const json& base = "haar") {
  return {{"kind", "twist"}, {"params", {{"base_measure", base}, {"cocycle", {{"kind", "affine"}, {"slope", "1"}}}}}};
}

Joining make(const json& doc) { return build_joining(JoiningSpec::from_json(doc)); }

ExactComplex integral(const Joining& j, const Frequency& k) {
  auto v = j.integrate_exact(k);
  REQUIRE(v.has_value());
  return *v;
}

std::string error_field(const json& doc) {
  try {
    (void)make(doc);
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "<accepted>";
}

}  // namespace

TEST_CASE("product and diagonal integrators") {
  const auto prod = make({{"kind", "product"}, {"systems", {rotation("1/3"), rotation("1/3")}}});
  CHECK(integral(prod, {1, -1}).is_zero());
  const auto diag = make({{"kind", "diagonal"}, {"systems", {rotation("1/3")}}});
  CHECK(integral(diag, {1, -1}) == ExactComplex(1));
  CHECK(integral(diag, {1, 1}).is_zero());
  for (const auto& x : sample_joining(diag, 5, 200)) CHECK(x[0] == x[1]);
}

TEST_CASE("off-diagonal joinings follow the map") {
  Rng rng(12);
  for (int trial = 0; trial < 8; ++trial) {
    const Rational a = gen::unit_rational(rng);
    const auto n = gen::integer(rng, -3, 3);
    const auto j = make({{"kind", "off-diagonal"}, {"systems", {rotation(gen::text(a))}}, {"params", {{"power", n}}}});
    CHECK(integral(j, {1, -1}) == ExactComplex::unit(-n * a));
  }
  const auto zero = make({{"kind", "off-diagonal"}, {"systems", {twist()}}, {"params", {{"power", 0}}}});
  const auto diag = make({{"kind", "diagonal"}, {"systems", {twist()}}});
  for (const auto& k : character_family(4, 4)) CHECK(integral(zero, k) == integral(diag, k));
}

TEST_CASE("relative independence over the trivial factor is the product") {
  const json systems = {twist(), rotation("2/7")};
  const auto rel = make({{"kind", "rel-indep"}, {"systems", systems}, {"params", {{"factors", {json::array(), json::array()}}}}});
  const auto prod = make({{"kind", "product"}, {"systems", systems}});
  for (const auto& k : character_family(3, 8)) CHECK(integral(rel, k) == integral(prod, k));
}

TEST_CASE("diagonal relative independence") {
  const json atoms{{"kind", "mixture"},
                   {"components",
                    {{{"weight", "1/2"}, {"measure", {{"kind", "dirac"}, {"at", "0"}}}},
                     {{"weight", "1/2"}, {"measure", {{"kind", "dirac"}, {"at", "1/2"}}}}}}};
  const json id{{"kind", "identity"}, {"params", {{"measure", atoms}}}};
  const auto j = make({{"kind", "rel-indep"},
                       {"systems", {id, id}},
                       {"params", {{"factors", {json::array({0}), json::array({0})}}, {"base", "diagonal"}}}});
  CHECK(marginal_check(j, 8).pass);
  CHECK(invariance_check(j, character_family(2, 4)).pass);
  const auto r = product_consistency_test(j, 1);
  CHECK_FALSE(r.consistent());
  // e(x + x') = e(2x) = 1 on the atoms, against 0 under the product.
  CHECK(r.witness == Frequency{1, 1});

  // Sharing the Haar base of two twists.
  const auto shared = make({{"kind", "rel-indep"},
                            {"systems", {twist(), twist()}},
                            {"params", {{"factors", {json::array({0}), json::array({0})}}, {"base", "diagonal"}}}});
  CHECK(marginal_check(shared, 4).pass);
  CHECK(invariance_check(shared, character_family(4, 2)).pass);
  CHECK(integral(shared, {1, 0, -1, 0}) == ExactComplex(1));

  CHECK(error_field({{"kind", "rel-indep"},
                     {"systems", {twist(), rotation("1/3")}},
                     {"params", {{"factors", {json::array({0}), json::array({0})}}, {"base", "diagonal"}}}}) ==
        "params.factors");
}

TEST_CASE("graph joinings validate their map") {
  const auto g = make({{"kind", "graph"},
                       {"systems", {rotation("1/3")}},
                       {"params", {{"map", {{"kind", "identity"}, {"params", {{"measure", "haar"}}}}}}}});
  const auto r = product_consistency_test(g, 1);
  CHECK(r.verdict == "refuted");
  REQUIRE(r.witness.has_value());
  CHECK(*r.witness == Frequency{1, -1});
  const auto row = std::find_if(r.rows.begin(), r.rows.end(), [](const CharacterCheck& c) { return c.k == Frequency{1, -1}; });
  REQUIRE(row != r.rows.end());
  CHECK(*row->exact_observed == ExactComplex(1));
  CHECK(row->exact_expected->is_zero());
  CHECK(r.note == kOneSidedNote);

  CHECK(error_field({{"kind", "graph"}, {"systems", {twist()}}, {"params", {{"map", rotation("1/5")}}}}) == "params.map");
  CHECK(error_field({{"kind", "graph"}, {"systems", {rotation("1/3")}}, {"params", {{"map", twist()}}}}) == "params.map");
}

TEST_CASE("property: constructible joinings have the right marginals and are invariant") {
  Rng rng(4242);
  for (int trial = 0; trial < 12; ++trial) {
    const json a = gen::system(rng);
    const json b = gen::system(rng);
    std::vector<json> docs{
        {{"kind", "product"}, {"systems", {a, b}}},
        {{"kind", "diagonal"}, {"systems", {a}}},
        {{"kind", "off-diagonal"}, {"systems", {a}}, {"params", {{"power", gen::integer(rng, -4, 4)}}}},
        {{"kind", "rel-indep"}, {"systems", {a, b}}, {"params", {{"factors", {json::array(), json::array()}}}}},
    };
    for (const auto& doc : docs) {
      CAPTURE(doc.dump());
      const auto j = make(doc);
      REQUIRE(j.exact());
      CHECK(marginal_check(j, 4).pass);
      CHECK(invariance_check(j, character_family(j.arity(), 2)).pass);
    }
    CHECK(product_consistency_test(make(docs[0]), 2).consistent());
    CHECK(product_consistency_test(make(docs[3]), 2).consistent());
  }
}

TEST_CASE("twist joining with a rotation factor") {
  const auto j = make({{"kind", "example1-triple"}, {"params", {{"alpha", "1/5"}}}});
  CHECK(j.exact());
  CHECK(j.arity() == 4);
  CHECK(marginal_check(j, 4).pass);
  CHECK(invariance_check(j, character_family(4, 1)).pass);
  const Frequency F{0, -1, 0, 1};
  CHECK(eigencharacter_phase(j, F) == Rational(1, 5));
  CHECK(integral(j, F).is_zero());

  const auto r = eigenvalue_refutation(j, F, Rational(1, 5));
  CHECK(r.refuted);
  CHECK(r.joint.mass == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.joint.exact_mass_squared == Rational(1));
  CHECK(r.product.mass <= 2.0 / 4096);
  CHECK(r.product_bound == doctest::Approx(2.0 / 4096));

  const auto c = product_consistency_test(j, 1);
  CHECK(c.witness == Frequency{1, 0, -1, 0});
}

TEST_CASE("twist joining at an irrational-looking angle evolves exactly") {
  const auto j = make({{"kind", "example1-triple"}, {"params", {{"alpha", "sqrt(2)/2"}}}, {"precision", 40}});
  const Rational alpha = parse_rational("sqrt(2)/2", 40);
  for (auto x : sample_joining(j, 17, 50)) {
    REQUIRE(x[0] == x[2]);
    for (int n = 0; n < 5; ++n) {
      const Point y = j.joint.apply(x);
      CHECK(y[3] == frac(x[3] + x[2] + alpha));
      CHECK(y[1] == frac(x[1] + x[0]));
      x = y;
    }
  }
}

TEST_CASE("sampling") {
  const auto prod = make({{"kind", "product"}, {"systems", {rotation("1/3"), twist()}}});
  const auto pts = sample_joining(prod, 2024, 1000);
  CHECK(pts == sample_joining(prod, 2024, 1000));
  std::complex<double> mean{0, 0};
  for (const auto& p : pts) mean += character_value({1, 0, 0}, p);
  mean /= 1000.0;
  CHECK(std::abs(mean) <= 4.0 / std::sqrt(1000.0));

  const auto rel = make({{"kind", "rel-indep"}, {"systems", {rotation("1/3"), twist()}}, {"params", {{"factors", {json::array(), json::array()}}}}});
  const auto r = product_consistency_test(rel, 1, {9, 20000, 4.0, true});
  CHECK_FALSE(r.exact);
  CHECK(r.consistent());
  CHECK(r.max_z <= 4.0);
}

TEST_CASE("sampled tests catch dependent samplers") {
  const auto base = make({{"kind", "product"}, {"systems", {rotation("1/3"), rotation("1/3")}}});
  const auto coupled = make_custom_joining(base.components,
                                           [](Rng& rng) {
                                             const Rational x = uniform_rational(rng);
                                             return Point{x, x};
                                           },
                                           "x = y");
  const auto r = product_consistency_test(coupled, 1, {1, 5000});
  CHECK_FALSE(r.consistent());
  CHECK(invariance_check(coupled, character_family(2, 1), {1, 5000}).pass);

  const auto skewed = make_custom_joining(base.components,
                                          [](Rng& rng) {
                                            const Rational x = uniform_rational(rng) / 2;
                                            return Point{x, uniform_rational(rng)};
                                          },
                                          "x in [0, 1/2)");
  CHECK_FALSE(marginal_check(skewed, 1, {2, 5000}).pass);
}

TEST_CASE("joining specs round-trip and report fields") {
  const json doc{{"kind", "off-diagonal"}, {"systems", {rotation("1/3")}}, {"params", {{"power", 2}}}};
  CHECK(JoiningSpec::from_json(doc).to_json() == JoiningSpec::from_json(JoiningSpec::from_json(doc).to_json()).to_json());
  CHECK(error_field({{"kind", "braid"}, {"systems", {rotation("1/3")}}}) == "kind");
  CHECK(error_field({{"kind", "product"}, {"systems", {rotation("1/3")}}, {"colour", 1}}) == "colour");
  CHECK(error_field({{"kind", "off-diagonal"}, {"systems", {rotation("1/3")}}}) == "params.power");
  const auto prod = make({{"kind", "product"}, {"systems", {rotation("1/3"), rotation("1/3")}}});
  const auto r = product_consistency_test(prod, 1);
  const std::string csv = to_csv(r);
  CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == r.rows.size() + 1);
  CHECK(to_json(r).at("verdict") == "consistent-with-product");
}
