#include "generators.hpp"

#include "ergolab/core/errors.hpp"
#include "ergolab/rank1/rank1.hpp"

#include <doctest.h>

#include <set>

using namespace ergolab;
using namespace ergolab::rank1;

namespace {

// B_0 = T; digit 0 gives B s B B, digit 1 gives B B s B.
std::string word_oracle(const std::vector<std::uint8_t>& digits, int n) {
  std::string b = "T";
  for (int m = 0; m < n; ++m) b = digits[static_cast<std::size_t>(m)] == 0 ? b + "s" + b + b : b + b + "s" + b;
  return b;
}

// Binary digits of a in [0, 1) by repeated doubling.
std::vector<std::uint8_t> digits_oracle(Rational a, int count) {
  std::vector<std::uint8_t> out;
  for (int i = 0; i < count; ++i) {
    a *= 2;
    out.push_back(a >= 1 ? 1 : 0);
    if (a >= 1) a -= 1;
  }
  return out;
}

// Stage-d tower as labels: stage-k level j -> j, other letters -> -1.
std::vector<std::int64_t> labelled_tower(const std::vector<std::uint8_t>& digits, int stage, int depth) {
  std::vector<std::int64_t> b(static_cast<std::size_t>(stage_length(stage)));
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = static_cast<std::int64_t>(i);
  for (int m = stage; m < depth; ++m) {
    std::vector<std::int64_t> next;
    auto add = [&](const std::vector<std::int64_t>& x) { next.insert(next.end(), x.begin(), x.end()); };
    if (digits[static_cast<std::size_t>(m)] == 0) {
      add(b), next.push_back(-1), add(b), add(b);
    } else {
      add(b), add(b), next.push_back(-1), add(b);
    }
    b = std::move(next);
  }
  return b;
}

std::string itinerary(const Rank1Map& m) {
  Rational x = m.level_lo(0) + m.cell_width() / 2;
  std::string out(1, m.level_letter(m.level_of(x)));
  for (std::int64_t i = 1; i < m.levels(); ++i) {
    x = m.apply(x);
    out += m.level_letter(m.level_of(x));
  }
  return out;
}

std::vector<std::uint8_t> random_digits(Rng& rng, int n) {
  std::vector<std::uint8_t> d;
  for (int i = 0; i < n; ++i) d.push_back(static_cast<std::uint8_t>(gen::integer(rng, 0, 1)));
  return d;
}

}  // namespace

TEST_CASE("stage words") {
  const auto a = Rank1Spec::from_rational(Rational(1, 3), 3);
  const auto b0 = rank1_word(a, 0);
  CHECK(b0.word == "T");
  CHECK(b0.height == 1);
  const std::vector<std::int64_t> lengths{1, 4, 13, 40};
  const std::vector<std::int64_t> heights{1, 3, 9, 27};
  for (int n = 0; n <= 3; ++n) {
    CHECK(rank1_word(a, n).length == lengths[static_cast<std::size_t>(n)]);
    CHECK(rank1_word(a, n).height == heights[static_cast<std::size_t>(n)]);
  }
  CHECK(spaced_word(rank1_word(Rank1Spec::from_rational(Rational(1, 4), 1), 1).word) == "T s T T");
  CHECK(spaced_word(rank1_word(Rank1Spec::from_rational(Rational(3, 4), 1), 1).word) == "T T s T");
}

TEST_CASE("property: words match the concatenation rule") {
  Rng rng(61);
  for (int trial = 0; trial < 12; ++trial) {
    const auto digits = random_digits(rng, 14);
    const auto spec = Rank1Spec::from_digits(digits, 14);
    for (int n = 0; n <= 9; ++n) CHECK(rank1_word(spec, n).word == word_oracle(digits, n));
    std::int64_t L = 1;
    std::int64_t h = 1;
    for (int n = 0; n <= 14; ++n) {
      const auto w = rank1_word(spec, n);
      CHECK(w.length == L);
      CHECK(w.height == h);
      CHECK(w.spacers == L - h);
      CHECK(stage_length(n) == L);
      CHECK(stage_height(n) == h);
      L = 3 * L + 1;
      h *= 3;
    }
  }
}

TEST_CASE("binary digits and agreement") {
  CHECK(binary_digits(Rational(1, 3), 6) == std::vector<std::uint8_t>{0, 1, 0, 1, 0, 1});
  CHECK(binary_digits(Rational(1, 4), 4) == std::vector<std::uint8_t>{0, 1, 0, 0});
  CHECK(binary_digits(Rational(3, 4), 4) == std::vector<std::uint8_t>{1, 1, 0, 0});
  Rng rng(23);
  for (int trial = 0; trial < 40; ++trial) {
    const Rational a = gen::unit_rational(rng, 1000);
    CHECK(binary_digits(a, 48) == digits_oracle(a, 48));
  }
  auto first = [](Rational a, Rational b) {
    return agreement_stage(Rank1Spec::from_rational(a, 64), Rank1Spec::from_rational(b, 64), 64).first_difference;
  };
  CHECK(first(Rational(1, 4), Rational(3, 4)) == 1);
  const auto x = digits_oracle(Rational(1, 3), 10);
  const auto y = digits_oracle(Rational(5, 12), 10);
  const auto diff = static_cast<int>(std::mismatch(x.begin(), x.end(), y.begin()).first - x.begin()) + 1;
  CHECK(diff == 3);
  CHECK(first(Rational(1, 3), Rational(5, 12)) == diff);
  CHECK(first(Rational(2, 7), Rational(2, 7)) == std::nullopt);
}

TEST_CASE("dyadic dichotomy") {
  auto verdict = [](Rational a, Rational b) {
    return dyadic_equivalence(Rank1Spec::from_rational(a, 8), Rank1Spec::from_rational(b, 8)).verdict;
  };
  CHECK(verdict(Rational(1, 4), Rational(3, 4)) == Dichotomy::IsomorphicFamily);
  CHECK(verdict(Rational(1, 3), Rational(0)) == Dichotomy::DisjointFamily);
  CHECK(verdict(Rational(1, 4), Rational(1, 3)) == Dichotomy::DisjointFamily);
  CHECK(verdict(Rational(3, 4), Rational(1, 3)) == Dichotomy::DisjointFamily);
  CHECK(verdict(Rational(2, 7), Rational(2, 7)) == Dichotomy::IsomorphicFamily);
  CHECK(verdict(Rational(1, 3), Rational(1, 3) + Rational(5, 64)) == Dichotomy::IsomorphicFamily);
  CHECK(to_string(Dichotomy::DisjointFamily) == "disjoint-family");
  CHECK_THROWS_AS(dyadic_equivalence(Rank1Spec::from_digits({0, 1, 1}, 3), Rank1Spec::from_rational(Rational(1, 2), 3)),
                  UndecidableInput);
}

TEST_CASE("depth-1 map") {
  const Rank1Map m(std::vector<std::uint8_t>{0});
  CHECK(m.levels() == 4);
  CHECK(m.piece_count() == 3);
  CHECK(m.defined_measure() == Rational(3, 4));
  Rational covered = 0;
  for (std::int64_t i = 0; i < m.piece_count(); ++i) {
    const auto p = m.piece(i);
    CHECK(p.hi - p.lo == Rational(1, 4));
    covered += p.hi - p.lo;
    const Rational mid = (p.lo + p.hi) / 2;
    CHECK(m.apply(mid) == mid + p.translation);
    CHECK(m.apply_inverse(m.apply(mid)) == mid);
  }
  CHECK(covered == Rational(3, 4));
  CHECK_THROWS_AS(m.apply(m.level_lo(3)), DepthExceeded);
  CHECK_THROWS_AS(m.apply_inverse(m.level_lo(0)), DepthExceeded);
  CHECK_THROWS_AS(Rank1Map(std::vector<std::uint8_t>(16, 0)), ValidationError);
  const std::string csv = map_csv(m);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
}

TEST_CASE("property: itineraries spell the stage word") {
  Rng rng(97);
  for (int trial = 0; trial < 10; ++trial) {
    const auto digits = random_digits(rng, 8);
    for (int d = 1; d <= 8; ++d) {
      const Rank1Map m(std::vector<std::uint8_t>(digits.begin(), digits.begin() + d));
      CHECK(itinerary(m) == word_oracle(digits, d));
    }
  }
}

TEST_CASE("property: pieces are exact translations tiling the defined set") {
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    const int d = static_cast<int>(gen::integer(rng, 1, 7));
    const Rank1Map m(random_digits(rng, d));
    std::set<Rational> sources;
    std::set<Rational> images;
    Rational src_total = 0;
    Rational img_total = 0;
    for (std::int64_t i = 0; i < m.piece_count(); ++i) {
      const auto p = m.piece(i);
      CHECK(sources.insert(p.lo).second);
      CHECK(images.insert(p.lo + p.translation).second);
      src_total += p.hi - p.lo;
      img_total += p.hi - p.lo;
      CHECK(p.lo + p.translation >= 0);
      CHECK(p.hi + p.translation <= 1);
    }
    CHECK(src_total == m.defined_measure());
    CHECK(img_total == m.defined_measure());
    CHECK_FALSE(sources.contains(m.level_lo(m.levels() - 1)));
    CHECK_FALSE(images.contains(m.level_lo(0)));
    CHECK(m.undefined_measure() == Rational(1, m.levels()));
  }
}

TEST_CASE("undefined measure decays geometrically") {
  for (int d = 1; d <= 15; ++d) {
    Rational bound(1, 4);
    for (int i = 1; i < d; ++i) bound /= 3;
    CHECK(Rational(1, stage_length(d)) <= bound);
  }
}

TEST_CASE("continuity: shared prefixes give identical words and maps") {
  for (int n = 0; n <= 6; ++n) {
    for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
      std::vector<std::uint8_t> x;
      for (int i = 0; i < n; ++i) x.push_back(static_cast<std::uint8_t>((bits >> i) & 1u));
      auto y = x;
      x.insert(x.end(), {0, 0});
      y.insert(y.end(), {1, 1});
      const auto sx = Rank1Spec::from_digits(x, n + 2);
      const auto sy = Rank1Spec::from_digits(y, n + 2);
      CHECK(rank1_word(sx, n).word == rank1_word(sy, n).word);
      if (n >= 1) CHECK(rank1_map(Rank1Spec::from_digits(x, n)) == rank1_map(Rank1Spec::from_digits(y, n)));
      CHECK(rank1_word(sx, n + 1).word != rank1_word(sy, n + 1).word);
    }
  }
}

TEST_CASE("property: level positions and overlaps") {
  Rng rng(808);
  for (int trial = 0; trial < 10; ++trial) {
    const int d = static_cast<int>(gen::integer(rng, 1, 6));
    const auto digits = random_digits(rng, d);
    const Rank1Map m(digits);
    const int stage = static_cast<int>(gen::integer(rng, 0, d));
    const auto level = gen::integer(rng, 0, stage_length(stage) - 1);
    const auto tower = labelled_tower(digits, stage, d);
    std::vector<std::int64_t> expected;
    for (std::size_t i = 0; i < tower.size(); ++i) {
      if (tower[i] == level) expected.push_back(static_cast<std::int64_t>(i));
    }
    CHECK(level_positions(m, stage, level) == expected);
    const std::set<std::int64_t> p(expected.begin(), expected.end());
    const auto counts = level_overlap_counts(m, stage, level, 100);
    for (std::int64_t n = 0; n <= 100; ++n) {
      std::int64_t naive = 0;
      for (auto i : expected) naive += p.contains(i + n) ? 1 : 0;
      CHECK(counts[static_cast<std::size_t>(n)] == naive);
    }
  }
}

TEST_CASE("fibered family S(a, x)") {
  const auto fs = make_Sa_system(Measure::dirac({Rational(1, 3)}), 6);
  const auto fiber = fs.fiber({Rational(1, 3)});
  const auto* t = dynamic_cast<const Rank1Transformation*>(fiber.map.get());
  REQUIRE(t != nullptr);
  CHECK(t->tower() == rank1_map(Rank1Spec::from_rational(Rational(1, 3), 6)));

  const auto haar = make_Sa_system(Measure::haar(), 5);
  const auto params = haar.base_measure().sample(31, 6);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto f = haar.fiber(params[i]);
    const auto* tf = dynamic_cast<const Rank1Transformation*>(f.map.get());
    REQUIRE(tf != nullptr);
    CHECK(tf->tower().depth() == 5);
    CHECK(itinerary(tf->tower()) == word_oracle(binary_digits(params[i][0], 5), 5));
    if (i > 0) {
      // Haar samples are k / 2^64, so their differences are dyadic.
      const auto v = dyadic_equivalence(Rank1Spec::from_rational(params[i][0], 5), Rank1Spec::from_rational(params[0][0], 5));
      CHECK(v.verdict == Dichotomy::IsomorphicFamily);
    }
  }
  const auto v = dyadic_equivalence(Rank1Spec::from_rational(Rational(1, 3), 5), Rank1Spec::from_rational(Rational(1, 5), 5));
  CHECK(v.verdict == Dichotomy::DisjointFamily);
}
