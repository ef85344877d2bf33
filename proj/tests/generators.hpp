#pragma once

#include "ergolab/core/rational.hpp"
#include "ergolab/core/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

// Hand-rolled generators for property tests. Every test seeds its own Rng.
namespace gen {

inline std::int64_t integer(ergolab::Rng& rng, std::int64_t lo, std::int64_t hi) {
  return lo + static_cast<std::int64_t>(ergolab::uniform_index(rng, static_cast<std::uint64_t>(hi - lo + 1)));
}

// p/q in [0, 1) with 1 <= q <= max_den.
inline ergolab::Rational unit_rational(ergolab::Rng& rng, std::int64_t max_den = 60) {
  const auto q = integer(rng, 1, max_den);
  return ergolab::Rational(integer(rng, 0, q - 1), q);
}

inline std::string text(const ergolab::Rational& r) { return ergolab::format_rational(r); }

inline nlohmann::json dirac_mixture(ergolab::Rng& rng, int atoms) {
  nlohmann::json comps = nlohmann::json::array();
  for (int i = 0; i < atoms; ++i) {
    comps.push_back({{"weight", "1/" + std::to_string(atoms)},
                     {"measure", {{"kind", "dirac"}, {"at", text(unit_rational(rng))}}}});
  }
  return {{"kind", "mixture"}, {"components", comps}};
}

inline nlohmann::json base_measure(ergolab::Rng& rng) {
  switch (integer(rng, 0, 2)) {
    case 0:
      return "haar";
    case 1:
      return {{"kind", "cyclic"}, {"modulus", integer(rng, 2, 9)}};
    default:
      return dirac_mixture(rng, static_cast<int>(integer(rng, 1, 4)));
  }
}

inline nlohmann::json affine_cocycle(ergolab::Rng& rng) {
  return {{"kind", "affine"}, {"slope", std::to_string(integer(rng, -2, 2))}, {"offset", text(unit_rational(rng))}};
}

// A random exact system spec of arity 1 or 2.
inline nlohmann::json system(ergolab::Rng& rng) {
  switch (integer(rng, 0, 3)) {
    case 0: {
      nlohmann::json spec{{"kind", "rotation"}, {"params", {{"angle", text(unit_rational(rng))}}}};
      return spec;
    }
    case 1:
      return {{"kind", "identity"}, {"params", {{"measure", dirac_mixture(rng, 3)}}}};
    case 2:
      return {{"kind", "twist"}, {"params", {{"base_measure", base_measure(rng)}, {"cocycle", affine_cocycle(rng)}}}};
    default: {
      const auto m = integer(rng, 2, 6);
      return {{"kind", "group-extension"},
              {"params",
               {{"base", {{"kind", "rotation"}, {"params", {{"angle", text(unit_rational(rng))}}}}},
                {"cocycle", {{"kind", "affine"}, {"slope", "0"}, {"offset", text(ergolab::Rational(integer(rng, 0, m - 1), m))}}},
                {"group", {{"kind", "cyclic"}, {"modulus", m}}}}}};
    }
  }
}

}  // namespace gen
