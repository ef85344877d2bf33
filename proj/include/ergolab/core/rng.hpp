#pragma once

#include "ergolab/core/rational.hpp"

#include <cstdint>
#include <random>
#include <string_view>

namespace ergolab {

/// The engine behind every sampler. mt19937_64 output is fixed by the
/// standard, so streams are reproducible across platforms; the helpers
/// below avoid the implementation-defined std distributions for the same
/// reason.
using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Seed for a sub-task, e.g. per worker or per check id.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

/// Uniform dyadic rational k / 2^64 in [0, 1).
Rational uniform_rational(Rng& rng);

double uniform_double(Rng& rng);

/// Uniform integer in [0, bound).
std::uint64_t uniform_index(Rng& rng, std::uint64_t bound);

}  // namespace ergolab
