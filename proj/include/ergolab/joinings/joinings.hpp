#pragma once

#include "ergolab/core/system.hpp"
#include "ergolab/spectral/spectral.hpp"

#include <json.hpp>

#include <complex>
#include <optional>
#include <string>
#include <vector>

/// Joinings as measures on a product space, realized as a sampler and,
/// where possible, an exact character integrator.
///
/// JSON form: {"kind": ..., "systems": [SystemSpec...], "params": {...},
/// "precision": <int, optional>}. Kinds and their params:
///
///   product         systems (>= 1)
///   diagonal        one system; (x, x)
///   graph           one system; map (SystemSpec whose map is R)   (x, R x)
///   off-diagonal    one system; power n                           (x, T^n x)
///   rel-indep       two systems; factors [[i...], [j...]] coordinate indices,
///                   base "product" | "diagonal"
///   example1-triple alpha, cocycle (default beta = id), base_measure (default
///                   Haar); systems are derived: T(x, y) = (x, y + beta(x)) and
///                   R(x', z) = (x', z + beta(x') + alpha), joined along x = x'
///   custom-sampler  systems; measure (sampled only, full arity)
namespace ergolab::joinings {

struct JoiningSpec {
  std::string kind;
  std::vector<SystemSpec> systems;
  nlohmann::json params = nlohmann::json::object();
  std::optional<int> precision;

  static JoiningSpec from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;
};

struct Joining {
  JoiningSpec spec;
  /// The joined systems; component i owns coordinates
  /// [offsets[i], offsets[i] + components[i].arity()).
  std::vector<System> components;
  std::vector<std::size_t> offsets;
  /// The product map on the joint space with the joining measure.
  System joint;
  std::vector<std::string> notes;

  std::size_t arity() const { return joint.arity(); }
  bool exact() const noexcept { return joint.exact_integrals; }
  std::optional<ExactComplex> integrate_exact(const Frequency& k) const { return joint.measure.integrate_exact(k); }
  /// Block of k belonging to component i.
  Frequency block(const Frequency& k, std::size_t i) const;
};

/// Throws ValidationError naming the offending field; graph maps that fail
/// preservation or commutation report the violating character.
Joining build_joining(const JoiningSpec& spec);

/// Joins systems under an arbitrary sampler on the product space.
Joining make_custom_joining(std::vector<System> systems, Measure::Sampler sampler, std::string description);

/// The product joining of the same component systems.
Joining product_of_components(const Joining& j);

std::vector<Point> sample_joining(const Joining& j, std::uint64_t seed, std::size_t count);

/// Statistical sampling knobs; every sampled verdict uses 4 standard errors.
struct SamplingOptions {
  std::uint64_t seed = 0;
  std::size_t samples = 100000;
  double sigmas = 4.0;
  /// Take the statistical path even when exact integrals exist.
  bool sampled_only = false;
};

struct CharacterCheck {
  Frequency k;
  std::complex<double> expected;
  std::complex<double> observed;
  std::optional<ExactComplex> exact_expected;
  std::optional<ExactComplex> exact_observed;
  double std_error = 0.0;
  bool pass = true;
};

struct CheckReport {
  std::string name;
  bool exact = false;
  std::size_t samples = 0;
  std::vector<CharacterCheck> rows;
  bool pass = true;
  std::optional<Frequency> first_failure;
};

/// integral of chi_k o (T x S) against integral of chi_k.
CheckReport invariance_check(const Joining& j, const std::vector<Frequency>& family, const SamplingOptions& opt = {});

/// Characters supported on one component, |k| <= bound: joint integral
/// against the component's own.
CheckReport marginal_check(const Joining& j, std::int64_t bound, const SamplingOptions& opt = {});

/// When chi_k o P = e(c) chi_k holds identically on the support, returns c.
std::optional<Rational> eigencharacter_phase(const Joining& j, const Frequency& k);

inline const std::string kOneSidedNote =
    "one-sided: refutes product structure of this joining only, never certifies disjointness";

struct ConsistencyReport {
  std::int64_t degree = 0;
  bool exact = false;
  std::size_t samples = 0;
  std::size_t characters = 0;
  /// "consistent-with-product" or "refuted".
  std::string verdict;
  std::optional<Frequency> witness;
  std::vector<CharacterCheck> rows;
  double max_z = 0.0;
  std::string note = kOneSidedNote;

  bool consistent() const { return !witness.has_value(); }
};

/// Compares integral of f1 (x) ... (x) fm against the product of marginal
/// integrals for every block-wise character with |k| <= degree. Exact when
/// the joining is exact, otherwise 4 sigma on `opt.samples` points.
ConsistencyReport product_consistency_test(const Joining& j, std::int64_t degree, const SamplingOptions& opt = {});

/// The spectral refutation: an eigenvalue of the joint system seen by a
/// character whose product-joining spectral measure has no atom there.
struct EigenvalueRefutation {
  spectral::EigenvalueVerdict joint;
  spectral::EigenvalueVerdict product;
  bool refuted = false;
  double product_bound = 0.0;
};

EigenvalueRefutation eigenvalue_refutation(const Joining& j, const Frequency& k, const Rational& angle,
                                           std::int64_t N = spectral::kDefaultOrder,
                                           double threshold = spectral::kEigenvalueThreshold);

nlohmann::json frequency_json(const Frequency& k);
nlohmann::json to_json(const CheckReport& r);
nlohmann::json to_json(const ConsistencyReport& r);
nlohmann::json to_json(const EigenvalueRefutation& r);
/// "character,joint_re,joint_im,product_re,product_im,sigma,pass" rows.
std::string to_csv(const ConsistencyReport& r);

}  // namespace ergolab::joinings
