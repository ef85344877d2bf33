#pragma once

#include "ergolab/core/system.hpp"

#include <json.hpp>

#include <complex>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

/// Correlation sequences and their spectral read-outs.
///
/// Conventions:
///  - values(n) = <f o T^{-n}, f> = integral of f(T^{-n} x) conj(f(x)) dmu;
///  - for a rotation by t and f = e(x) this is e(-n t), so the spectral
///    measure (coefficients integral of z^n) has its atom at e(-t);
///  - eigenvalues are angles t of the Koopman eigenvalue e(t), f o T = e(t) f.
///    The mass at t is (1/N) |sum_{n<N} values(n) e(n t)|, which tends to
///    the spectral mass of the atom at e(-t).
namespace ergolab::spectral {

inline constexpr std::int64_t kDefaultOrder = 4096;
inline constexpr double kEigenvalueThreshold = 0.5;
inline constexpr double kWeakMixingThreshold = 0.05;
inline constexpr int kAtomGridDenominator = 64;

inline const std::string kWeakMixingDisclaimer =
    "no atoms detected among tested observables (finite family, finite N; this never certifies weak mixing)";

struct Character {
  Frequency k;
};

/// Indicator of level `level` of the stage-`stage` tower of a rank-1 system.
struct LevelIndicator {
  int stage = 0;
  std::int64_t level = 0;
};

using Observable = std::variant<Character, LevelIndicator>;

std::string describe(const Observable& f);
nlohmann::json observable_to_json(const Observable& f);
/// {"character": [k...]} or {"level": {"stage": k, "index": j}}.
Observable observable_from_json(const nlohmann::json& doc);

struct CorrelationOptions {
  std::int64_t N = kDefaultOrder;
  bool center = false;
  /// Used only when no exact path exists.
  MonteCarloOptions mc{};
};

enum class Method { Exact, Rank1Level, MonteCarlo };
std::string to_string(Method m);

struct CorrelationSeq {
  Observable observable;
  bool centered = false;
  std::int64_t N = 0;
  Method method = Method::Exact;
  /// values[n] for n = 0..N.
  std::vector<std::complex<double>> values;
  /// Present for Exact and Rank1Level.
  std::optional<std::vector<ExactComplex>> exact;
  /// Per-entry standard error; empty unless sampled.
  std::vector<double> std_errors;
  std::size_t samples = 0;
  /// Rank1Level: values are those of the stage-d tower, within n / L_d of
  /// the limit system at lag n.
  double approximation_slope = 0.0;
  /// |integral f|^2, subtracted when centered.
  std::complex<double> mean_square{0.0, 0.0};

  bool is_exact() const noexcept { return exact.has_value(); }
  /// Any n in [-N, N]; negative lags use conjugates.
  std::complex<double> at(std::int64_t n) const;
  std::optional<ExactComplex> exact_at(std::int64_t n) const;
};

/// Throws Unsupported when neither an exact path nor a sampler exists.
CorrelationSeq correlation_sequence(const System& system, const Observable& f, const CorrelationOptions& options);

/// Smallest eigenvalue of the Hermitian Toeplitz matrix [values(i - j)].
double toeplitz_min_eigenvalue(const CorrelationSeq& c, std::size_t size = 64);

struct DetectedAtom {
  /// Koopman eigenvalue angle t; the spectral atom sits at e(-t).
  Rational eigenvalue_angle;
  double mass = 0.0;
};

struct AtomReport {
  std::int64_t N = 0;
  double total_mass = 0.0;
  std::optional<Rational> exact_total_mass;
  /// (prefix length, average) for N/4, N/2, N.
  std::vector<std::pair<std::int64_t, double>> trace;
  std::vector<DetectedAtom> atoms;
  int grid_denominator = kAtomGridDenominator;
  double atom_floor = 0.0;
};

struct AtomOptions {
  int grid_denominator = kAtomGridDenominator;
  std::vector<Rational> candidates;
  /// Atoms below this mass are not listed.
  double atom_floor = 0.05;
  /// Divide by values(0)^2 so that the mass lies in [0, 1] for any f.
  bool normalize = false;
};

/// (1/N) sum_{i<N} |values(i)|^2, with N >= 16.
AtomReport wiener_atomic_mass(const CorrelationSeq& c, const AtomOptions& options = {});

struct EigenvalueMass {
  double mass = 0.0;
  /// mass^2 as an exact rational when the sum collapses to few terms.
  std::optional<Rational> exact_mass_squared;
};

/// (1/N) |sum_{n<N} values(n) e(n t)| for N <= c.N.
EigenvalueMass eigenvalue_mass(const CorrelationSeq& c, const Rational& angle, std::int64_t N = 0);

struct EigenvalueVerdict {
  Observable observable;
  Rational angle;
  std::int64_t N = 0;
  double mass = 0.0;
  std::optional<Rational> exact_mass_squared;
  double threshold = kEigenvalueThreshold;
  bool witnessed = false;
  Method method = Method::Exact;
};

EigenvalueVerdict detect_eigenvalue(const System& system, const Observable& f, const Rational& angle,
                                    std::int64_t N = kDefaultOrder, double threshold = kEigenvalueThreshold,
                                    const MonteCarloOptions& mc = {});

struct WeakMixingEntry {
  Observable observable;
  double mass = 0.0;
  bool atoms_detected = false;
  Method method = Method::Exact;
};

struct WeakMixingReport {
  std::vector<WeakMixingEntry> entries;
  std::int64_t N = 0;
  double threshold = kWeakMixingThreshold;
  /// "no-atoms-detected" or "atoms-detected".
  std::string verdict;
  std::string disclaimer = kWeakMixingDisclaimer;
};

/// Centered, normalized Wiener mass per observable.
WeakMixingReport weak_mixing_test(const System& system, const std::vector<Observable>& family,
                                  std::int64_t N = kDefaultOrder, double threshold = kWeakMixingThreshold,
                                  const MonteCarloOptions& mc = {});

struct FiberScanOptions {
  std::size_t samples = 64;
  std::int64_t N = kDefaultOrder;
  double threshold = kEigenvalueThreshold;
  std::uint64_t seed = 0;
  /// Sampled flat verdicts use this many points; 0 skips the flat check
  /// when it is not exact.
  std::size_t flat_samples = 0;
};

struct FiberScan {
  Rational angle;
  std::size_t sampled = 0;
  std::size_t witnessed = 0;
  std::size_t failures = 0;
  std::vector<std::string> warnings;
  double witness_fraction = 0.0;
  std::optional<EigenvalueVerdict> flat;
  std::string flat_note;
};

/// Detects e(angle) on sampled fibers with observable f and on the flat
/// system with f lifted by zero frequencies on the base coordinates.
FiberScan fiber_eigenvalue_scan(const FiberedSystem& fs, const Observable& f, const Rational& angle,
                                const FiberScanOptions& options = {});

nlohmann::json to_json(const CorrelationSeq& c);
/// "n,re,im" rows for n = -N..N, header first.
std::string to_csv(const CorrelationSeq& c);
nlohmann::json to_json(const AtomReport& r);
nlohmann::json to_json(const EigenvalueVerdict& v);
nlohmann::json to_json(const WeakMixingReport& r);
nlohmann::json to_json(const FiberScan& s);

}  // namespace ergolab::spectral
