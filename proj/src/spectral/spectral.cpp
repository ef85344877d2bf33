#include "ergolab/spectral/spectral.hpp"

#include "ergolab/core/errors.hpp"
#include "ergolab/core/parallel.hpp"
#include "ergolab/rank1/rank1.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

namespace ergolab::spectral {
namespace {

constexpr std::size_t kMonteCarloChunks = 64;
constexpr std::size_t kMaxExactSumTerms = 64;

using json = nlohmann::json;

std::complex<double> unit_value(const Rational& phase) {
  const double angle = 2.0 * std::numbers::pi * to_double(frac(phase));
  return {std::cos(angle), std::sin(angle)};
}

// e(n t) for n = 0..count-1; small denominators go through a lookup table.
std::vector<std::complex<double>> phase_powers(const Rational& t, std::int64_t count) {
  std::vector<std::complex<double>> out(static_cast<std::size_t>(count));
  const Rational f = frac(t);
  const BigInt den = boost::multiprecision::denominator(f);
  if (den <= BigInt(1) << 40) {
    const auto q = den.convert_to<std::int64_t>();
    const auto p = boost::multiprecision::numerator(f).convert_to<std::int64_t>();
    std::vector<std::complex<double>> table(static_cast<std::size_t>(q));
    for (std::int64_t r = 0; r < q; ++r) {
      const double angle = 2.0 * std::numbers::pi * static_cast<double>(r) / static_cast<double>(q);
      table[static_cast<std::size_t>(r)] = {std::cos(angle), std::sin(angle)};
    }
    __int128 r = 0;
    for (std::int64_t n = 0; n < count; ++n) {
      out[static_cast<std::size_t>(n)] = table[static_cast<std::size_t>(r)];
      r = (r + p) % q;
    }
    return out;
  }
  Rational phase = 0;
  for (std::int64_t n = 0; n < count; ++n) {
    out[static_cast<std::size_t>(n)] = unit_value(phase);
    phase = frac(phase + f);
  }
  return out;
}

void check_order(std::int64_t N) {
  if (N < 1) throw ValidationError("N", "order must be >= 1, got " + std::to_string(N));
}

std::optional<CorrelationSeq> exact_character_sequence(const System& system, const Frequency& k,
                                                       const CorrelationOptions& options) {
  const Measure& mu = system.measure;
  if (!mu.exact()) return std::nullopt;
  const auto& components = mu.components();
  std::vector<SymbolicPoint> current;
  std::vector<AffineForm> base_phase;
  for (const auto& c : components) {
    current.push_back(c.point);
    base_phase.push_back(phase_form(k, c.point));
  }

  std::vector<ExactComplex> exact;
  exact.reserve(static_cast<std::size_t>(options.N) + 1);
  for (std::int64_t n = 0; n <= options.N; ++n) {
    ExactComplex value;
    for (std::size_t i = 0; i < components.size(); ++i) {
      if (n > 0) {
        auto next = system.map->apply_inverse_symbolic(current[i]);
        if (!next) return std::nullopt;
        current[i] = std::move(*next);
      }
      AffineForm form = phase_form(k, current[i]);
      form -= base_phase[i];
      auto part = integrate_phase(components[i], form);
      if (!part) return std::nullopt;
      value += *part;
    }
    exact.push_back(std::move(value));
  }

  CorrelationSeq out;
  out.observable = Character{k};
  out.N = options.N;
  out.method = Method::Exact;
  if (options.center) {
    auto mean = mu.integrate_exact(k);
    if (!mean) return std::nullopt;
    const ExactComplex square = mean->norm();
    out.mean_square = square.value();
    out.centered = true;
    for (auto& v : exact) v -= square;
  }
  out.values.reserve(exact.size());
  for (const auto& v : exact) out.values.push_back(v.value());
  // values(0) is a squared norm; drop rounding noise in its imaginary part.
  out.values[0] = {out.values[0].real(), 0.0};
  out.exact = std::move(exact);
  return out;
}

CorrelationSeq sampled_character_sequence(const System& system, const Frequency& k,
                                          const CorrelationOptions& options) {
  if (options.mc.samples < 2) throw ValidationError("samples", "Monte Carlo needs at least two samples");
  const std::size_t N = static_cast<std::size_t>(options.N);
  const std::size_t chunks = std::min(kMonteCarloChunks, options.mc.samples);

  struct Partial {
    std::vector<std::complex<double>> sum;
    std::vector<double> sum_sq;
    std::complex<double> mean_sum{0, 0};
  };
  std::vector<Partial> partials(chunks);
  parallel_for(chunks, [&](std::size_t chunk) {
    Partial& part = partials[chunk];
    part.sum.assign(N + 1, {0, 0});
    part.sum_sq.assign(N + 1, 0.0);
    const std::size_t begin = options.mc.samples * chunk / chunks;
    const std::size_t end = options.mc.samples * (chunk + 1) / chunks;
    Rng rng(derive_seed(options.mc.seed, chunk));
    for (std::size_t s = begin; s < end; ++s) {
      Point x = system.measure.sample(rng);
      const std::complex<double> f0 = character_value(k, x);
      part.mean_sum += f0;
      for (std::size_t n = 0; n <= N; ++n) {
        if (n > 0) {
          try {
            x = system.apply_inverse(x);
          } catch (const DepthExceeded& e) {
            throw Unsupported(std::string("character correlations need T^{-n} on all of the space: ") + e.what() +
                              "; use level-indicator observables");
          }
        }
        const std::complex<double> z = character_value(k, x) * std::conj(f0);
        part.sum[n] += z;
        part.sum_sq[n] += std::norm(z);
      }
    }
  });

  std::vector<std::complex<double>> sum(N + 1, {0, 0});
  std::vector<double> sum_sq(N + 1, 0.0);
  std::complex<double> mean_sum{0, 0};
  for (const auto& part : partials) {
    for (std::size_t n = 0; n <= N; ++n) {
      sum[n] += part.sum[n];
      sum_sq[n] += part.sum_sq[n];
    }
    mean_sum += part.mean_sum;
  }

  const double m = static_cast<double>(options.mc.samples);
  CorrelationSeq out;
  out.observable = Character{k};
  out.N = options.N;
  out.method = Method::MonteCarlo;
  out.samples = options.mc.samples;
  out.values.resize(N + 1);
  out.std_errors.resize(N + 1);
  for (std::size_t n = 0; n <= N; ++n) {
    const std::complex<double> mean = sum[n] / m;
    const double variance = std::max(0.0, (sum_sq[n] - m * std::norm(mean)) / (m - 1));
    out.values[n] = mean;
    out.std_errors[n] = std::sqrt(variance / m);
  }
  if (options.center) {
    out.centered = true;
    out.mean_square = std::norm(mean_sum / m);
    for (auto& v : out.values) v -= out.mean_square;
  }
  return out;
}

CorrelationSeq level_sequence(const System& system, const LevelIndicator& level, const CorrelationOptions& options) {
  const auto* t = dynamic_cast<const rank1::Rank1Transformation*>(system.map.get());
  if (t == nullptr) {
    throw ValidationError("observable", "level indicators need a rank-1 system, got " + system.map->describe());
  }
  const auto& tower = t->tower();
  const auto counts = rank1::level_overlap_counts(tower, level.stage, level.level, options.N);
  const Rational L(tower.levels());
  const Rational mean = Rational(counts[0]) / L;

  CorrelationSeq out;
  out.observable = level;
  out.N = options.N;
  out.method = Method::Rank1Level;
  out.approximation_slope = 1.0 / static_cast<double>(tower.levels());
  std::vector<ExactComplex> exact;
  exact.reserve(counts.size());
  const Rational shift = options.center ? mean * mean : Rational(0);
  for (auto c : counts) exact.emplace_back(Rational(c) / L - shift);
  if (options.center) {
    out.centered = true;
    out.mean_square = to_double(mean * mean);
  }
  for (const auto& v : exact) out.values.push_back(v.value());
  out.exact = std::move(exact);
  return out;
}

std::vector<Rational> atom_grid(int max_denominator, const std::vector<Rational>& candidates) {
  std::set<Rational> grid;
  for (int q = 1; q <= max_denominator; ++q) {
    for (int p = 0; p < q; ++p) grid.insert(Rational(p, q));
  }
  for (const auto& c : candidates) grid.insert(frac(c));
  return {grid.begin(), grid.end()};
}

json complex_pair(const std::complex<double>& z) { return json::array({z.real(), z.imag()}); }

json optional_rational(const std::optional<Rational>& r) {
  return r ? json(format_rational(*r)) : json(nullptr);
}

}  // namespace

std::string describe(const Observable& f) {
  if (const auto* c = std::get_if<Character>(&f)) {
    std::string s = "e(";
    for (std::size_t i = 0; i < c->k.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(c->k[i]);
    }
    return s + ")";
  }
  const auto& l = std::get<LevelIndicator>(f);
  return "1[stage " + std::to_string(l.stage) + " level " + std::to_string(l.level) + "]";
}

json observable_to_json(const Observable& f) {
  if (const auto* c = std::get_if<Character>(&f)) return {{"character", c->k}};
  const auto& l = std::get<LevelIndicator>(f);
  return {{"level", {{"stage", l.stage}, {"index", l.level}}}};
}

Observable observable_from_json(const json& doc) {
  if (!doc.is_object()) throw ValidationError("observable", "expected {\"character\": [...]} or {\"level\": {...}}");
  if (doc.contains("character")) {
    const auto& k = doc.at("character");
    if (!k.is_array() || k.empty()) throw ValidationError("observable.character", "expected a non-empty integer list");
    Frequency freq;
    for (const auto& v : k) {
      if (!v.is_number_integer()) throw ValidationError("observable.character", "frequencies must be integers");
      freq.push_back(v.get<std::int64_t>());
    }
    return Character{freq};
  }
  if (doc.contains("level")) {
    const auto& l = doc.at("level");
    if (!l.is_object() || !l.contains("stage") || !l.contains("index")) {
      throw ValidationError("observable.level", "expected {\"stage\": k, \"index\": j}");
    }
    return LevelIndicator{l.at("stage").get<int>(), l.at("index").get<std::int64_t>()};
  }
  throw ValidationError("observable", "expected a \"character\" or \"level\" key");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::Exact:
      return "exact";
    case Method::Rank1Level:
      return "rank1-level";
    case Method::MonteCarlo:
      return "monte-carlo";
  }
  return "unknown";
}

std::complex<double> CorrelationSeq::at(std::int64_t n) const {
  if (n > N || n < -N) throw std::out_of_range("lag " + std::to_string(n) + " outside [-N, N]");
  const auto v = values[static_cast<std::size_t>(n < 0 ? -n : n)];
  return n < 0 ? std::conj(v) : v;
}

std::optional<ExactComplex> CorrelationSeq::exact_at(std::int64_t n) const {
  if (!exact) return std::nullopt;
  if (n > N || n < -N) throw std::out_of_range("lag " + std::to_string(n) + " outside [-N, N]");
  const auto& v = (*exact)[static_cast<std::size_t>(n < 0 ? -n : n)];
  return n < 0 ? v.conj() : v;
}

CorrelationSeq correlation_sequence(const System& system, const Observable& f, const CorrelationOptions& options) {
  check_order(options.N);
  if (const auto* level = std::get_if<LevelIndicator>(&f)) return level_sequence(system, *level, options);
  const auto& k = std::get<Character>(f).k;
  if (k.size() != system.arity()) {
    throw ValidationError("observable", "character arity " + std::to_string(k.size()) + " but the system has " +
                                            std::to_string(system.arity()) + " coordinates");
  }
  if (system.exact_integrals) {
    if (auto exact = exact_character_sequence(system, k, options)) return std::move(*exact);
  }
  if (system.measure.symbolic() && system.measure.components().empty()) {
    throw Unsupported("system has neither exact integrals nor a sampler");
  }
  return sampled_character_sequence(system, k, options);
}

double toeplitz_min_eigenvalue(const CorrelationSeq& c, std::size_t size) {
  if (size == 0) throw ValidationError("size", "Toeplitz size must be >= 1");
  if (static_cast<std::int64_t>(size) - 1 > c.N) {
    throw ValidationError("size", "Toeplitz size " + std::to_string(size) + " needs N >= " + std::to_string(size - 1));
  }
  const auto n = static_cast<Eigen::Index>(size);
  Eigen::MatrixXcd m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) m(i, j) = c.at(i - j);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

EigenvalueMass eigenvalue_mass(const CorrelationSeq& c, const Rational& angle, std::int64_t N) {
  if (N == 0) N = c.N;
  if (N < 1 || N > c.N) throw ValidationError("N", "order must lie in [1, " + std::to_string(c.N) + "]");
  const auto powers = phase_powers(angle, N);
  std::complex<double> sum{0, 0};
  for (std::int64_t n = 0; n < N; ++n) sum += c.values[static_cast<std::size_t>(n)] * powers[static_cast<std::size_t>(n)];
  EigenvalueMass out;
  out.mass = std::abs(sum) / static_cast<double>(N);

  if (c.exact) {
    ExactComplex exact_sum;
    bool ok = true;
    const Rational t = frac(angle);
    for (std::int64_t n = 0; n < N && ok; ++n) {
      exact_sum += (*c.exact)[static_cast<std::size_t>(n)] * ExactComplex::unit(t * n);
      ok = exact_sum.term_count() <= kMaxExactSumTerms;
    }
    if (ok) {
      if (auto sq = exact_sum.norm().as_rational()) {
        out.exact_mass_squared = *sq / (Rational(N) * N);
        out.mass = std::sqrt(to_double(*out.exact_mass_squared));
      }
    }
  }
  return out;
}

AtomReport wiener_atomic_mass(const CorrelationSeq& c, const AtomOptions& options) {
  if (c.N < 16) throw ValidationError("N", "Wiener averages need N >= 16, got " + std::to_string(c.N));
  AtomReport out;
  out.N = c.N;
  out.grid_denominator = options.grid_denominator;
  out.atom_floor = options.atom_floor;

  const double v0 = c.values[0].real();
  const double scale = options.normalize ? (v0 > 0 ? 1.0 / (v0 * v0) : 0.0) : 1.0;

  std::vector<double> prefix(static_cast<std::size_t>(c.N) + 1, 0.0);
  for (std::int64_t i = 0; i < c.N; ++i) {
    prefix[static_cast<std::size_t>(i) + 1] = prefix[static_cast<std::size_t>(i)] + std::norm(c.values[static_cast<std::size_t>(i)]);
  }
  for (std::int64_t n : {c.N / 4, c.N / 2, c.N}) {
    out.trace.emplace_back(n, scale * prefix[static_cast<std::size_t>(n)] / static_cast<double>(n));
  }
  out.total_mass = out.trace.back().second;

  if (c.exact) {
    Rational sum = 0;
    bool ok = true;
    for (std::int64_t i = 0; i < c.N && ok; ++i) {
      auto sq = (*c.exact)[static_cast<std::size_t>(i)].norm().as_rational();
      if (sq) {
        sum += *sq;
      } else {
        ok = false;
      }
    }
    if (ok) {
      Rational total = sum / c.N;
      if (options.normalize) {
        auto r0 = (*c.exact)[0].as_rational();
        if (r0 && *r0 != 0) {
          total /= (*r0 * *r0);
        } else if (r0) {
          total = 0;
        } else {
          ok = false;
        }
      }
      if (ok) {
        out.exact_total_mass = total;
        out.total_mass = to_double(total);
      }
    }
  }

  const auto grid = atom_grid(options.grid_denominator, options.candidates);
  std::vector<double> masses(grid.size(), 0.0);
  const double atom_scale = options.normalize ? (v0 > 0 ? 1.0 / v0 : 0.0) : 1.0;
  parallel_for(grid.size(), [&](std::size_t i) {
    const auto powers = phase_powers(grid[i], c.N);
    std::complex<double> sum{0, 0};
    for (std::int64_t n = 0; n < c.N; ++n) sum += c.values[static_cast<std::size_t>(n)] * powers[static_cast<std::size_t>(n)];
    masses[i] = atom_scale * std::abs(sum) / static_cast<double>(c.N);
  });
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (masses[i] >= options.atom_floor) out.atoms.push_back({grid[i], masses[i]});
  }
  std::stable_sort(out.atoms.begin(), out.atoms.end(),
                   [](const DetectedAtom& a, const DetectedAtom& b) { return a.mass > b.mass; });
  return out;
}

EigenvalueVerdict detect_eigenvalue(const System& system, const Observable& f, const Rational& angle, std::int64_t N,
                                    double threshold, const MonteCarloOptions& mc) {
  if (N < 16) throw ValidationError("N", "eigenvalue detection needs N >= 16, got " + std::to_string(N));
  const auto c = correlation_sequence(system, f, {N, false, mc});
  const auto m = eigenvalue_mass(c, angle);
  EigenvalueVerdict out;
  out.observable = f;
  out.angle = frac(angle);
  out.N = N;
  out.mass = m.mass;
  out.exact_mass_squared = m.exact_mass_squared;
  out.threshold = threshold;
  out.witnessed = m.mass > threshold;
  out.method = c.method;
  return out;
}

WeakMixingReport weak_mixing_test(const System& system, const std::vector<Observable>& family, std::int64_t N,
                                  double threshold, const MonteCarloOptions& mc) {
  if (family.empty()) throw ValidationError("family", "weak-mixing test needs at least one observable");
  WeakMixingReport out;
  out.N = N;
  out.threshold = threshold;
  out.entries.resize(family.size());
  for (std::size_t i = 0; i < family.size(); ++i) {
    MonteCarloOptions local = mc;
    local.seed = derive_seed(mc.seed, i);
    const auto c = correlation_sequence(system, family[i], {N, true, local});
    AtomOptions atoms;
    atoms.normalize = true;
    atoms.grid_denominator = 1;
    const auto report = wiener_atomic_mass(c, atoms);
    out.entries[i] = {family[i], report.total_mass, report.total_mass >= threshold, c.method};
  }
  const bool any = std::any_of(out.entries.begin(), out.entries.end(), [](const auto& e) { return e.atoms_detected; });
  out.verdict = any ? "atoms-detected" : "no-atoms-detected";
  return out;
}

FiberScan fiber_eigenvalue_scan(const FiberedSystem& fs, const Observable& f, const Rational& angle,
                                const FiberScanOptions& options) {
  if (options.samples == 0) throw ValidationError("samples", "fiber scan needs at least one sample");
  FiberScan out;
  out.angle = frac(angle);
  const auto bases = fs.base_measure().sample(options.seed, options.samples);

  std::vector<int> witnessed(bases.size(), 0);
  std::vector<std::string> errors(bases.size());
  parallel_for(bases.size(), [&](std::size_t i) {
    try {
      const System fiber = fs.fiber(bases[i]);
      MonteCarloOptions mc;
      mc.seed = derive_seed(options.seed, i + 1);
      witnessed[i] = detect_eigenvalue(fiber, f, angle, options.N, options.threshold, mc).witnessed ? 1 : 0;
    } catch (const std::exception& e) {
      errors[i] = "fiber at " + format_point(bases[i]) + ": " + e.what();
      witnessed[i] = -1;
    }
  });
  for (std::size_t i = 0; i < bases.size(); ++i) {
    if (witnessed[i] < 0) {
      ++out.failures;
      out.warnings.push_back(errors[i]);
    } else {
      ++out.sampled;
      out.witnessed += static_cast<std::size_t>(witnessed[i]);
    }
  }
  out.witness_fraction = out.sampled ? static_cast<double>(out.witnessed) / static_cast<double>(out.sampled) : 0.0;

  const auto* c = std::get_if<Character>(&f);
  if (c == nullptr) {
    out.flat_note = "level indicators do not lift to the flat system; flat check skipped";
    return out;
  }
  Frequency lifted(fs.base_arity(), 0);
  lifted.insert(lifted.end(), c->k.begin(), c->k.end());
  const System& flat = fs.flat();
  if (!flat.exact_integrals && options.flat_samples == 0) {
    out.flat_note = "flat system has no exact integrals and flat_samples is 0; flat check skipped";
    return out;
  }
  MonteCarloOptions mc;
  mc.seed = derive_seed(options.seed, std::string_view("flat"));
  mc.samples = options.flat_samples;
  out.flat = detect_eigenvalue(flat, Character{lifted}, angle, options.N, options.threshold, mc);
  out.flat_note = out.flat->witnessed ? "flat system witnesses the eigenvalue" : "flat system does not witness it";
  return out;
}

json to_json(const CorrelationSeq& c) {
  json values = json::array();
  for (const auto& v : c.values) values.push_back(complex_pair(v));
  json doc{{"observable", observable_to_json(c.observable)},
           {"centered", c.centered},
           {"N", c.N},
           {"method", to_string(c.method)},
           {"values", std::move(values)},
           {"mean_square", complex_pair(c.mean_square)}};
  if (c.exact) {
    json exact = json::array();
    for (const auto& v : *c.exact) exact.push_back(v.to_string());
    doc["exact"] = std::move(exact);
  }
  if (!c.std_errors.empty()) {
    doc["std_errors"] = c.std_errors;
    doc["samples"] = c.samples;
  }
  if (c.method == Method::Rank1Level) doc["approximation_slope"] = c.approximation_slope;
  return doc;
}

std::string to_csv(const CorrelationSeq& c) {
  std::string out = "n,re,im\n";
  for (std::int64_t n = -c.N; n <= c.N; ++n) {
    const auto v = c.at(n);
    out += std::to_string(n) + "," + json(v.real()).dump() + "," + json(v.imag()).dump() + "\n";
  }
  return out;
}

json to_json(const AtomReport& r) {
  json trace = json::array();
  for (const auto& [n, m] : r.trace) trace.push_back({{"N", n}, {"mass", m}});
  json atoms = json::array();
  for (const auto& a : r.atoms) {
    atoms.push_back({{"eigenvalue_angle", format_rational(a.eigenvalue_angle)},
                     {"atom_angle", format_rational(frac(-a.eigenvalue_angle))},
                     {"mass", a.mass}});
  }
  return {{"N", r.N},
          {"total_atomic_mass", r.total_mass},
          {"exact_total_atomic_mass", optional_rational(r.exact_total_mass)},
          {"trace", std::move(trace)},
          {"atoms", std::move(atoms)},
          {"grid_denominator", r.grid_denominator},
          {"atom_floor", r.atom_floor}};
}

json to_json(const EigenvalueVerdict& v) {
  return {{"observable", observable_to_json(v.observable)},
          {"angle", format_rational(v.angle)},
          {"N", v.N},
          {"mass", v.mass},
          {"exact_mass_squared", optional_rational(v.exact_mass_squared)},
          {"threshold", v.threshold},
          {"verdict", v.witnessed ? "eigenvalue-witnessed" : "not-witnessed"},
          {"method", to_string(v.method)}};
}

json to_json(const WeakMixingReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"observable", observable_to_json(e.observable)},
                       {"mass", e.mass},
                       {"atoms_detected", e.atoms_detected},
                       {"method", to_string(e.method)}});
  }
  return {{"N", r.N},
          {"threshold", r.threshold},
          {"entries", std::move(entries)},
          {"verdict", r.verdict},
          {"disclaimer", r.disclaimer}};
}

json to_json(const FiberScan& s) {
  return {{"angle", format_rational(s.angle)},
          {"sampled", s.sampled},
          {"witnessed", s.witnessed},
          {"failures", s.failures},
          {"warnings", s.warnings},
          {"witness_fraction", s.witness_fraction},
          {"flat", s.flat ? to_json(*s.flat) : json(nullptr)},
          {"flat_note", s.flat_note}};
}

}  // namespace ergolab::spectral
