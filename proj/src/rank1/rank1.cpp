#include "ergolab/rank1/rank1.hpp"

#include "ergolab/core/errors.hpp"

#include <bit>
#include <map>
#include <mutex>
#include <sstream>

namespace ergolab::rank1 {
namespace {

// Offsets of the three copies of B_n inside B_{n+1}.
std::array<std::int64_t, 3> block_offsets(std::int64_t length, std::uint8_t digit) {
  if (digit == 0) return {0, length + 1, 2 * length + 1};
  return {0, length, 2 * length + 1};
}

void check_stage(int n) {
  if (n < 0) throw ValidationError("stage", "stage must be >= 0");
}

}  // namespace

Rank1Spec Rank1Spec::from_rational(const Rational& a, int depth) {
  if (a < 0 || a > 1) throw ValidationError("a", "parameter must lie in [0, 1]");
  if (depth < 0) throw ValidationError("depth", "depth must be >= 0");
  return Rank1Spec{a, depth};
}

Rank1Spec Rank1Spec::from_digits(std::vector<std::uint8_t> digits, int depth) {
  for (auto d : digits) {
    if (d > 1) throw ValidationError("digits", "digits must be 0 or 1");
  }
  if (depth < 0) throw ValidationError("depth", "depth must be >= 0");
  if (static_cast<std::size_t>(depth) > digits.size()) {
    throw ValidationError("depth", "depth " + std::to_string(depth) + " exceeds the " + std::to_string(digits.size()) +
                                       " declared digits");
  }
  return Rank1Spec{std::move(digits), depth};
}

std::uint8_t Rank1Spec::digit(int n) const {
  if (n < 1) throw ValidationError("digit", "digits are indexed from 1");
  if (is_rational()) return binary_digits(rational(), n).back();
  const auto& ds = std::get<std::vector<std::uint8_t>>(parameter);
  if (static_cast<std::size_t>(n) > ds.size()) {
    throw DepthExceeded("digit " + std::to_string(n) + " beyond the " + std::to_string(ds.size()) + " declared digits");
  }
  return ds[static_cast<std::size_t>(n - 1)];
}

std::vector<std::uint8_t> Rank1Spec::digits(int count) const {
  if (is_rational()) return binary_digits(rational(), count);
  const auto& ds = std::get<std::vector<std::uint8_t>>(parameter);
  if (static_cast<std::size_t>(count) > ds.size()) {
    throw DepthExceeded("requested " + std::to_string(count) + " digits, only " + std::to_string(ds.size()) +
                        " declared");
  }
  return {ds.begin(), ds.begin() + count};
}

std::string Rank1Spec::describe() const {
  if (is_rational()) return "a=" + format_rational(rational());
  std::string s = "a=.";
  for (auto d : std::get<std::vector<std::uint8_t>>(parameter)) s += static_cast<char>('0' + d);
  return s + "...";
}

std::vector<std::uint8_t> binary_digits(const Rational& a, int count) {
  if (a < 0 || a > 1) throw ValidationError("a", "parameter must lie in [0, 1]");
  std::vector<std::uint8_t> out;
  out.reserve(static_cast<std::size_t>(std::max(count, 0)));
  if (a == 1) {
    out.assign(static_cast<std::size_t>(std::max(count, 0)), 1);
    return out;
  }
  Rational x = a;
  for (int i = 0; i < count; ++i) {
    x *= 2;
    if (x >= 1) {
      out.push_back(1);
      x -= 1;
    } else {
      out.push_back(0);
    }
  }
  return out;
}

std::int64_t stage_height(int n) {
  check_stage(n);
  std::int64_t h = 1;
  for (int i = 0; i < n; ++i) h *= 3;
  return h;
}

std::int64_t stage_length(int n) { return (3 * stage_height(n) - 1) / 2; }

TowerStage rank1_word(const Rank1Spec& spec, int n) {
  check_stage(n);
  if (n > spec.depth) {
    throw DepthExceeded("stage " + std::to_string(n) + " exceeds construction depth " + std::to_string(spec.depth));
  }
  std::string word = "T";
  for (int m = 1; m <= n; ++m) {
    const std::string prev = word;
    word = spec.digit(m) == 0 ? prev + "s" + prev + prev : prev + prev + "s" + prev;
  }
  TowerStage stage;
  stage.stage = n;
  stage.length = static_cast<std::int64_t>(word.size());
  stage.height = static_cast<std::int64_t>(std::count(word.begin(), word.end(), 'T'));
  stage.spacers = stage.length - stage.height;
  stage.word = std::move(word);
  return stage;
}

std::string spaced_word(const std::string& word) {
  std::string out;
  for (char c : word) {
    if (!out.empty()) out += ' ';
    out += c;
  }
  return out;
}

Rank1Map::Rank1Map(std::vector<std::uint8_t> digits) : digits_(std::move(digits)) {
  if (digits_.empty()) throw ValidationError("depth", "rank-1 map needs depth >= 1");
  if (depth() > kMaxMapDepth) {
    throw ValidationError("depth", "depth " + std::to_string(depth()) + " exceeds the supported maximum " +
                                       std::to_string(kMaxMapDepth));
  }
  // Cells are in units of 3^{-n} at stage n; the reserve cursor equals L_n.
  level_cell_ = {0};
  std::int32_t cursor = 1;
  for (std::uint8_t digit : digits_) {
    const std::size_t h = level_cell_.size();
    std::vector<std::int32_t> next;
    next.reserve(3 * h + 1);
    auto column = [&](std::int32_t j) {
      for (std::size_t i = 0; i < h; ++i) next.push_back(3 * level_cell_[i] + j);
    };
    const std::int32_t spacer = 3 * cursor;
    column(0);
    if (digit == 0) {
      next.push_back(spacer);
      column(1);
    } else {
      column(1);
      next.push_back(spacer);
    }
    column(2);
    level_cell_ = std::move(next);
    cursor = spacer + 1;
    base_cells_ *= 3;
  }
  cell_level_.assign(level_cell_.size(), -1);
  for (std::size_t i = 0; i < level_cell_.size(); ++i) {
    cell_level_.at(static_cast<std::size_t>(level_cell_[i])) = static_cast<std::int32_t>(i);
  }
}

Piece Rank1Map::piece(std::int64_t index) const {
  if (index < 0 || index >= piece_count()) throw std::out_of_range("piece index");
  const std::int64_t top_cell = level_cell(levels() - 1);
  const std::int64_t cell = index < top_cell ? index : index + 1;
  const std::int64_t level = cell_level(cell);
  const std::int64_t target = level_cell(level + 1);
  const std::int64_t L = levels();
  return Piece{Rational(cell, L), Rational(cell + 1, L), Rational(target - cell, L)};
}

std::int64_t Rank1Map::level_of(const Rational& x) const {
  if (x < 0 || x >= 1) throw ValidationError("point", "rank-1 points lie in [0, 1), got " + format_rational(x));
  const BigInt scaled = boost::multiprecision::numerator(x) * levels() / boost::multiprecision::denominator(x);
  const auto cell = scaled.convert_to<std::int64_t>();
  return cell_level(cell);
}

Rational Rank1Map::apply(const Rational& x) const {
  const std::int64_t level = level_of(x);
  if (level == levels() - 1) {
    throw DepthExceeded("point " + format_rational(x) + " lies on the top level of the stage-" +
                        std::to_string(depth()) + " tower");
  }
  return x + Rational(level_cell(level + 1) - level_cell(level), levels());
}

Rational Rank1Map::apply_inverse(const Rational& x) const {
  const std::int64_t level = level_of(x);
  if (level == 0) {
    throw DepthExceeded("point " + format_rational(x) + " lies on the base level of the stage-" +
                        std::to_string(depth()) + " tower");
  }
  return x + Rational(level_cell(level - 1) - level_cell(level), levels());
}

Rank1Map rank1_map(const Rank1Spec& spec) {
  if (spec.depth < 1) throw ValidationError("depth", "rank-1 map needs depth >= 1");
  return Rank1Map(spec.digits(spec.depth));
}

std::string map_csv(const Rank1Map& map) {
  std::ostringstream out;
  out << "source_lo,source_hi,translation\n";
  for (std::int64_t i = 0; i < map.piece_count(); ++i) {
    const Piece p = map.piece(i);
    out << format_rational(p.lo) << ',' << format_rational(p.hi) << ',' << format_rational(p.translation) << '\n';
  }
  return out.str();
}

std::string to_string(Dichotomy d) {
  return d == Dichotomy::IsomorphicFamily ? "isomorphic-family" : "disjoint-family";
}

Agreement agreement_stage(const Rank1Spec& a, const Rank1Spec& b, int max_stage) {
  Agreement out;
  out.max_stage = max_stage;
  const auto da = a.digits(max_stage);
  const auto db = b.digits(max_stage);
  for (int i = 0; i < max_stage; ++i) {
    if (da[static_cast<std::size_t>(i)] != db[static_cast<std::size_t>(i)]) {
      out.first_difference = i + 1;
      break;
    }
  }
  return out;
}

DichotomyVerdict dyadic_equivalence(const Rank1Spec& a, const Rank1Spec& b) {
  if (!a.is_rational() || !b.is_rational()) {
    const auto& shorter = !a.is_rational() ? a : b;
    const auto& ds = std::get<std::vector<std::uint8_t>>(shorter.parameter);
    int declared = static_cast<int>(ds.size());
    if (!a.is_rational() && !b.is_rational()) {
      declared = std::min(declared, static_cast<int>(std::get<std::vector<std::uint8_t>>(a.parameter).size()));
      declared = std::min(declared, static_cast<int>(std::get<std::vector<std::uint8_t>>(b.parameter).size()));
    }
    const Agreement ag = agreement_stage(a, b, declared);
    std::string detail = ag.first_difference
                             ? "digit streams first differ at digit " + std::to_string(*ag.first_difference)
                             : "digit streams agree through all " + std::to_string(declared) + " declared digits";
    throw UndecidableInput("finite digit streams cannot decide whether |a-b| is dyadic: " + detail);
  }
  const Rational diff = abs(a.rational() - b.rational());
  if (is_dyadic(diff)) {
    return {Dichotomy::IsomorphicFamily, diff,
            "|a-b| = " + format_rational(diff) + " is of the form k/2^l: the towers are isomorphic"};
  }
  return {Dichotomy::DisjointFamily, diff,
          "|a-b| = " + format_rational(diff) + " is not of the form k/2^l: the towers are disjoint"};
}

std::vector<std::int64_t> level_positions(const Rank1Map& map, int stage, std::int64_t level) {
  if (stage < 0 || stage > map.depth()) {
    throw DepthExceeded("stage " + std::to_string(stage) + " outside [0, " + std::to_string(map.depth()) + "]");
  }
  if (level < 0 || level >= stage_length(stage)) {
    throw ValidationError("level", "stage-" + std::to_string(stage) + " levels are 0.." +
                                       std::to_string(stage_length(stage) - 1));
  }
  std::vector<std::int64_t> starts{0};
  for (int m = stage; m < map.depth(); ++m) {
    const auto offsets = block_offsets(stage_length(m), map.digits()[static_cast<std::size_t>(m)]);
    std::vector<std::int64_t> next;
    next.reserve(starts.size() * 3);
    for (auto o : offsets) {
      for (auto s : starts) next.push_back(o + s);
    }
    starts = std::move(next);
  }
  std::sort(starts.begin(), starts.end());
  for (auto& s : starts) s += level;
  return starts;
}

std::vector<std::int64_t> level_overlap_counts(const Rank1Map& map, int stage, std::int64_t level,
                                               std::int64_t max_lag) {
  if (max_lag < 0) throw ValidationError("N", "lag must be >= 0");
  const auto positions = level_positions(map, stage, level);
  const std::size_t L = static_cast<std::size_t>(map.levels());
  const std::size_t words = (L + 63) / 64;
  std::vector<std::uint64_t> bits(words, 0);
  for (auto p : positions) bits[static_cast<std::size_t>(p) / 64] |= 1ULL << (static_cast<std::size_t>(p) % 64);

  std::vector<std::int64_t> counts(static_cast<std::size_t>(max_lag) + 1, 0);
  for (std::int64_t n = 0; n <= max_lag; ++n) {
    // popcount(bits & (bits >> n))
    const std::size_t word_shift = static_cast<std::size_t>(n) / 64;
    const unsigned bit_shift = static_cast<unsigned>(n % 64);
    std::int64_t total = 0;
    for (std::size_t w = 0; w + word_shift < words; ++w) {
      std::uint64_t shifted = bits[w + word_shift] >> bit_shift;
      if (bit_shift != 0 && w + word_shift + 1 < words) shifted |= bits[w + word_shift + 1] << (64 - bit_shift);
      total += std::popcount(bits[w] & shifted);
    }
    counts[static_cast<std::size_t>(n)] = total;
  }
  return counts;
}

Point Rank1Transformation::apply(const Point& p) const {
  if (p.size() != 1) throw ValidationError("point", "rank-1 maps act on one coordinate");
  return {map_->apply(p[0])};
}

Point Rank1Transformation::apply_inverse(const Point& p) const {
  if (p.size() != 1) throw ValidationError("point", "rank-1 maps act on one coordinate");
  return {map_->apply_inverse(p[0])};
}

std::string Rank1Transformation::describe() const {
  std::string digits;
  for (auto d : map_->digits()) digits += static_cast<char>('0' + d);
  return "T_a[depth " + std::to_string(map_->depth()) + ", digits " + digits + "]";
}

System rank1_system(const Rank1Spec& spec) {
  auto map = std::make_shared<const Rank1Map>(rank1_map(spec));
  nlohmann::json params{{"depth", spec.depth}};
  if (spec.is_rational()) {
    params["a"] = format_rational(spec.rational());
  } else {
    std::string s;
    for (auto d : std::get<std::vector<std::uint8_t>>(spec.parameter)) s += static_cast<char>('0' + d);
    params["digits"] = s;
  }
  return make_system(SystemSpec{"rank1-family", params, std::nullopt},
                     std::make_shared<Rank1Transformation>(std::move(map)), Measure::haar());
}

namespace {

// (a, x) -> (a, T_a x); fibers are cached by parameter.
class FiberedRank1Map final : public Transformation {
 public:
  explicit FiberedRank1Map(int depth) : depth_(depth) {}

  std::size_t arity() const override { return 2; }
  Point apply(const Point& p) const override { return {p.at(0), fiber(p.at(0)).apply(p.at(1))}; }
  Point apply_inverse(const Point& p) const override { return {p.at(0), fiber(p.at(0)).apply_inverse(p.at(1))}; }
  std::string describe() const override { return "S(a,x)=(a,T_a x)[depth " + std::to_string(depth_) + "]"; }

 private:
  const Rank1Map& fiber(const Rational& a) const {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(a);
    if (it == cache_.end()) {
      if (cache_.size() >= 64) cache_.clear();
      it = cache_.emplace(a, std::make_shared<const Rank1Map>(binary_digits(a, depth_))).first;
    }
    return *it->second;
  }

  int depth_;
  mutable std::mutex mutex_;
  mutable std::map<Rational, std::shared_ptr<const Rank1Map>> cache_;
};

}  // namespace

FiberedSystem make_Sa_system(const Measure& base, int depth) {
  if (base.arity() != 1) throw ValidationError("base_measure", "rank-1 parameter space is [0, 1]");
  const std::vector<Measure> parts{base, Measure::haar()};
  System flat = make_system(SystemSpec{"fibered", {{"fiber", {{"family", "rank1"}, {"depth", depth}}}}, std::nullopt},
                            std::make_shared<FiberedRank1Map>(depth), Measure::product(parts));
  auto fiber = [depth](const Point& a) { return rank1_system(Rank1Spec::from_rational(a.at(0), depth)); };
  return FiberedSystem(base, std::move(fiber), std::move(flat), "S(a,x)=(a,T_a x) over " + base.description());
}

}  // namespace ergolab::rank1
