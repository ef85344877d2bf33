#pragma once

#include "ergolab/core/system.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

/// Rank-1 cutting and stacking with cutting parameter 3 and one spacer per
/// stage, steered by the binary digits of a parameter a in [0, 1].
///
/// Conventions:
///  - digits are indexed from 1; digit n steers the passage from stage n-1
///    to stage n;
///  - B_0 = "T"; B_n = B_{n-1} s B_{n-1} B_{n-1} when digit n is 0 (spacer
///    atop the first column) and B_{n-1} B_{n-1} s B_{n-1} when it is 1
///    (atop the second); columns are stacked left to right, read bottom-up;
///  - rationals use the binary expansion not ending in all ones, except
///    a = 1 whose only expansion in [0, 1] is .111...
namespace ergolab::rank1 {

inline constexpr int kMaxMapDepth = 15;

struct Rank1Spec {
  std::variant<Rational, std::vector<std::uint8_t>> parameter = Rational(0);
  int depth = 1;

  static Rank1Spec from_rational(const Rational& a, int depth);
  static Rank1Spec from_digits(std::vector<std::uint8_t> digits, int depth);

  bool is_rational() const noexcept { return std::holds_alternative<Rational>(parameter); }
  const Rational& rational() const { return std::get<Rational>(parameter); }

  /// Digit n (1-based). Digit streams shorter than n throw DepthExceeded.
  std::uint8_t digit(int n) const;
  std::vector<std::uint8_t> digits(int count) const;
  std::string describe() const;
};

/// The first `count` binary digits of a in [0, 1].
std::vector<std::uint8_t> binary_digits(const Rational& a, int count);

struct TowerStage {
  int stage = 0;
  std::string word;          // over {'T', 's'}
  std::int64_t height = 0;   // number of T letters
  std::int64_t length = 0;   // total letters
  std::int64_t spacers = 0;  // number of s letters
};

/// Stage-n word; n may not exceed spec.depth.
TowerStage rank1_word(const Rank1Spec& spec, int n);

/// Word as space-separated letters, e.g. "T s T T".
std::string spaced_word(const std::string& word);

/// Closed forms: L_n = (3^{n+1} - 1) / 2 and h_n = 3^n.
std::int64_t stage_length(int n);
std::int64_t stage_height(int n);

struct Piece {
  Rational lo;
  Rational hi;
  Rational translation;
};

/// The stage-d tower over the normalized space [0, 1).
///
/// The stage-0 base has unit mass and spacers come from a reserve to its
/// right, so stage d occupies L_d cells of width 3^{-d}. After rescaling by
/// the total mass every level is one cell [c / L_d, (c + 1) / L_d) and the
/// original unit interval is the first 3^d cells. The map moves each level
/// to the next by translation and is undefined on the top level.
class Rank1Map {
 public:
  explicit Rank1Map(std::vector<std::uint8_t> digits);

  int depth() const noexcept { return static_cast<int>(digits_.size()); }
  const std::vector<std::uint8_t>& digits() const noexcept { return digits_; }
  std::int64_t levels() const noexcept { return static_cast<std::int64_t>(level_cell_.size()); }
  std::int64_t base_cells() const noexcept { return base_cells_; }

  std::int64_t level_cell(std::int64_t level) const { return level_cell_.at(static_cast<std::size_t>(level)); }
  std::int64_t cell_level(std::int64_t cell) const { return cell_level_.at(static_cast<std::size_t>(cell)); }
  /// 'T' when the level lies in the original unit interval, 's' for spacers.
  char level_letter(std::int64_t level) const { return level_cell(level) < base_cells_ ? 'T' : 's'; }

  Rational cell_width() const { return Rational(1, levels()); }
  Rational level_lo(std::int64_t level) const { return Rational(level_cell(level), levels()); }

  std::int64_t piece_count() const noexcept { return levels() - 1; }
  /// Pieces ordered by source position.
  Piece piece(std::int64_t index) const;

  Rational defined_measure() const { return 1 - cell_width(); }
  Rational undefined_measure() const { return cell_width(); }

  std::int64_t level_of(const Rational& x) const;
  /// Throws DepthExceeded on the top level.
  Rational apply(const Rational& x) const;
  /// Throws DepthExceeded on the base level.
  Rational apply_inverse(const Rational& x) const;

  friend bool operator==(const Rank1Map& a, const Rank1Map& b) { return a.level_cell_ == b.level_cell_; }

 private:
  std::vector<std::uint8_t> digits_;
  std::vector<std::int32_t> level_cell_;
  std::vector<std::int32_t> cell_level_;
  std::int64_t base_cells_ = 1;
};

Rank1Map rank1_map(const Rank1Spec& spec);

/// "lo,hi,translation" rows with exact "p/q" values, header first.
std::string map_csv(const Rank1Map& map);

enum class Dichotomy { IsomorphicFamily, DisjointFamily };

struct DichotomyVerdict {
  Dichotomy verdict;
  Rational difference;
  std::string reason;
};

std::string to_string(Dichotomy d);

/// Isomorphic iff |a - b| = k / 2^l. Digit-stream inputs throw
/// UndecidableInput whose message reports the stages on which they agree.
DichotomyVerdict dyadic_equivalence(const Rank1Spec& a, const Rank1Spec& b);

struct Agreement {
  std::optional<int> first_difference;  // 1-based digit index
  int max_stage = 0;
};

Agreement agreement_stage(const Rank1Spec& a, const Rank1Spec& b, int max_stage);

/// Stage-d tower indices of the stage-k level j.
std::vector<std::int64_t> level_positions(const Rank1Map& map, int stage, std::int64_t level);

/// counts[n] = #{i in P : i + n in P} for n = 0..max_lag, P the stage-d
/// positions of stage-k level j. counts[n] / L_d is the measure of
/// A ∩ T^{-n} A at stage d; the stage-d value differs from the limit
/// system's by at most n / L_d.
std::vector<std::int64_t> level_overlap_counts(const Rank1Map& map, int stage, std::int64_t level,
                                               std::int64_t max_lag);

class Rank1Transformation final : public Transformation {
 public:
  explicit Rank1Transformation(std::shared_ptr<const Rank1Map> map) : map_(std::move(map)) {}

  const Rank1Map& tower() const noexcept { return *map_; }
  std::size_t arity() const override { return 1; }
  Point apply(const Point& p) const override;
  Point apply_inverse(const Point& p) const override;
  std::string describe() const override;

 private:
  std::shared_ptr<const Rank1Map> map_;
};

/// T_a at the spec's depth, with Lebesgue measure on [0, 1).
System rank1_system(const Rank1Spec& spec);

/// S(a, x) = (a, T_a x) with fibers built at `depth`.
FiberedSystem make_Sa_system(const Measure& base, int depth);

}  // namespace ergolab::rank1
