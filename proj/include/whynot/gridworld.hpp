#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "whynot/types.hpp"

namespace whynot {

enum class SignMode { Positive, Negative, Mixed };

std::string_view to_string(SignMode mode) noexcept;
std::optional<SignMode> parse_sign_mode(std::string_view text) noexcept;

/// A distinct source of reward. Exactly one class per set is Positive and is
/// the one emitted by Goal cells.
struct RewardClass {
  int id = 0;
  std::string name;
  SignMode sign = SignMode::Negative;
  std::string consequence;   // e.g. "fall down"
  std::string display_name;  // e.g. "stairs"

  friend bool operator==(const RewardClass&, const RewardClass&) = default;
};

class RewardClassSet {
 public:
  RewardClassSet() = default;
  /// Throws ValidationError unless ids are dense 0..n-1, names are unique and
  /// exactly one class is Positive.
  explicit RewardClassSet(std::vector<RewardClass> classes);

  std::size_t size() const noexcept { return classes_.size(); }
  bool contains(int id) const noexcept { return id >= 0 && id < static_cast<int>(classes_.size()); }
  const RewardClass& operator[](int id) const;
  int goal_class() const noexcept { return goal_; }
  std::optional<int> find(std::string_view name) const noexcept;

  auto begin() const noexcept { return classes_.begin(); }
  auto end() const noexcept { return classes_.end(); }
  const std::vector<RewardClass>& classes() const noexcept { return classes_; }

  friend bool operator==(const RewardClassSet&, const RewardClassSet&) = default;

 private:
  std::vector<RewardClass> classes_;
  int goal_ = -1;
};

enum class CellType { Floor, Wall, Goal, Object };

enum class LegendKind { Wall, Floor, Start, Goal, Object, Neutral };

struct LegendEntry {
  char glyph = '.';
  LegendKind kind = LegendKind::Floor;
  std::optional<int> class_id;  // Object only
  bool terminal = false;        // Object only
  std::optional<double> reward; // Object only; defaults to -1
};

/// One placed object instance. Neutral objects carry no class and never
/// emit reward.
struct MapObject {
  char glyph = '?';
  Position position;
  std::optional<int> class_id;
  bool terminal = false;
  double reward = 0.0;
};

struct Cell {
  CellType type = CellType::Floor;
  int object = -1;  // index into GridMap::objects() when type == Object
};

struct CellEdit {
  Position position;
  char glyph = '.';
};

/// Immutable, validated world layout. Construct through load_map().
class GridMap {
 public:
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t cell_count() const noexcept { return cells_.size(); }

  bool in_bounds(Position p) const noexcept {
    return p.x >= 0 && p.y >= 0 && p.x < width_ && p.y < height_;
  }
  // Out-of-bounds positions behave as walls.
  bool is_wall(Position p) const noexcept {
    return !in_bounds(p) || cells_[index(p)].type == CellType::Wall;
  }
  const Cell& cell(Position p) const { return cells_.at(index(p)); }
  char glyph(Position p) const { return glyphs_.at(index(p)); }
  bool is_terminal(Position p) const;

  StateKey key(Position p) const noexcept { return state_key(static_cast<std::int32_t>(index(p))); }
  Position position(StateKey k) const noexcept {
    return {to_index(k) % width_, to_index(k) / width_};
  }

  const std::vector<MapObject>& objects() const noexcept { return objects_; }
  const std::vector<Position>& starts() const noexcept { return starts_; }
  const std::vector<LegendEntry>& legend() const noexcept { return legend_; }
  const std::vector<Position>& goals() const noexcept { return goals_; }
  /// Cells that are not walls, in row-major order.
  std::vector<Position> open_cells() const;

  int default_max_steps() const noexcept { return 4 * width_ * height_; }

  friend GridMap load_map(std::string_view text, const RewardClassSet& classes);
  friend GridMap build_map(int width, int height, std::vector<char> glyphs,
                           std::vector<LegendEntry> legend, const RewardClassSet& classes);

 private:
  std::size_t index(Position p) const noexcept {
    return static_cast<std::size_t>(p.y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(p.x);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<char> glyphs_;
  std::vector<Cell> cells_;
  std::vector<MapObject> objects_;
  std::vector<Position> starts_;
  std::vector<Position> goals_;
  std::vector<LegendEntry> legend_;
};

/// Parses the text map format:
///
///     GRID W H
///     <H rows of W glyphs>
///     <blank line>
///     <glyph> <kind> [class-id] [terminal:0|1] [reward]
///
/// Reserved glyphs `#` wall, `.` floor, `S` start, `G` goal need no legend
/// line. Lines beginning with `;` are comments.
GridMap load_map(std::string_view text, const RewardClassSet& classes);

/// Validates an already-tokenised layout; used by load_map and map editing.
GridMap build_map(int width, int height, std::vector<char> glyphs,
                  std::vector<LegendEntry> legend, const RewardClassSet& classes);

/// Canonical text form; load_map(to_text(m)) reproduces m.
std::string to_text(const GridMap& map);

/// Applies glyph edits and re-validates. Throws on unknown glyphs or when the
/// result violates a map invariant.
GridMap apply_edits(const GridMap& map, std::span<const CellEdit> edits,
                    const RewardClassSet& classes);

struct EnvState {
  Position position;
  int step_count = 0;
  bool done = false;
  int max_steps = 1;

  friend bool operator==(const EnvState&, const EnvState&) = default;
};

enum class Outcome { None, Goal, Object, Timeout };

struct Transition {
  EnvState state;
  Action action = Action::Up;
  EnvState next_state;
  double reward_total = 0.0;
  Eigen::VectorXd reward_by_class;
  bool terminal = false;
  Outcome outcome = Outcome::None;
  int event_class = -1;  // class that emitted the reward, -1 if none

  friend bool operator==(const Transition& a, const Transition& b) {
    return a.state == b.state && a.action == b.action && a.next_state == b.next_state &&
           a.reward_total == b.reward_total && a.reward_by_class == b.reward_by_class &&
           a.terminal == b.terminal && a.outcome == b.outcome && a.event_class == b.event_class;
  }
};

/// Starts an episode. max_steps defaults to 4 * W * H.
EnvState reset(const GridMap& map, std::optional<std::size_t> start_index = std::nullopt,
               std::optional<int> max_steps = std::nullopt);

/// Deterministic one-step dynamics. Blocked moves consume a step with zero
/// reward. Entering Goal pays (1 - step_count'/max_steps) to the goal class.
Transition step(const EnvState& state, Action action, const GridMap& map,
                const RewardClassSet& classes);

Position moved(Position p, Action a) noexcept;

}  // namespace whynot
