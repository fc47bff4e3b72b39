#include "whynot/gridworld.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <set>
#include <sstream>

#include "whynot/error.hpp"

namespace whynot {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t begin = 0;
  while (begin <= text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(begin, end - begin);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == text.size()) break;
    begin = end + 1;
  }
  return lines;
}

std::vector<std::string> tokens(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

template <typename T>
std::optional<T> parse_number(std::string_view s) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

std::optional<LegendKind> parse_kind(std::string_view s) {
  const std::string k = lower(s);
  if (k == "wall") return LegendKind::Wall;
  if (k == "floor") return LegendKind::Floor;
  if (k == "start") return LegendKind::Start;
  if (k == "goal") return LegendKind::Goal;
  if (k == "object") return LegendKind::Object;
  if (k == "neutral") return LegendKind::Neutral;
  return std::nullopt;
}

std::string_view kind_name(LegendKind k) {
  switch (k) {
    case LegendKind::Wall: return "wall";
    case LegendKind::Floor: return "floor";
    case LegendKind::Start: return "start";
    case LegendKind::Goal: return "goal";
    case LegendKind::Object: return "object";
    case LegendKind::Neutral: return "neutral";
  }
  return "floor";
}

std::optional<LegendKind> reserved_kind(char glyph) {
  switch (glyph) {
    case '#': return LegendKind::Wall;
    case '.': return LegendKind::Floor;
    case 'S': return LegendKind::Start;
    case 'G': return LegendKind::Goal;
    default: return std::nullopt;
  }
}

[[noreturn]] void legend_error(const std::string& msg) {
  throw Error(ErrorCode::MalformedLegend, msg);
}

LegendEntry parse_legend_line(std::string_view line) {
  const auto tok = tokens(line);
  if (tok.size() < 2 || tok[0].size() != 1) legend_error("bad legend line: '" + std::string(line) + "'");
  LegendEntry e;
  e.glyph = tok[0][0];
  const auto kind = parse_kind(tok[1]);
  if (!kind) legend_error("unknown cell kind '" + tok[1] + "'");
  e.kind = *kind;
  if (e.kind == LegendKind::Object) {
    if (tok.size() < 3) legend_error(std::string("object glyph '") + e.glyph + "' needs a class-id");
    e.class_id = parse_number<int>(tok[2]);
    if (!e.class_id) legend_error("bad class-id '" + tok[2] + "'");
    e.terminal = true;
    if (tok.size() >= 4) {
      if (tok[3] != "0" && tok[3] != "1") legend_error("terminal flag must be 0 or 1");
      e.terminal = tok[3] == "1";
    }
    if (tok.size() >= 5) {
      e.reward = parse_number<double>(tok[4]);
      if (!e.reward) legend_error("bad reward '" + tok[4] + "'");
    }
    if (tok.size() > 5) legend_error("too many fields in legend line");
  } else if (e.kind == LegendKind::Goal) {
    if (tok.size() >= 3) {
      e.class_id = parse_number<int>(tok[2]);
      if (!e.class_id) legend_error("bad class-id '" + tok[2] + "'");
    }
    if (tok.size() > 3) legend_error("too many fields in legend line");
  } else if (tok.size() > 2) {
    legend_error("too many fields in legend line");
  }
  return e;
}

}  // namespace

std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::Up: return "up";
    case Action::Down: return "down";
    case Action::Left: return "left";
    case Action::Right: return "right";
  }
  return "up";
}

std::optional<Action> parse_action(std::string_view text) noexcept {
  const std::string t = lower(text);
  if (t == "up" || t == "u") return Action::Up;
  if (t == "down" || t == "d") return Action::Down;
  if (t == "left" || t == "l") return Action::Left;
  if (t == "right" || t == "r") return Action::Right;
  return std::nullopt;
}

std::string_view to_string(SignMode mode) noexcept {
  switch (mode) {
    case SignMode::Positive: return "positive";
    case SignMode::Negative: return "negative";
    case SignMode::Mixed: return "mixed";
  }
  return "negative";
}

std::optional<SignMode> parse_sign_mode(std::string_view text) noexcept {
  const std::string t = lower(text);
  if (t == "positive") return SignMode::Positive;
  if (t == "negative") return SignMode::Negative;
  if (t == "mixed") return SignMode::Mixed;
  return std::nullopt;
}

RewardClassSet::RewardClassSet(std::vector<RewardClass> classes) : classes_(std::move(classes)) {
  std::sort(classes_.begin(), classes_.end(),
            [](const RewardClass& a, const RewardClass& b) { return a.id < b.id; });
  std::set<std::string> names;
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    const auto& c = classes_[i];
    if (c.id != static_cast<int>(i)) {
      throw Error(ErrorCode::ValidationError, "class ids must be dense 0..n-1", "classes");
    }
    if (c.name.empty() || !names.insert(c.name).second) {
      throw Error(ErrorCode::ValidationError, "class names must be unique and non-empty",
                  "classes[" + std::to_string(i) + "].name");
    }
    if (c.sign == SignMode::Positive) {
      if (goal_ >= 0) {
        throw Error(ErrorCode::ValidationError, "exactly one class may be positive", "classes");
      }
      goal_ = c.id;
    }
  }
  if (goal_ < 0) throw Error(ErrorCode::ValidationError, "no positive (goal) class", "classes");
}

const RewardClass& RewardClassSet::operator[](int id) const {
  if (!contains(id)) throw Error(ErrorCode::UnknownClass, "unknown class id " + std::to_string(id));
  return classes_[static_cast<std::size_t>(id)];
}

std::optional<int> RewardClassSet::find(std::string_view name) const noexcept {
  for (const auto& c : classes_) {
    if (c.name == name) return c.id;
  }
  return std::nullopt;
}

bool GridMap::is_terminal(Position p) const {
  const Cell& c = cell(p);
  if (c.type == CellType::Goal) return true;
  if (c.type == CellType::Object) return objects_[static_cast<std::size_t>(c.object)].terminal;
  return false;
}

std::vector<Position> GridMap::open_cells() const {
  std::vector<Position> out;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (!is_wall({x, y})) out.push_back({x, y});
    }
  }
  return out;
}

GridMap build_map(int width, int height, std::vector<char> glyphs,
                  std::vector<LegendEntry> legend, const RewardClassSet& classes) {
  if (width < 3 || height < 3) throw Error(ErrorCode::MalformedMap, "grid must be at least 3x3");
  if (glyphs.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::MalformedMap, "grid body size does not match header");
  }

  // Reserved glyphs are always bound; explicit lines may restate but not rebind them.
  for (const auto& e : legend) {
    if (auto r = reserved_kind(e.glyph); r && *r != e.kind) {
      legend_error(std::string("reserved glyph '") + e.glyph + "' cannot be rebound");
    }
  }
  auto lookup = [&](char g) -> std::optional<LegendEntry> {
    for (const auto& e : legend) {
      if (e.glyph == g) return e;
    }
    if (auto r = reserved_kind(g)) return LegendEntry{g, *r, std::nullopt, false, std::nullopt};
    return std::nullopt;
  };
  {
    std::set<char> seen;
    for (const auto& e : legend) {
      if (!seen.insert(e.glyph).second) legend_error(std::string("duplicate legend glyph '") + e.glyph + "'");
    }
  }

  GridMap m;
  m.width_ = width;
  m.height_ = height;
  m.glyphs_ = std::move(glyphs);
  m.legend_ = legend;
  m.cells_.resize(m.glyphs_.size());

  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const Position p{x, y};
      const char g = m.glyphs_[m.index(p)];
      const auto entry = lookup(g);
      if (!entry) legend_error(std::string("glyph '") + g + "' has no legend binding");
      Cell& cell = m.cells_[m.index(p)];
      switch (entry->kind) {
        case LegendKind::Wall: cell.type = CellType::Wall; break;
        case LegendKind::Floor: cell.type = CellType::Floor; break;
        case LegendKind::Start:
          cell.type = CellType::Floor;
          m.starts_.push_back(p);
          break;
        case LegendKind::Goal:
          if (entry->class_id && *entry->class_id != classes.goal_class()) {
            throw Error(ErrorCode::UnknownClass, "goal glyph must bind the positive class");
          }
          cell.type = CellType::Goal;
          m.goals_.push_back(p);
          break;
        case LegendKind::Neutral:
          cell.type = CellType::Object;
          cell.object = static_cast<int>(m.objects_.size());
          m.objects_.push_back({g, p, std::nullopt, false, 0.0});
          break;
        case LegendKind::Object: {
          const int cls = *entry->class_id;
          if (!classes.contains(cls)) {
            throw Error(ErrorCode::UnknownClass,
                        "legend references absent class-id " + std::to_string(cls));
          }
          const SignMode sign = classes[cls].sign;
          if (sign == SignMode::Positive) {
            legend_error("the positive class is bound to goal cells only");
          }
          const double reward = entry->reward.value_or(-1.0);
          if (sign == SignMode::Negative && !(reward < 0.0)) {
            legend_error("negative class objects need a negative reward");
          }
          if (reward == 0.0) legend_error("object reward must be nonzero");
          cell.type = CellType::Object;
          cell.object = static_cast<int>(m.objects_.size());
          m.objects_.push_back({g, p, cls, entry->terminal, reward});
          break;
        }
      }
    }
  }
  if (m.goals_.empty()) throw Error(ErrorCode::NoGoal, "map has no goal cell");
  if (m.starts_.empty()) throw Error(ErrorCode::NoStart, "map has no start cell");
  return m;
}

GridMap load_map(std::string_view text, const RewardClassSet& classes) {
  const auto lines = split_lines(text);
  std::size_t i = 0;
  auto comment = [](std::string_view l) { return !l.empty() && l.front() == ';'; };
  while (i < lines.size() && (comment(lines[i]) || blank(lines[i]))) ++i;
  if (i == lines.size()) throw Error(ErrorCode::MalformedMap, "missing GRID header");

  const auto header = tokens(lines[i]);
  if (header.size() != 3 || header[0] != "GRID") {
    throw Error(ErrorCode::MalformedMap, "header must be 'GRID W H'");
  }
  const auto w = parse_number<int>(header[1]);
  const auto h = parse_number<int>(header[2]);
  if (!w || !h) throw Error(ErrorCode::MalformedMap, "bad grid dimensions");
  if (*w < 3 || *h < 3) throw Error(ErrorCode::MalformedMap, "grid must be at least 3x3");
  ++i;

  std::vector<char> glyphs;
  glyphs.reserve(static_cast<std::size_t>(*w) * static_cast<std::size_t>(*h));
  int rows = 0;
  while (rows < *h) {
    if (i == lines.size()) throw Error(ErrorCode::MalformedMap, "grid body has too few rows");
    const std::string_view row = lines[i++];
    if (comment(row)) continue;
    if (static_cast<int>(row.size()) != *w) {
      throw Error(ErrorCode::MalformedMap, "row " + std::to_string(rows) + " has " +
                                               std::to_string(row.size()) + " glyphs, expected " +
                                               std::to_string(*w));
    }
    glyphs.insert(glyphs.end(), row.begin(), row.end());
    ++rows;
  }

  std::vector<LegendEntry> legend;
  for (; i < lines.size(); ++i) {
    if (comment(lines[i]) || blank(lines[i])) continue;
    legend.push_back(parse_legend_line(lines[i]));
  }
  return build_map(*w, *h, std::move(glyphs), std::move(legend), classes);
}

std::string to_text(const GridMap& map) {
  std::ostringstream out;
  out << "GRID " << map.width() << ' ' << map.height() << '\n';
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) out << map.glyph({x, y});
    out << '\n';
  }
  out << '\n';
  for (const auto& e : map.legend()) {
    out << e.glyph << ' ' << kind_name(e.kind);
    if (e.kind == LegendKind::Object) {
      out << ' ' << *e.class_id << ' ' << (e.terminal ? 1 : 0);
      if (e.reward) {
        std::ostringstream r;
        r.precision(17);
        r << *e.reward;
        out << ' ' << r.str();
      }
    } else if (e.kind == LegendKind::Goal && e.class_id) {
      out << ' ' << *e.class_id;
    }
    out << '\n';
  }
  return out.str();
}

GridMap apply_edits(const GridMap& map, std::span<const CellEdit> edits,
                    const RewardClassSet& classes) {
  std::vector<char> glyphs;
  glyphs.reserve(map.cell_count());
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) glyphs.push_back(map.glyph({x, y}));
  }
  for (const auto& e : edits) {
    if (!map.in_bounds(e.position)) {
      throw Error(ErrorCode::IndexOutOfRange, "edit position outside the grid");
    }
    glyphs[static_cast<std::size_t>(e.position.y * map.width() + e.position.x)] = e.glyph;
  }
  GridMap edited = build_map(map.width(), map.height(), std::move(glyphs), map.legend(), classes);
  if (edited.starts() != map.starts()) {
    throw Error(ErrorCode::NoStart, "edits must keep every start position intact");
  }
  return edited;
}

Position moved(Position p, Action a) noexcept {
  switch (a) {
    case Action::Up: return {p.x, p.y - 1};
    case Action::Down: return {p.x, p.y + 1};
    case Action::Left: return {p.x - 1, p.y};
    case Action::Right: return {p.x + 1, p.y};
  }
  return p;
}

EnvState reset(const GridMap& map, std::optional<std::size_t> start_index,
               std::optional<int> max_steps) {
  const std::size_t idx = start_index.value_or(0);
  if (idx >= map.starts().size()) {
    throw Error(ErrorCode::StartOutOfRange, "start index " + std::to_string(idx) +
                                                " out of range (" +
                                                std::to_string(map.starts().size()) + " starts)");
  }
  const int budget = max_steps.value_or(map.default_max_steps());
  if (budget < 1) throw Error(ErrorCode::ValidationError, "max_steps must be positive", "max_steps");
  return EnvState{map.starts()[idx], 0, false, budget};
}

Transition step(const EnvState& state, Action action, const GridMap& map,
                const RewardClassSet& classes) {
  if (state.done) throw Error(ErrorCode::SteppedWhenDone, "episode already finished");

  Transition t;
  t.state = state;
  t.action = action;
  t.reward_by_class = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes.size()));

  EnvState next = state;
  next.step_count += 1;
  const Position target = moved(state.position, action);
  if (!map.is_wall(target)) next.position = target;

  const Cell& cell = map.cell(next.position);
  if (next.position != state.position) {
    if (cell.type == CellType::Goal) {
      const int g = classes.goal_class();
      t.reward_by_class(g) =
          1.0 - static_cast<double>(next.step_count) / static_cast<double>(next.max_steps);
      t.terminal = true;
      t.outcome = Outcome::Goal;
      t.event_class = g;
    } else if (cell.type == CellType::Object) {
      const MapObject& obj = map.objects()[static_cast<std::size_t>(cell.object)];
      if (obj.class_id) {
        t.reward_by_class(*obj.class_id) = obj.reward;
        t.terminal = obj.terminal;
        t.outcome = Outcome::Object;
        t.event_class = *obj.class_id;
      }
    }
  }
  if (t.terminal) {
    next.done = true;
  } else if (next.step_count >= next.max_steps) {
    next.done = true;
    t.outcome = Outcome::Timeout;
  }
  t.next_state = next;
  t.reward_total = t.reward_by_class.sum();
  return t;
}

}  // namespace whynot
