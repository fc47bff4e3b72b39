#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

#include <Eigen/Core>

namespace whynot {

enum class Action : std::uint8_t { Up = 0, Down = 1, Left = 2, Right = 3 };

inline constexpr int kActionCount = 4;
inline constexpr std::array<Action, kActionCount> kAllActions{Action::Up, Action::Down,
                                                               Action::Left, Action::Right};

constexpr int to_index(Action a) noexcept { return static_cast<int>(a); }
constexpr Action action_from_index(int i) noexcept { return static_cast<Action>(i); }

std::string_view to_string(Action a) noexcept;
// Accepts "up", "down", "left", "right" (case-insensitive) and their first letters.
std::optional<Action> parse_action(std::string_view text) noexcept;

struct Position {
  int x = 0;
  int y = 0;
  friend constexpr bool operator==(Position, Position) = default;
};

// Row-vector of per-action values for one state.
template <typename Scalar>
using BasicActionValues = Eigen::Matrix<Scalar, 1, kActionCount>;
using ActionValues = BasicActionValues<double>;

// Dense cell index y * width + x; the Markov key for tabular learners.
enum class StateKey : std::int32_t {};

constexpr std::int32_t to_index(StateKey k) noexcept { return static_cast<std::int32_t>(k); }
constexpr StateKey state_key(std::int32_t index) noexcept { return static_cast<StateKey>(index); }

// Argmax with ties resolved toward the lowest action index.
template <typename Derived>
Action greedy_action(const Eigen::MatrixBase<Derived>& values) {
  int best = 0;
  for (int a = 1; a < kActionCount; ++a) {
    if (values(a) > values(best)) best = a;
  }
  return action_from_index(best);
}

}  // namespace whynot
