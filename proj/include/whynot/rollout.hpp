#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "whynot/gridworld.hpp"
#include "whynot/value_function.hpp"

namespace whynot {

enum class Origin { Agent, Counterfactual };
enum class Termination { Goal, Danger, Timeout, HorizonCap };

std::string_view to_string(Termination t) noexcept;

struct TrajectoryStep {
  StateKey state{};
  Position position;
  Action action = Action::Up;
  Eigen::VectorXd reward_by_class;

  friend bool operator==(const TrajectoryStep& a, const TrajectoryStep& b) {
    return a.state == b.state && a.position == b.position && a.action == b.action &&
           a.reward_by_class == b.reward_by_class;
  }
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  Origin origin = Origin::Agent;
  std::vector<Action> forced;  // Counterfactual only
  Termination terminated = Termination::HorizonCap;
  int danger_class = -1;       // set when terminated == Danger
  EnvState final_state;

  std::size_t size() const noexcept { return steps.size(); }
  /// Every visited position, including the one reached by the last step.
  std::vector<Position> path() const;
};

/// A window of a trajectory, [begin, end).
struct Segment {
  const Trajectory* parent = nullptr;
  std::size_t begin = 0;
  std::size_t end = 0;
  int extra_steps = 5;

  std::span<const TrajectoryStep> steps() const {
    return std::span<const TrajectoryStep>(parent->steps).subspan(begin, end - begin);
  }
  std::size_t size() const noexcept { return end - begin; }
};

/// Episode-start state at an arbitrary open cell.
EnvState state_at(const GridMap& map, Position p, std::optional<int> max_steps = std::nullopt);

/// Greedy (epsilon = 0) rollout until terminal, step budget or horizon.
/// Horizon defaults to the state's remaining step budget.
Trajectory rollout_greedy(const GridMap& map, const RewardClassSet& classes,
                          const ValueFunction& policy, const EnvState& s0,
                          std::optional<int> horizon = std::nullopt);

/// Executes `forced` verbatim (blocked moves included), then continues
/// greedily. Remaining forced actions are dropped if the episode ends.
Trajectory rollout_counterfactual(const GridMap& map, const RewardClassSet& classes,
                                  const ValueFunction& policy, const EnvState& s0,
                                  std::span<const Action> forced,
                                  std::optional<int> horizon = std::nullopt);

/// span = [index, min(index + 1 + extra_steps, length)]
Segment make_segment(const Trajectory& traj, std::size_t action_index, int extra_steps = 5);

/// Fraction of `episodes` greedy evaluation runs, cycling through the start
/// positions, that reach the goal.
double greedy_success_rate(const GridMap& map, const RewardClassSet& classes,
                           const ValueFunction& policy, int episodes = 100,
                           std::optional<int> max_steps = std::nullopt);

}  // namespace whynot
