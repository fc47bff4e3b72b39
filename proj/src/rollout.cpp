#include "whynot/rollout.hpp"

#include <algorithm>

#include "whynot/error.hpp"

namespace whynot {

std::string_view to_string(Termination t) noexcept {
  switch (t) {
    case Termination::Goal: return "goal";
    case Termination::Danger: return "danger";
    case Termination::Timeout: return "timeout";
    case Termination::HorizonCap: return "horizon_cap";
  }
  return "horizon_cap";
}

std::vector<Position> Trajectory::path() const {
  std::vector<Position> out;
  out.reserve(steps.size() + 1);
  for (const auto& s : steps) out.push_back(s.position);
  out.push_back(final_state.position);
  return out;
}

EnvState state_at(const GridMap& map, Position p, std::optional<int> max_steps) {
  if (map.is_wall(p)) {
    throw Error(ErrorCode::ValidationError, "state is not an open cell", "state");
  }
  return EnvState{p, 0, false, max_steps.value_or(map.default_max_steps())};
}

namespace {

// Shared driver: action_for(i, state) picks the i-th action.
template <typename ActionFor>
Trajectory drive(const GridMap& map, const RewardClassSet& classes, const EnvState& s0,
                 std::optional<int> horizon, ActionFor&& action_for) {
  if (s0.done) throw Error(ErrorCode::SteppedWhenDone, "rollout from a finished state");
  const int cap = horizon.value_or(s0.max_steps);
  if (cap < 1) throw Error(ErrorCode::ValidationError, "horizon must be at least 1", "horizon");

  Trajectory traj;
  EnvState state = s0;
  for (int i = 0; i < cap; ++i) {
    const Action a = action_for(static_cast<std::size_t>(i), state);
    Transition t = step(state, a, map, classes);
    traj.steps.push_back({map.key(state.position), state.position, a, std::move(t.reward_by_class)});
    state = t.next_state;
    if (t.terminal) {
      if (t.outcome == Outcome::Goal) {
        traj.terminated = Termination::Goal;
      } else {
        traj.terminated = Termination::Danger;
        traj.danger_class = t.event_class;
      }
      break;
    }
    if (state.done) {
      traj.terminated = Termination::Timeout;
      break;
    }
  }
  traj.final_state = state;
  return traj;
}

}  // namespace

Trajectory rollout_greedy(const GridMap& map, const RewardClassSet& classes,
                          const ValueFunction& policy, const EnvState& s0,
                          std::optional<int> horizon) {
  auto traj = drive(map, classes, s0, horizon, [&](std::size_t, const EnvState& s) {
    return policy.greedy(map.key(s.position));
  });
  traj.origin = Origin::Agent;
  return traj;
}

Trajectory rollout_counterfactual(const GridMap& map, const RewardClassSet& classes,
                                  const ValueFunction& policy, const EnvState& s0,
                                  std::span<const Action> forced, std::optional<int> horizon) {
  if (forced.empty()) {
    throw Error(ErrorCode::ValidationError, "counterfactual needs at least one action",
                "counterfactual_actions");
  }
  auto traj = drive(map, classes, s0, horizon, [&](std::size_t i, const EnvState& s) {
    return i < forced.size() ? forced[i] : policy.greedy(map.key(s.position));
  });
  traj.origin = Origin::Counterfactual;
  traj.forced.assign(forced.begin(), forced.end());
  return traj;
}

Segment make_segment(const Trajectory& traj, std::size_t action_index, int extra_steps) {
  if (action_index >= traj.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "segment start beyond trajectory length");
  }
  if (extra_steps < 0) {
    throw Error(ErrorCode::ValidationError, "extra_steps must be non-negative", "explain.extra_steps");
  }
  const std::size_t end =
      std::min(action_index + 1 + static_cast<std::size_t>(extra_steps), traj.size());
  return {&traj, action_index, end, extra_steps};
}

double greedy_success_rate(const GridMap& map, const RewardClassSet& classes,
                           const ValueFunction& policy, int episodes,
                           std::optional<int> max_steps) {
  if (episodes <= 0) return 0.0;
  int successes = 0;
  for (int e = 0; e < episodes; ++e) {
    const EnvState s0 =
        reset(map, static_cast<std::size_t>(e) % map.starts().size(), max_steps);
    if (rollout_greedy(map, classes, policy, s0).terminated == Termination::Goal) ++successes;
  }
  return static_cast<double>(successes) / static_cast<double>(episodes);
}

}  // namespace whynot
