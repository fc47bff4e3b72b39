#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "whynot/gridworld.hpp"
#include "whynot/value_function.hpp"

namespace whynot {

enum class Backing { Table, Approximator };

struct LearnerConfig {
  double alpha = 0.1;
  double gamma = 0.99;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  int epsilon_decay_episodes = 1000;
  int episodes = 2000;
  std::uint64_t seed = 1;
  std::optional<int> max_steps;  // defaults to 4 * W * H
  Backing backing = Backing::Table;
  int hidden_units = 32;

  /// Throws ValidationError naming the offending field ("learner.alpha", ...).
  void validate() const;

  friend bool operator==(const LearnerConfig&, const LearnerConfig&) = default;
};

/// Linear decay from epsilon_start to epsilon_end over epsilon_decay_episodes.
double epsilon_at(const LearnerConfig& cfg, int episode) noexcept;

struct TransitionLog {
  std::vector<std::vector<Transition>> episodes;

  std::size_t transition_count() const noexcept;
  friend bool operator==(const TransitionLog&, const TransitionLog&) = default;
};

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) from the top 53 bits of one draw.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Epsilon-greedy; a uniform draw is consumed on every call so the stream
/// position does not depend on the value table.
Action select_action(const ValueFunction& q, StateKey s, double epsilon, Rng& rng);

/// One Q-learning step toward r + gamma * max_a' q(s', a') * (1 - terminal).
void q_update(ValueFunction& q, StateKey s, Action a, double reward, StateKey next, bool terminal,
              double alpha, double gamma);
void q_update(ValueFunction& q, const Transition& t, const GridMap& map, double alpha, double gamma);

ValueFunction make_value_function(const GridMap& map, Backing backing, int hidden_units,
                                  std::uint64_t seed);

/// Called with each finished episode before the agent's own update.
using EpisodeObserver = std::function<void(std::span<const Transition>)>;

struct TrainResult {
  ValueFunction agent;
  TransitionLog log;
};

/// Episodic epsilon-greedy training. Episode e starts at start position
/// e mod |starts|; the agent updates once per episode over its transitions
/// in generation order. Fully determined by cfg.seed.
TrainResult train(const GridMap& map, const RewardClassSet& classes, const LearnerConfig& cfg,
                  const EpisodeObserver& observer = {});

}  // namespace whynot
