#include "whynot/learner.hpp"

#include <algorithm>
#include <string>

#include "whynot/error.hpp"

namespace whynot {

namespace {

void require(bool ok, const char* field, const std::string& message) {
  if (!ok) throw Error(ErrorCode::ValidationError, message, field);
}

}  // namespace

void LearnerConfig::validate() const {
  require(alpha > 0.0 && alpha <= 1.0, "learner.alpha", "alpha must be in (0, 1]");
  require(gamma >= 0.0 && gamma <= 1.0, "learner.gamma", "gamma must be in [0, 1]");
  require(epsilon_start >= 0.0 && epsilon_start <= 1.0, "learner.epsilon_start",
          "epsilon_start must be in [0, 1]");
  require(epsilon_end >= 0.0 && epsilon_end <= epsilon_start, "learner.epsilon_end",
          "epsilon_end must be in [0, epsilon_start]");
  require(epsilon_decay_episodes >= 0, "learner.epsilon_decay_episodes",
          "epsilon_decay_episodes must be non-negative");
  require(episodes >= 0, "learner.episodes", "episodes must be non-negative");
  require(!max_steps || *max_steps >= 1, "learner.max_steps", "max_steps must be positive");
  require(hidden_units >= 1, "learner.hidden_units", "hidden_units must be positive");
}

double epsilon_at(const LearnerConfig& cfg, int episode) noexcept {
  if (cfg.epsilon_decay_episodes <= 0) return cfg.epsilon_end;
  const double frac = std::min(1.0, static_cast<double>(episode) /
                                        static_cast<double>(cfg.epsilon_decay_episodes));
  return cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac;
}

std::size_t TransitionLog::transition_count() const noexcept {
  std::size_t n = 0;
  for (const auto& ep : episodes) n += ep.size();
  return n;
}

Action select_action(const ValueFunction& q, StateKey s, double epsilon, Rng& rng) {
  if (uniform01(rng) < epsilon) {
    return action_from_index(static_cast<int>(rng() % kActionCount));
  }
  return q.greedy(s);
}

void q_update(ValueFunction& q, StateKey s, Action a, double reward, StateKey next, bool terminal,
              double alpha, double gamma) {
  const double bootstrap = terminal ? 0.0 : gamma * q.max_value(next);
  q.update_toward(s, a, reward + bootstrap, alpha);
}

void q_update(ValueFunction& q, const Transition& t, const GridMap& map, double alpha,
              double gamma) {
  q_update(q, map.key(t.state.position), t.action, t.reward_total,
           map.key(t.next_state.position), t.terminal, alpha, gamma);
}

ValueFunction make_value_function(const GridMap& map, Backing backing, int hidden_units,
                                  std::uint64_t seed) {
  if (backing == Backing::Approximator) {
    return ValueFunction::approximator(map.width(), map.height(), hidden_units, seed);
  }
  return ValueFunction::table(static_cast<Eigen::Index>(map.cell_count()));
}

TrainResult train(const GridMap& map, const RewardClassSet& classes, const LearnerConfig& cfg,
                  const EpisodeObserver& observer) {
  cfg.validate();
  TrainResult out{make_value_function(map, cfg.backing, cfg.hidden_units,
                                      cfg.seed ^ 0x9e3779b97f4a7c15ULL),
                  {}};
  Rng rng(cfg.seed);
  out.log.episodes.reserve(static_cast<std::size_t>(cfg.episodes));
  const std::size_t starts = map.starts().size();

  for (int e = 0; e < cfg.episodes; ++e) {
    const double eps = epsilon_at(cfg, e);
    EnvState state = reset(map, static_cast<std::size_t>(e) % starts, cfg.max_steps);
    std::vector<Transition> episode;
    while (!state.done) {
      const Action a = select_action(out.agent, map.key(state.position), eps, rng);
      episode.push_back(step(state, a, map, classes));
      state = episode.back().next_state;
    }
    if (observer) observer(episode);
    for (const auto& t : episode) q_update(out.agent, t, map, cfg.alpha, cfg.gamma);
    out.log.episodes.push_back(std::move(episode));
  }
  return out;
}

}  // namespace whynot
