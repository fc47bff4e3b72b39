#include "whynot/influence.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "whynot/error.hpp"

namespace whynot {

std::string_view to_string(InfluenceMode m) noexcept {
  return m == InfluenceMode::Signed ? "signed" : "magnitude";
}

std::string_view to_string(UpdateCadence c) noexcept {
  return c == UpdateCadence::Minibatch ? "minibatch" : "episode_pass";
}

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) {
    throw Error(ErrorCode::ValidationError, "buffer capacity must be positive",
                "influence.capacity");
  }
}

void ReplayBuffer::push(const FilteredTransition& t) {
  if (entries_.size() < capacity_) {
    entries_.push_back(t);
    return;
  }
  entries_[head_] = t;
  head_ = (head_ + 1) % capacity_;
}

const FilteredTransition& ReplayBuffer::at(std::size_t i) const {
  if (i >= entries_.size()) throw Error(ErrorCode::IndexOutOfRange, "buffer index out of range");
  return entries_[(head_ + i) % entries_.size()];
}

const FilteredTransition& ReplayBuffer::sample(Rng& rng) const {
  if (entries_.empty()) throw Error(ErrorCode::IndexOutOfRange, "sampling an empty buffer");
  return entries_[static_cast<std::size_t>(rng() % entries_.size())];
}

void InfluenceConfig::validate() const {
  auto bad_gamma = [](double g) { return !(g >= 0.0 && g <= 1.0); };
  if (bad_gamma(gamma)) {
    throw Error(ErrorCode::ValidationError, "gamma must be in [0, 1]", "influence.gamma");
  }
  if (alpha && !(*alpha > 0.0 && *alpha <= 1.0)) {
    throw Error(ErrorCode::ValidationError, "alpha must be in (0, 1]", "influence.alpha");
  }
  if (capacity == 0) {
    throw Error(ErrorCode::ValidationError, "capacity must be positive", "influence.capacity");
  }
  if (batch_size < 1) {
    throw Error(ErrorCode::ValidationError, "batch_size must be positive", "influence.batch_size");
  }
  if (hidden_units < 1) {
    throw Error(ErrorCode::ValidationError, "hidden_units must be positive",
                "influence.hidden_units");
  }
  for (const auto& [id, o] : per_class) {
    if (o.gamma && bad_gamma(*o.gamma)) {
      throw Error(ErrorCode::ValidationError, "gamma must be in [0, 1]",
                  "influence.per_class." + std::to_string(id) + ".gamma");
    }
  }
}

double InfluenceConfig::gamma_for(int class_id) const {
  if (auto it = per_class.find(class_id); it != per_class.end() && it->second.gamma) {
    return *it->second.gamma;
  }
  return gamma;
}

InfluenceMode InfluenceConfig::mode_for(const RewardClass& c) const {
  if (auto it = per_class.find(c.id); it != per_class.end() && it->second.mode) {
    return *it->second.mode;
  }
  return c.sign == SignMode::Mixed ? InfluenceMode::Signed : InfluenceMode::Magnitude;
}

double filter_reward(const Transition& t, int class_id, InfluenceMode mode) {
  if (class_id < 0 || class_id >= t.reward_by_class.size()) {
    throw Error(ErrorCode::UnknownClass, "unknown class id " + std::to_string(class_id));
  }
  const double r = t.reward_by_class(class_id);
  return mode == InfluenceMode::Magnitude ? std::abs(r) : r;
}

FilteredTransition filter_transition(const Transition& t, const GridMap& map, int class_id,
                                     InfluenceMode mode) {
  return {map.key(t.state.position), t.action, filter_reward(t, class_id, mode),
          map.key(t.next_state.position), t.terminal};
}

void influence_update(InfluencePredictor& ip, const FilteredTransition& t, double alpha) {
  const double bootstrap = t.terminal ? 0.0 : ip.gamma * ip.values.max_value(t.next);
  ip.values.update_toward(t.state, t.action, t.reward + bootstrap, alpha);
}

double influence_value(const InfluencePredictor& ip, StateKey s) { return ip.values.max_value(s); }

double bellman_residual(const InfluencePredictor& ip) {
  double worst = 0.0;
  for (std::size_t i = 0; i < ip.buffer.size(); ++i) {
    const auto& t = ip.buffer.at(i);
    const double target = t.reward + (t.terminal ? 0.0 : ip.gamma * ip.values.max_value(t.next));
    worst = std::max(worst, std::abs(target - ip.values.value(t.state, t.action)));
  }
  return worst;
}

std::vector<InfluencePredictor> make_predictors(const GridMap& map, const RewardClassSet& classes,
                                                const InfluenceConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  std::vector<InfluencePredictor> ips;
  ips.reserve(classes.size());
  for (const auto& c : classes) {
    // Independent stream per class so serial and parallel schedules agree.
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(c.id), 0x1f1u};
    Rng rng(seq);
    const std::uint64_t init_seed = rng();
    ips.push_back(InfluencePredictor{
        c.id, c.sign, cfg.mode_for(c), cfg.gamma_for(c.id),
        make_value_function(map, cfg.backing, cfg.hidden_units, init_seed),
        ReplayBuffer(cfg.capacity), rng});
  }
  return ips;
}

namespace {

void update_one(InfluencePredictor& ip, std::span<const Transition> episode, const GridMap& map,
                const InfluenceConfig& cfg, double alpha) {
  std::vector<FilteredTransition> filtered;
  filtered.reserve(episode.size());
  for (const auto& t : episode) {
    filtered.push_back(filter_transition(t, map, ip.class_id, ip.mode));
    ip.buffer.push(filtered.back());
  }
  if (cfg.cadence == UpdateCadence::EpisodePass) {
    for (const auto& ft : filtered) influence_update(ip, ft, alpha);
    return;
  }
  for (std::size_t step = 0; step < filtered.size(); ++step) {
    for (int b = 0; b < cfg.batch_size; ++b) {
      const FilteredTransition sample = ip.buffer.sample(ip.rng);
      influence_update(ip, sample, alpha);
    }
  }
}

}  // namespace

void update_predictors(std::vector<InfluencePredictor>& ips, std::span<const Transition> episode,
                       const GridMap& map, const InfluenceConfig& cfg, double alpha) {
  if (cfg.parallel && ips.size() > 1) {
    std::vector<std::jthread> workers;
    workers.reserve(ips.size());
    for (auto& ip : ips) {
      workers.emplace_back([&ip, episode, &map, &cfg, alpha] { update_one(ip, episode, map, cfg, alpha); });
    }
    return;
  }
  for (auto& ip : ips) update_one(ip, episode, map, cfg, alpha);
}

CotrainResult cotrain(const GridMap& map, const RewardClassSet& classes,
                      const LearnerConfig& learner, const InfluenceConfig& influence) {
  auto ips = make_predictors(map, classes, influence, learner.seed);
  const double alpha = influence.alpha.value_or(learner.alpha);
  auto trained = train(map, classes, learner, [&](std::span<const Transition> episode) {
    update_predictors(ips, episode, map, influence, alpha);
  });
  return {std::move(trained.agent), std::move(ips), std::move(trained.log)};
}

}  // namespace whynot
