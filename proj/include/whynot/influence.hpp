#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <vector>

#include "whynot/gridworld.hpp"
#include "whynot/learner.hpp"
#include "whynot/value_function.hpp"

namespace whynot {

// Magnitude trains on |r^c|; Signed keeps the sign (for mixed-sign classes).
enum class InfluenceMode { Magnitude, Signed };
enum class UpdateCadence { EpisodePass, Minibatch };

std::string_view to_string(InfluenceMode m) noexcept;
std::string_view to_string(UpdateCadence c) noexcept;

/// A transition whose reward has already been routed to one class.
struct FilteredTransition {
  StateKey state{};
  Action action = Action::Up;
  double reward = 0.0;
  StateKey next{};
  bool terminal = false;

  friend bool operator==(const FilteredTransition&, const FilteredTransition&) = default;
};

/// Fixed-capacity ring with FIFO eviction and uniform sampling with
/// replacement.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 50000);

  void push(const FilteredTransition& t);
  std::size_t size() const noexcept { return entries_.size(); }
  std::size_t capacity() const noexcept { return capacity_; }
  bool empty() const noexcept { return entries_.empty(); }
  // i = 0 is the oldest retained entry.
  const FilteredTransition& at(std::size_t i) const;
  const FilteredTransition& sample(Rng& rng) const;

 private:
  std::size_t capacity_;
  std::size_t head_ = 0;  // next slot to overwrite once full
  std::vector<FilteredTransition> entries_;
};

struct ClassInfluenceOverride {
  std::optional<double> gamma;
  std::optional<InfluenceMode> mode;
  friend bool operator==(const ClassInfluenceOverride&, const ClassInfluenceOverride&) = default;
};

struct InfluenceConfig {
  double gamma = 0.5;
  std::optional<double> alpha;  // defaults to the learner's alpha
  std::size_t capacity = 50000;
  UpdateCadence cadence = UpdateCadence::EpisodePass;
  int batch_size = 64;
  Backing backing = Backing::Table;
  int hidden_units = 32;
  bool parallel = false;
  std::map<int, ClassInfluenceOverride> per_class;

  void validate() const;
  double gamma_for(int class_id) const;
  InfluenceMode mode_for(const RewardClass& c) const;

  friend bool operator==(const InfluenceConfig&, const InfluenceConfig&) = default;
};

struct InfluencePredictor {
  int class_id = 0;
  SignMode sign = SignMode::Negative;
  InfluenceMode mode = InfluenceMode::Magnitude;
  double gamma = 0.5;
  ValueFunction values;
  ReplayBuffer buffer;
  Rng rng;
};

/// Reward routed to class_id: |r| (Magnitude) or r (Signed) when the
/// transition's reward is that class's, otherwise 0.
double filter_reward(const Transition& t, int class_id, InfluenceMode mode);

FilteredTransition filter_transition(const Transition& t, const GridMap& map, int class_id,
                                     InfluenceMode mode);

/// U_c(s,a) += alpha * (r_c + gamma_c * max_a' U_c(s',a') * (1 - terminal) - U_c(s,a))
void influence_update(InfluencePredictor& ip, const FilteredTransition& t, double alpha);

/// max_a U_c(s, a)
double influence_value(const InfluencePredictor& ip, StateKey s);

/// Max absolute Bellman residual over the predictor's buffer.
double bellman_residual(const InfluencePredictor& ip);

/// One predictor per reward class, in class-id order.
std::vector<InfluencePredictor> make_predictors(const GridMap& map, const RewardClassSet& classes,
                                                const InfluenceConfig& cfg,
                                                std::uint64_t seed);

struct CotrainResult {
  ValueFunction agent;
  std::vector<InfluencePredictor> ips;
  TransitionLog log;
};

/// Trains the agent exactly as train() does while feeding every finished
/// episode to the predictors before the agent's update. The agent never
/// reads a predictor.
CotrainResult cotrain(const GridMap& map, const RewardClassSet& classes,
                      const LearnerConfig& learner, const InfluenceConfig& influence);

/// Routes one episode into every buffer and runs each predictor's update pass.
void update_predictors(std::vector<InfluencePredictor>& ips, std::span<const Transition> episode,
                       const GridMap& map, const InfluenceConfig& cfg, double alpha);

}  // namespace whynot
