#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "whynot/checkpoint.hpp"
#include "whynot/config.hpp"
#include "whynot/explainer.hpp"
#include "whynot/gridworld.hpp"
#include "whynot/influence.hpp"
#include "whynot/rollout.hpp"

namespace whynot {

/// Trained artifacts for one map.
struct Model {
  ValueFunction agent;
  std::vector<InfluencePredictor> ips;
  int episodes_run = 0;
  bool trained = false;
};

struct TrainingSummary {
  int episodes = 0;
  double success_rate = 0.0;
  std::vector<std::pair<int, double>> residuals;  // (class id, max Bellman residual)
};

/// Co-trains on `map`. episodes = 0 yields an untrained model.
Model train_model(const GridMap& map, const ExperimentConfig& cfg);
TrainingSummary summarize(const GridMap& map, const ExperimentConfig& cfg, const Model& model);

Model model_from_checkpoint(const Checkpoint& cp, const GridMap& map);

struct ExplainRequest {
  EnvState at;
  std::optional<Action> agent_action;  // forces the first step of trajectory A
  std::vector<Action> counterfactual;
  ExplanationMode mode = ExplanationMode::Aggregated;
};

struct ExplainResult {
  ExplanationStructure structure;
  std::string text;
  Trajectory traj_a;
  Trajectory traj_u;
  Action action_a = Action::Up;
  Action action_u = Action::Up;
};

/// Rolls out both trajectories from `at` and compares them. Identical action
/// sequences short-circuit to the empty structure.
ExplainResult explain(const GridMap& map, const ExperimentConfig& cfg, const Model& model,
                      const ExplainRequest& request);

/// Row-major grid (height rows of width entries) of max_a values; walls are
/// nullopt.
std::vector<std::vector<std::optional<double>>> heatmap(const GridMap& map, const ValueFunction& v);

/// "agent", a class id or a class name. nullptr when nothing matches.
const ValueFunction* find_model(const Model& model, const RewardClassSet& classes,
                                const std::string& name);

}  // namespace whynot
