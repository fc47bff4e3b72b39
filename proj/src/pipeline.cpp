#include "whynot/pipeline.hpp"

#include <algorithm>

#include "whynot/error.hpp"

namespace whynot {

Model train_model(const GridMap& map, const ExperimentConfig& cfg) {
  Model m;
  if (cfg.learner.episodes == 0) {
    m.agent = make_value_function(map, cfg.learner.backing, cfg.learner.hidden_units,
                                  cfg.learner.seed);
    m.ips = make_predictors(map, cfg.classes, cfg.influence, cfg.learner.seed);
    return m;
  }
  auto result = cotrain(map, cfg.classes, cfg.learner, cfg.influence);
  m.agent = std::move(result.agent);
  m.ips = std::move(result.ips);
  m.episodes_run = cfg.learner.episodes;
  m.trained = true;
  return m;
}

TrainingSummary summarize(const GridMap& map, const ExperimentConfig& cfg, const Model& model) {
  TrainingSummary s;
  s.episodes = model.episodes_run;
  s.success_rate = greedy_success_rate(map, cfg.classes, model.agent, 100, cfg.learner.max_steps);
  for (const auto& ip : model.ips) s.residuals.emplace_back(ip.class_id, bellman_residual(ip));
  return s;
}

Model model_from_checkpoint(const Checkpoint& cp, const GridMap& map) {
  Model m;
  m.agent = cp.agent;
  m.ips = restore_predictors(cp, map);
  m.episodes_run = cp.episodes_run;
  m.trained = cp.trained;
  return m;
}

ExplainResult explain(const GridMap& map, const ExperimentConfig& cfg, const Model& model,
                      const ExplainRequest& request) {
  if (request.counterfactual.empty()) {
    throw Error(ErrorCode::ValidationError, "counterfactual actions must not be empty",
                "counterfactual_actions");
  }
  ExplainResult out;
  if (request.agent_action) {
    const Action forced[] = {*request.agent_action};
    out.traj_a = rollout_counterfactual(map, cfg.classes, model.agent, request.at, forced);
    out.traj_a.origin = Origin::Agent;
  } else {
    out.traj_a = rollout_greedy(map, cfg.classes, model.agent, request.at);
  }
  out.traj_u =
      rollout_counterfactual(map, cfg.classes, model.agent, request.at, request.counterfactual);
  out.action_a = out.traj_a.steps.empty() ? model.agent.greedy(map.key(request.at.position))
                                          : out.traj_a.steps.front().action;
  out.action_u = request.counterfactual.front();

  auto actions = [](const Trajectory& t) {
    std::vector<Action> a;
    for (const auto& s : t.steps) a.push_back(s.action);
    return a;
  };
  if (out.traj_a.steps.empty() || out.traj_u.steps.empty() ||
      actions(out.traj_a) == actions(out.traj_u)) {
    out.structure.mode = request.mode;
    out.structure.empty = true;
  } else if (request.mode == ExplanationMode::Local) {
    const auto seg_a = make_segment(out.traj_a, 0, cfg.explain.extra_steps);
    const auto seg_u = make_segment(out.traj_u, 0, cfg.explain.extra_steps);
    out.structure = local_explanation(seg_a, seg_u, model.ips, cfg.explain.exclusion);
  } else {
    out.structure = aggregated_explanation(out.traj_a, out.traj_u, model.ips, cfg.explain.exclusion);
  }
  out.text = render(out.structure, cfg.lexicon, out.action_a, out.action_u);
  return out;
}

std::vector<std::vector<std::optional<double>>> heatmap(const GridMap& map, const ValueFunction& v) {
  std::vector<std::vector<std::optional<double>>> grid(
      static_cast<std::size_t>(map.height()),
      std::vector<std::optional<double>>(static_cast<std::size_t>(map.width())));
  for (int y = 0; y < map.height(); ++y) {
    for (int x = 0; x < map.width(); ++x) {
      const Position p{x, y};
      if (!map.is_wall(p)) grid[y][x] = v.max_value(map.key(p));
    }
  }
  return grid;
}

const ValueFunction* find_model(const Model& model, const RewardClassSet& classes,
                                const std::string& name) {
  if (name == "agent") return &model.agent;
  std::optional<int> id = classes.find(name);
  if (!id) {
    try {
      std::size_t used = 0;
      const int n = std::stoi(name, &used);
      if (used == name.size()) id = n;
    } catch (const std::exception&) {
    }
  }
  if (!id) return nullptr;
  for (const auto& ip : model.ips) {
    if (ip.class_id == *id) return &ip.values;
  }
  return nullptr;
}

}  // namespace whynot
