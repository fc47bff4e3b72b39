#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "whynot/explainer.hpp"
#include "whynot/faithfulness.hpp"
#include "whynot/gridworld.hpp"
#include "whynot/influence.hpp"
#include "whynot/learner.hpp"

namespace whynot {

struct ExplainSettings {
  ExclusionRule exclusion;
  int extra_steps = 5;

  friend bool operator==(const ExplainSettings&, const ExplainSettings&) = default;
};

/// Fully validated experiment description with defaults applied.
///
/// JSON sections and fields:
///   map:          {path | text}
///   classes:      [{id?, name, sign, display_name?, consequence?}]
///   learner:      {alpha, gamma, epsilon_start, epsilon_end, epsilon_decay_episodes,
///                  episodes, seed, max_steps, backing, hidden_units}
///   influence:    {gamma, alpha, capacity, cadence, batch_size, backing, hidden_units,
///                  parallel, per_class: {<name|id>: {gamma, mode}}}
///   explain:      {exclusion_ratio, absolute_floor, extra_steps, person, lexicon_path, lexicon}
///   faithfulness: {thresholds, k, near_zero, runs}
struct ExperimentConfig {
  std::string map_path;  // absolute; empty when the map was given inline
  std::string map_text;
  RewardClassSet classes;
  Lexicon lexicon;
  LearnerConfig learner;
  InfluenceConfig influence;
  ExplainSettings explain;
  FaithfulnessSettings faithfulness;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Relative paths resolve against base_dir. Throws ValidationError carrying
/// the dotted field path.
ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
ExperimentConfig parse_config_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
ExperimentConfig load_config(const std::filesystem::path& path);

/// Self-contained snapshot (map and lexicon inlined) accepted by parse_config.
nlohmann::json to_json(const ExperimentConfig& cfg);

std::string read_file(const std::filesystem::path& path);

}  // namespace whynot
