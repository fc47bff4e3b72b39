#pragma once

#include <nlohmann/json.hpp>

#include "whynot/explainer.hpp"
#include "whynot/faithfulness.hpp"
#include "whynot/rollout.hpp"
#include "whynot/value_function.hpp"

namespace whynot {

/// Tables: {backing: "table", states, default, rows: [[state, [up, down, left, right]], ...]}
/// listing only rows that differ from the default, in ascending state order.
/// Approximators: {backing: "approximator", width, height, hidden, w1, b1, w2, b2, visited}.
nlohmann::json to_json(const ValueFunction& v);
/// Throws CorruptFile.
ValueFunction value_function_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ExplanationStructure& s, const RewardClassSet& classes);
nlohmann::json to_json(const Trajectory& t);
nlohmann::json to_json(const FaithfulnessReport& r);
nlohmann::json to_json(const EnvState& s);

}  // namespace whynot
