#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "whynot/gridworld.hpp"
#include "whynot/influence.hpp"
#include "whynot/rollout.hpp"
#include "whynot/value_function.hpp"

namespace whynot {

/// Whether an ip's values are subtracted in the combined decision: magnitude
/// predictors of negative classes are; positive and signed ones are added.
bool counts_as_negative(const InfluencePredictor& ip) noexcept;

/// sum_P U_c(s, .) - sum_N U_c(s, .)
ActionValues combined_values(StateKey s, std::span<const InfluencePredictor> ips);

/// argmax_a of combined_values, ties toward the lowest action index.
Action aggregate_action(StateKey s, std::span<const InfluencePredictor> ips);

/// max over ips of max_a |U_c(s, a)|
double criticality(StateKey s, std::span<const InfluencePredictor> ips);

struct AgreementResult {
  std::optional<double> agreement;  // nullopt: NoStatesAboveThreshold
  double coverage = 0.0;
  std::size_t evaluated = 0;
};

/// Agreement between aggregate_action and the policy's greedy action over
/// states whose criticality reaches `threshold`.
AgreementResult agreement(const ValueFunction& policy, std::span<const InfluencePredictor> ips,
                          std::span<const StateKey> states, double threshold);

/// Rows: one per state, concatenating U_c(s, .) for every predictor.
Eigen::MatrixXd influence_features(std::span<const InfluencePredictor> ips,
                                   std::span<const StateKey> states);

/// Leave-one-out k-nearest-neighbour accuracy (Euclidean distance; ties in
/// distance go to the lower row, vote ties to the nearest tied label).
/// Throws TooFewSamples unless rows > k.
double knn_probe(const Eigen::MatrixXd& features, std::span<const Action> labels, int k);

/// Per step: combined predictor value at the action taken.
std::vector<double> cumulative_ip_curve(const Trajectory& traj,
                                        std::span<const InfluencePredictor> ips);
/// Per step: Q(s, a_taken).
std::vector<double> agent_value_curve(const Trajectory& traj, const ValueFunction& agent);

struct RmspeResult {
  double percent = 0.0;
  std::size_t excluded = 0;
};

/// 100 * sqrt(mean(((p - y) / y)^2)) over indices with |y| >= near_zero.
/// Throws LengthMismatch or AllExcluded.
RmspeResult rmspe(std::span<const double> predicted, std::span<const double> actual,
                  double near_zero = 1e-3);

struct ThresholdPoint {
  double threshold = 0.0;
  std::optional<double> agreement;
  double coverage = 0.0;
};

struct FaithfulnessSettings {
  std::vector<double> thresholds{0.0, 0.05, 0.1, 0.2};
  int k = 5;
  double near_zero = 1e-3;
  int runs = 9;

  void validate() const;
  friend bool operator==(const FaithfulnessSettings&, const FaithfulnessSettings&) = default;
};

struct FaithfulnessReport {
  double direct_agreement = 0.0;
  std::optional<double> probe_accuracy;
  std::string probe = "knn-loo";
  int probe_k = 5;
  std::vector<ThresholdPoint> threshold_curve;
  std::vector<ThresholdPoint> positive_only_curve;
  std::vector<double> rmspe_per_run;
  std::size_t runs_skipped = 0;
  std::size_t states_evaluated = 0;
  std::size_t excluded_near_zero = 0;
};

/// Starting cells for test runs: the map's own starts first, then open,
/// non-terminal cells evenly spaced in row-major order.
std::vector<Position> varied_starts(const GridMap& map, int runs);

std::vector<StateKey> open_states(const GridMap& map);

FaithfulnessReport evaluate_faithfulness(const GridMap& map, const RewardClassSet& classes,
                                         const ValueFunction& agent,
                                         std::span<const InfluencePredictor> ips,
                                         const FaithfulnessSettings& settings = {});

/// CSV with header `threshold,agreement,coverage,positive_only_agreement,positive_only_coverage`.
std::string threshold_curve_csv(const FaithfulnessReport& report);

}  // namespace whynot
