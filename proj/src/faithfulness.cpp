#include "whynot/faithfulness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <sstream>

#include "whynot/error.hpp"

namespace whynot {

bool counts_as_negative(const InfluencePredictor& ip) noexcept {
  return ip.mode == InfluenceMode::Magnitude && ip.sign == SignMode::Negative;
}

ActionValues combined_values(StateKey s, std::span<const InfluencePredictor> ips) {
  ActionValues total = ActionValues::Zero();
  for (const auto& ip : ips) {
    if (counts_as_negative(ip)) {
      total -= ip.values.values(s);
    } else {
      total += ip.values.values(s);
    }
  }
  return total;
}

Action aggregate_action(StateKey s, std::span<const InfluencePredictor> ips) {
  return greedy_action(combined_values(s, ips));
}

double criticality(StateKey s, std::span<const InfluencePredictor> ips) {
  double best = 0.0;
  for (const auto& ip : ips) best = std::max(best, ip.values.values(s).cwiseAbs().maxCoeff());
  return best;
}

AgreementResult agreement(const ValueFunction& policy, std::span<const InfluencePredictor> ips,
                          std::span<const StateKey> states, double threshold) {
  if (!(threshold >= 0.0)) {
    throw Error(ErrorCode::ValidationError, "threshold must be non-negative", "thresholds");
  }
  AgreementResult out;
  std::size_t agree = 0;
  for (StateKey s : states) {
    if (criticality(s, ips) < threshold) continue;
    ++out.evaluated;
    if (aggregate_action(s, ips) == policy.greedy(s)) ++agree;
  }
  out.coverage = states.empty() ? 0.0
                                : static_cast<double>(out.evaluated) /
                                      static_cast<double>(states.size());
  if (out.evaluated > 0) {
    out.agreement = static_cast<double>(agree) / static_cast<double>(out.evaluated);
  }
  return out;
}

Eigen::MatrixXd influence_features(std::span<const InfluencePredictor> ips,
                                   std::span<const StateKey> states) {
  Eigen::MatrixXd f(static_cast<Eigen::Index>(states.size()),
                    static_cast<Eigen::Index>(ips.size()) * kActionCount);
  for (std::size_t r = 0; r < states.size(); ++r) {
    for (std::size_t c = 0; c < ips.size(); ++c) {
      f.block<1, kActionCount>(static_cast<Eigen::Index>(r),
                               static_cast<Eigen::Index>(c) * kActionCount) =
          ips[c].values.values(states[r]);
    }
  }
  return f;
}

double knn_probe(const Eigen::MatrixXd& features, std::span<const Action> labels, int k) {
  const auto n = features.rows();
  if (static_cast<std::size_t>(n) != labels.size()) {
    throw Error(ErrorCode::LengthMismatch, "feature rows and labels differ in length");
  }
  if (k < 1 || n <= k) {
    throw Error(ErrorCode::TooFewSamples, "leave-one-out k-NN needs more than k samples");
  }
  std::vector<std::pair<double, Eigen::Index>> neighbours;
  neighbours.reserve(static_cast<std::size_t>(n));
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    neighbours.clear();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j == i) continue;
      neighbours.emplace_back((features.row(i) - features.row(j)).squaredNorm(), j);
    }
    std::partial_sort(neighbours.begin(), neighbours.begin() + k, neighbours.end());
    std::array<int, kActionCount> votes{};
    for (int m = 0; m < k; ++m) {
      ++votes[static_cast<std::size_t>(to_index(labels[static_cast<std::size_t>(neighbours[m].second)]))];
    }
    const int top = *std::max_element(votes.begin(), votes.end());
    Action predicted = Action::Up;
    for (int m = 0; m < k; ++m) {
      const Action l = labels[static_cast<std::size_t>(neighbours[m].second)];
      if (votes[static_cast<std::size_t>(to_index(l))] == top) {
        predicted = l;
        break;
      }
    }
    if (predicted == labels[static_cast<std::size_t>(i)]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(n);
}

std::vector<double> cumulative_ip_curve(const Trajectory& traj,
                                        std::span<const InfluencePredictor> ips) {
  std::vector<double> out;
  out.reserve(traj.size());
  for (const auto& s : traj.steps) out.push_back(combined_values(s.state, ips)(to_index(s.action)));
  return out;
}

std::vector<double> agent_value_curve(const Trajectory& traj, const ValueFunction& agent) {
  std::vector<double> out;
  out.reserve(traj.size());
  for (const auto& s : traj.steps) out.push_back(agent.value(s.state, s.action));
  return out;
}

RmspeResult rmspe(std::span<const double> predicted, std::span<const double> actual,
                  double near_zero) {
  if (predicted.size() != actual.size() || predicted.empty()) {
    throw Error(ErrorCode::LengthMismatch, "rmspe needs two non-empty series of equal length");
  }
  RmspeResult out;
  double sum = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    if (std::abs(actual[i]) < near_zero) {
      ++out.excluded;
      continue;
    }
    const double rel = (predicted[i] - actual[i]) / actual[i];
    sum += rel * rel;
    ++used;
  }
  if (used == 0) throw Error(ErrorCode::AllExcluded, "every reference value is near zero");
  out.percent = 100.0 * std::sqrt(sum / static_cast<double>(used));
  return out;
}

void FaithfulnessSettings::validate() const {
  for (double t : thresholds) {
    if (!(t >= 0.0)) {
      throw Error(ErrorCode::ValidationError, "thresholds must be non-negative",
                  "faithfulness.thresholds");
    }
  }
  if (k < 1) throw Error(ErrorCode::ValidationError, "k must be positive", "faithfulness.k");
  if (!(near_zero > 0.0)) {
    throw Error(ErrorCode::ValidationError, "near_zero must be positive", "faithfulness.near_zero");
  }
  if (runs < 0) throw Error(ErrorCode::ValidationError, "runs must be non-negative", "faithfulness.runs");
}

std::vector<StateKey> open_states(const GridMap& map) {
  std::vector<StateKey> out;
  for (Position p : map.open_cells()) out.push_back(map.key(p));
  return out;
}

std::vector<Position> varied_starts(const GridMap& map, int runs) {
  std::vector<Position> out;
  if (runs <= 0) return out;
  const auto want = static_cast<std::size_t>(runs);
  for (Position p : map.starts()) {
    if (out.size() == want) return out;
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  std::vector<Position> candidates;
  for (Position p : map.open_cells()) {
    if (!map.is_terminal(p) && std::find(out.begin(), out.end(), p) == out.end()) {
      candidates.push_back(p);
    }
  }
  const std::size_t missing = std::min(want - out.size(), candidates.size());
  for (std::size_t i = 0; i < missing; ++i) out.push_back(candidates[i * candidates.size() / missing]);
  return out;
}

FaithfulnessReport evaluate_faithfulness(const GridMap& map, const RewardClassSet& classes,
                                         const ValueFunction& agent,
                                         std::span<const InfluencePredictor> ips,
                                         const FaithfulnessSettings& settings) {
  settings.validate();
  FaithfulnessReport report;
  report.probe_k = settings.k;
  const auto states = open_states(map);
  report.states_evaluated = states.size();

  report.direct_agreement = agreement(agent, ips, states, 0.0).agreement.value_or(0.0);

  std::vector<InfluencePredictor> positives;
  for (const auto& ip : ips) {
    if (!counts_as_negative(ip)) positives.push_back(ip);
  }
  for (double t : settings.thresholds) {
    const auto all = agreement(agent, ips, states, t);
    report.threshold_curve.push_back({t, all.agreement, all.coverage});
    const auto pos = agreement(agent, positives, states, t);
    report.positive_only_curve.push_back({t, pos.agreement, pos.coverage});
  }

  std::vector<Action> labels;
  labels.reserve(states.size());
  for (StateKey s : states) labels.push_back(agent.greedy(s));
  if (states.size() > static_cast<std::size_t>(settings.k)) {
    report.probe_accuracy = knn_probe(influence_features(ips, states), labels, settings.k);
  }

  for (Position start : varied_starts(map, settings.runs)) {
    const auto traj = rollout_greedy(map, classes, agent, state_at(map, start));
    if (traj.terminated != Termination::Goal) {
      ++report.runs_skipped;
      continue;
    }
    const auto predicted = cumulative_ip_curve(traj, ips);
    const auto actual = agent_value_curve(traj, agent);
    try {
      const auto r = rmspe(predicted, actual, settings.near_zero);
      report.rmspe_per_run.push_back(r.percent);
      report.excluded_near_zero += r.excluded;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::AllExcluded) throw;
      report.excluded_near_zero += actual.size();
      ++report.runs_skipped;
    }
  }
  return report;
}

std::string threshold_curve_csv(const FaithfulnessReport& report) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,agreement,coverage,positive_only_agreement,positive_only_coverage\n";
  for (std::size_t i = 0; i < report.threshold_curve.size(); ++i) {
    const auto& a = report.threshold_curve[i];
    const auto& p = report.positive_only_curve[i];
    out << a.threshold << ',';
    if (a.agreement) out << *a.agreement;
    out << ',' << a.coverage << ',';
    if (p.agreement) out << *p.agreement;
    out << ',' << p.coverage << '\n';
  }
  return out.str();
}

}  // namespace whynot
