#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "whynot/gridworld.hpp"
#include "whynot/influence.hpp"
#include "whynot/rollout.hpp"

namespace whynot {

enum class ExplanationMode { Aggregated, Local };
enum class Dominance { None, A, U };
enum class LocalMethod { MaxSet, TopMeans };

std::string_view to_string(ExplanationMode m) noexcept;
std::string_view to_string(Dominance d) noexcept;
std::string_view to_string(LocalMethod m) noexcept;
std::optional<ExplanationMode> parse_explanation_mode(std::string_view text) noexcept;

struct ClassStats {
  int class_id = 0;
  double mean_a = 0.0;
  double mean_u = 0.0;
  Dominance dominant = Dominance::None;

  friend bool operator==(const ClassStats&, const ClassStats&) = default;
};

struct LocalTop {
  std::vector<int> set_a;
  std::vector<int> set_u;
  LocalMethod method = LocalMethod::MaxSet;

  friend bool operator==(const LocalTop&, const LocalTop&) = default;
};

/// Language-neutral comparison of the agent's trajectory (A) against the
/// counterfactual (U).
struct ExplanationStructure {
  ExplanationMode mode = ExplanationMode::Aggregated;
  std::vector<ClassStats> per_class;  // ascending class id
  std::optional<LocalTop> local;      // Local mode only
  bool empty = true;

  friend bool operator==(const ExplanationStructure&, const ExplanationStructure&) = default;
};

/// Classes whose means differ by at most ratio * max(|mean_a|, |mean_u|, floor)
/// are left out of the explanation.
struct ExclusionRule {
  double ratio = 0.05;
  double floor = 1e-6;

  friend bool operator==(const ExclusionRule&, const ExclusionRule&) = default;
};

Dominance compare_means(double mean_a, double mean_u, const ExclusionRule& rule) noexcept;

/// Mean over the steps of max_a U_c(s, a). Throws EmptyTrajectory.
double trajectory_class_mean(std::span<const TrajectoryStep> steps, const InfluencePredictor& ip);
double trajectory_class_mean(const Trajectory& traj, const InfluencePredictor& ip);

ExplanationStructure aggregated_explanation(const Trajectory& traj_a, const Trajectory& traj_u,
                                            std::span<const InfluencePredictor> ips,
                                            const ExclusionRule& rule = {});

/// Per-segment sets of classes attaining the per-state maximum; when the two
/// sets coincide, switches to the top three classes by segment mean.
ExplanationStructure local_explanation(const Segment& seg_a, const Segment& seg_u,
                                       std::span<const InfluencePredictor> ips,
                                       const ExclusionRule& rule = {});

enum class Person { Third, First };

struct ClassPhrases {
  std::string display_name;
  std::string consequence;
  SignMode sign = SignMode::Negative;

  friend bool operator==(const ClassPhrases&, const ClassPhrases&) = default;
};

/// Names, phrases and sentence templates. Templates accept the placeholders
/// {action}, {other}, {class}, {other_class} and {consequence}.
struct Lexicon {
  std::map<int, ClassPhrases> classes;
  std::map<std::string, std::string> actions;    // "up" -> "up"
  std::map<std::string, std::string> templates;  // see default_templates()
  Person person = Person::Third;

  static Lexicon from_classes(const RewardClassSet& classes, Person person = Person::Third);
  /// Throws MissingLexiconEntry when a class lacks either phrase.
  void validate(const RewardClassSet& classes) const;

  friend bool operator==(const Lexicon&, const Lexicon&) = default;
};

inline constexpr std::string_view kEquivalentSentence = "Both choices look equivalent to me.";

std::map<std::string, std::string> default_templates(Person person);

/// Key-value lexicon text: `key = value` lines, `;` comments. Keys:
/// `person`, `class.<id|name>.display`, `class.<id|name>.consequence`,
/// `action.<name>`, `template.<name>`. Unlisted entries keep `base` values.
Lexicon parse_lexicon(std::string_view text, const RewardClassSet& classes, Lexicon base);

/// Deterministic template fill; one sentence per differentiating class in
/// class-id order. Throws MissingLexiconEntry.
std::string render(const ExplanationStructure& structure, const Lexicon& lexicon,
                   Action action_a, Action action_u);

}  // namespace whynot
