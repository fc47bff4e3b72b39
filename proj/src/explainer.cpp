#include "whynot/explainer.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <sstream>

#include "whynot/error.hpp"

namespace whynot {

std::string_view to_string(ExplanationMode m) noexcept {
  return m == ExplanationMode::Local ? "local" : "aggregated";
}

std::string_view to_string(Dominance d) noexcept {
  switch (d) {
    case Dominance::A: return "A";
    case Dominance::U: return "U";
    case Dominance::None: return "none";
  }
  return "none";
}

std::string_view to_string(LocalMethod m) noexcept {
  return m == LocalMethod::TopMeans ? "top_means" : "max_set";
}

std::optional<ExplanationMode> parse_explanation_mode(std::string_view text) noexcept {
  if (text == "aggregated") return ExplanationMode::Aggregated;
  if (text == "local") return ExplanationMode::Local;
  return std::nullopt;
}

Dominance compare_means(double mean_a, double mean_u, const ExclusionRule& rule) noexcept {
  const double scale = std::max({std::abs(mean_a), std::abs(mean_u), rule.floor});
  if (std::abs(mean_a - mean_u) <= rule.ratio * scale) return Dominance::None;
  return mean_a > mean_u ? Dominance::A : Dominance::U;
}

double trajectory_class_mean(std::span<const TrajectoryStep> steps, const InfluencePredictor& ip) {
  if (steps.empty()) throw Error(ErrorCode::EmptyTrajectory, "trajectory has no steps");
  double sum = 0.0;
  for (const auto& s : steps) sum += influence_value(ip, s.state);
  return sum / static_cast<double>(steps.size());
}

double trajectory_class_mean(const Trajectory& traj, const InfluencePredictor& ip) {
  return trajectory_class_mean(std::span<const TrajectoryStep>(traj.steps), ip);
}

namespace {

std::vector<ClassStats> class_stats(std::span<const TrajectoryStep> a,
                                    std::span<const TrajectoryStep> u,
                                    std::span<const InfluencePredictor> ips,
                                    const ExclusionRule& rule) {
  std::vector<ClassStats> stats;
  stats.reserve(ips.size());
  for (const auto& ip : ips) {
    ClassStats s{ip.class_id, trajectory_class_mean(a, ip), trajectory_class_mean(u, ip),
                 Dominance::None};
    s.dominant = compare_means(s.mean_a, s.mean_u, rule);
    stats.push_back(s);
  }
  std::sort(stats.begin(), stats.end(),
            [](const ClassStats& x, const ClassStats& y) { return x.class_id < y.class_id; });
  return stats;
}

bool all_excluded(const std::vector<ClassStats>& stats) {
  return std::all_of(stats.begin(), stats.end(),
                     [](const ClassStats& s) { return s.dominant == Dominance::None; });
}

// Classes attaining the per-state maximum anywhere in the segment; states
// where every predictor reads exactly zero carry no information and are skipped.
std::vector<int> max_set(std::span<const TrajectoryStep> steps,
                         std::span<const InfluencePredictor> ips) {
  std::vector<int> out;
  std::vector<double> vals(ips.size());
  for (const auto& s : steps) {
    for (std::size_t i = 0; i < ips.size(); ++i) vals[i] = influence_value(ips[i], s.state);
    if (std::all_of(vals.begin(), vals.end(), [](double v) { return v == 0.0; })) continue;
    const double best = *std::max_element(vals.begin(), vals.end());
    for (std::size_t i = 0; i < ips.size(); ++i) {
      if (vals[i] == best) out.push_back(ips[i].class_id);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<int> top_means(const std::vector<ClassStats>& stats, bool use_a) {
  std::vector<std::pair<double, int>> ranked;
  for (const auto& s : stats) ranked.emplace_back(use_a ? s.mean_a : s.mean_u, s.class_id);
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& x, const auto& y) {
    if (x.first != y.first) return x.first > y.first;
    return x.second < y.second;
  });
  std::vector<int> out;
  for (std::size_t i = 0; i < ranked.size() && i < 3; ++i) out.push_back(ranked[i].second);
  return out;
}

}  // namespace

ExplanationStructure aggregated_explanation(const Trajectory& traj_a, const Trajectory& traj_u,
                                            std::span<const InfluencePredictor> ips,
                                            const ExclusionRule& rule) {
  ExplanationStructure out;
  out.mode = ExplanationMode::Aggregated;
  out.per_class = class_stats(traj_a.steps, traj_u.steps, ips, rule);
  out.empty = all_excluded(out.per_class);
  return out;
}

ExplanationStructure local_explanation(const Segment& seg_a, const Segment& seg_u,
                                       std::span<const InfluencePredictor> ips,
                                       const ExclusionRule& rule) {
  ExplanationStructure out;
  out.mode = ExplanationMode::Local;
  out.per_class = class_stats(seg_a.steps(), seg_u.steps(), ips, rule);

  LocalTop top;
  top.set_a = max_set(seg_a.steps(), ips);
  top.set_u = max_set(seg_u.steps(), ips);
  if (top.set_a == top.set_u) {
    top.method = LocalMethod::TopMeans;
    top.set_a = top_means(out.per_class, true);
    top.set_u = top_means(out.per_class, false);
  }
  out.local = std::move(top);
  out.empty = all_excluded(out.per_class);
  return out;
}

std::map<std::string, std::string> default_templates(Person person) {
  if (person == Person::First) {
    return {
        {"negative.more_on_u", "If I go {action}, I fear I will {consequence}; going {other} feels safer."},
        {"negative.more_on_a", "If I go {action}, I am less likely to {consequence}, but going {other} is still my choice."},
        {"positive.more_on_u", "If I go {action}, I would be more likely to {consequence}, but going {other} is still my choice."},
        {"positive.more_on_a", "If I go {action}, I will be less likely to {consequence}; going {other} is better."},
        {"mixed.more_on_u", "If I go {action}, the {class} will work out better for me, but going {other} is still my choice."},
        {"mixed.more_on_a", "If I go {action}, the {class} will work out worse for me; going {other} is better."},
        {"local.max_set", "If I go {action}, the strongest nearby influence is the {class}; if I go {other}, it is the {other_class}."},
        {"local.top_means", "If I go {action}, the most influential nearby factors are the {class}; if I go {other}, they are the {other_class}."},
    };
  }
  return {
      {"negative.more_on_u", "If the agent goes {action}, it will pass through regions influenced by the {class}; going {other} feels safer."},
      {"negative.more_on_a", "If the agent goes {action}, it will pass through regions less influenced by the {class}; going {other} is still preferred."},
      {"positive.more_on_u", "If the agent goes {action}, it will pass through regions more influenced by the {class}; going {other} is still preferred."},
      {"positive.more_on_a", "If the agent goes {action}, it will pass through regions less influenced by the {class}; going {other} is better."},
      {"mixed.more_on_u", "If the agent goes {action}, the {class} will work out better along the way; going {other} is still preferred."},
      {"mixed.more_on_a", "If the agent goes {action}, the {class} will work out worse along the way; going {other} is better."},
      {"local.max_set", "If the agent goes {action}, the strongest nearby influence is the {class}; going {other}, it is the {other_class}."},
      {"local.top_means", "If the agent goes {action}, the most influential nearby factors are the {class}; going {other}, they are the {other_class}."},
  };
}

Lexicon Lexicon::from_classes(const RewardClassSet& classes, Person person) {
  Lexicon lex;
  lex.person = person;
  for (const auto& c : classes) {
    lex.classes[c.id] = {c.display_name.empty() ? c.name : c.display_name, c.consequence, c.sign};
  }
  for (Action a : kAllActions) lex.actions[std::string(to_string(a))] = std::string(to_string(a));
  lex.templates = default_templates(person);
  return lex;
}

void Lexicon::validate(const RewardClassSet& set) const {
  for (const auto& c : set) {
    auto it = classes.find(c.id);
    if (it == classes.end() || it->second.display_name.empty() || it->second.consequence.empty()) {
      throw Error(ErrorCode::MissingLexiconEntry, "lexicon lacks phrases for class '" + c.name + "'",
                  "classes[" + std::to_string(c.id) + "]");
    }
  }
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

int resolve_class(const std::string& ref, const RewardClassSet& classes) {
  if (auto by_name = classes.find(ref)) return *by_name;
  try {
    std::size_t used = 0;
    const int id = std::stoi(ref, &used);
    if (used == ref.size() && classes.contains(id)) return id;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::UnknownClass, "lexicon references unknown class '" + ref + "'");
}

std::string replace_all(std::string text, std::string_view key, std::string_view value) {
  for (std::size_t pos = text.find(key); pos != std::string::npos;
       pos = text.find(key, pos + value.size())) {
    text.replace(pos, key.size(), value);
  }
  return text;
}

}  // namespace

Lexicon parse_lexicon(std::string_view text, const RewardClassSet& classes, Lexicon base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  // Applied last so a later `person` line does not discard them.
  std::map<std::string, std::string> overrides;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t.front() == ';' || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ValidationError, "lexicon line " + std::to_string(lineno) + " lacks '='",
                  "lexicon");
    }
    const std::string key = trim(std::string_view(t).substr(0, eq));
    const std::string value = trim(std::string_view(t).substr(eq + 1));
    if (key == "person") {
      if (value == "first") {
        base.person = Person::First;
      } else if (value == "third") {
        base.person = Person::Third;
      } else {
        throw Error(ErrorCode::ValidationError, "person must be first or third", "lexicon.person");
      }
      base.templates = default_templates(base.person);
    } else if (key.rfind("class.", 0) == 0) {
      const auto dot = key.rfind('.');
      if (dot <= 6) throw Error(ErrorCode::ValidationError, "bad lexicon key '" + key + "'", "lexicon");
      const int id = resolve_class(key.substr(6, dot - 6), classes);
      const std::string field = key.substr(dot + 1);
      auto& entry = base.classes[id];
      entry.sign = classes[id].sign;
      if (field == "display") {
        entry.display_name = value;
      } else if (field == "consequence") {
        entry.consequence = value;
      } else {
        throw Error(ErrorCode::ValidationError, "bad lexicon key '" + key + "'", "lexicon");
      }
    } else if (key.rfind("action.", 0) == 0) {
      const auto a = parse_action(key.substr(7));
      if (!a) throw Error(ErrorCode::ValidationError, "bad action key '" + key + "'", "lexicon");
      base.actions[std::string(to_string(*a))] = value;
    } else if (key.rfind("template.", 0) == 0) {
      overrides[key.substr(9)] = value;
    } else {
      throw Error(ErrorCode::ValidationError, "unknown lexicon key '" + key + "'", "lexicon");
    }
  }
  for (auto& [k, v] : overrides) base.templates[k] = std::move(v);
  return base;
}

namespace {

const ClassPhrases& phrases(const Lexicon& lex, int id) {
  auto it = lex.classes.find(id);
  if (it == lex.classes.end() || it->second.display_name.empty()) {
    throw Error(ErrorCode::MissingLexiconEntry, "no lexicon entry for class " + std::to_string(id));
  }
  return it->second;
}

const std::string& template_for(const Lexicon& lex, const std::string& key) {
  auto it = lex.templates.find(key);
  if (it == lex.templates.end()) {
    throw Error(ErrorCode::MissingLexiconEntry, "no template '" + key + "'");
  }
  return it->second;
}

std::string action_word(const Lexicon& lex, Action a) {
  auto it = lex.actions.find(std::string(to_string(a)));
  return it == lex.actions.end() ? std::string(to_string(a)) : it->second;
}

std::string join_names(const Lexicon& lex, const std::vector<int>& ids) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out += (i + 1 == ids.size()) ? " and the " : ", the ";
    out += phrases(lex, ids[i]).display_name;
  }
  return out;
}

std::string fill(std::string tpl, const std::string& action, const std::string& other,
                 const std::string& cls, const std::string& other_cls,
                 const std::string& consequence) {
  tpl = replace_all(std::move(tpl), "{action}", action);
  tpl = replace_all(std::move(tpl), "{other}", other);
  tpl = replace_all(std::move(tpl), "{other_class}", other_cls);
  tpl = replace_all(std::move(tpl), "{class}", cls);
  tpl = replace_all(std::move(tpl), "{consequence}", consequence);
  return tpl;
}

}  // namespace

std::string render(const ExplanationStructure& structure, const Lexicon& lexicon, Action action_a,
                   Action action_u) {
  if (structure.empty) return std::string(kEquivalentSentence);
  const std::string act_u = action_word(lexicon, action_u);
  const std::string act_a = action_word(lexicon, action_a);

  if (structure.mode == ExplanationMode::Local && structure.local) {
    const auto& top = *structure.local;
    const std::string key =
        top.method == LocalMethod::MaxSet ? "local.max_set" : "local.top_means";
    return fill(template_for(lexicon, key), act_u, act_a, join_names(lexicon, top.set_u),
                join_names(lexicon, top.set_a), "");
  }

  std::string out;
  for (const auto& s : structure.per_class) {
    if (s.dominant == Dominance::None) continue;
    const ClassPhrases& p = phrases(lexicon, s.class_id);
    const char* family = p.sign == SignMode::Positive   ? "positive"
                         : p.sign == SignMode::Negative ? "negative"
                                                        : "mixed";
    const std::string key =
        std::string(family) + (s.dominant == Dominance::U ? ".more_on_u" : ".more_on_a");
    if (!out.empty()) out += ' ';
    out += fill(template_for(lexicon, key), act_u, act_a, p.display_name, "", p.consequence);
  }
  return out;
}

}  // namespace whynot
