#include "whynot/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "whynot/error.hpp"

namespace whynot {

using nlohmann::json;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot read '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

namespace {

[[noreturn]] void invalid(const std::string& field, const std::string& message) {
  throw Error(ErrorCode::ValidationError, field + ": " + message, field);
}

void only_keys(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) invalid(where, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, _] : obj.items()) {
    if (!allowed.count(k)) invalid(where + "." + k, "unknown field");
  }
}

template <typename T>
T get(const json& obj, const std::string& where, const char* key, T fallback) {
  if (!obj.contains(key) || obj.at(key).is_null()) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key, "wrong type");
  }
}

template <typename T>
std::optional<T> get_opt(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key) || obj.at(key).is_null()) return std::nullopt;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key, "wrong type");
  }
}

Backing parse_backing(const std::string& s, const std::string& field) {
  if (s == "table") return Backing::Table;
  if (s == "approximator") return Backing::Approximator;
  invalid(field, "must be 'table' or 'approximator'");
}

std::string_view backing_name(Backing b) { return b == Backing::Table ? "table" : "approximator"; }

std::string default_consequence(SignMode sign, const std::string& display) {
  switch (sign) {
    case SignMode::Positive: return "reach the " + display;
    case SignMode::Negative: return "run into the " + display;
    case SignMode::Mixed: return "be affected by the " + display;
  }
  return display;
}

RewardClassSet parse_classes(const json& doc) {
  std::vector<RewardClass> classes;
  if (doc.contains("classes")) {
    const json& arr = doc.at("classes");
    if (!arr.is_array()) invalid("classes", "expected an array");
    std::set<int> used;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string where = "classes[" + std::to_string(i) + "]";
      only_keys(arr[i], where, {"id", "name", "sign", "display_name", "consequence"});
      RewardClass c;
      c.name = get<std::string>(arr[i], where, "name", "");
      if (c.name.empty()) invalid(where + ".name", "required");
      const auto sign = parse_sign_mode(get<std::string>(arr[i], where, "sign", "negative"));
      if (!sign) invalid(where + ".sign", "must be positive, negative or mixed");
      c.sign = *sign;
      c.id = get<int>(arr[i], where, "id", -1);
      c.display_name = get<std::string>(arr[i], where, "display_name", c.name);
      c.consequence =
          get<std::string>(arr[i], where, "consequence", default_consequence(c.sign, c.display_name));
      classes.push_back(std::move(c));
    }
  }
  // Classes without explicit ids take the lowest free ids in declaration order.
  std::set<int> taken;
  for (const auto& c : classes) {
    if (c.id >= 0 && !taken.insert(c.id).second) invalid("classes", "duplicate class id");
  }
  auto next_free = [&taken] {
    int id = 0;
    while (taken.count(id)) ++id;
    taken.insert(id);
    return id;
  };
  for (auto& c : classes) {
    if (c.id < 0) c.id = next_free();
  }
  const bool has_goal = std::any_of(classes.begin(), classes.end(),
                                    [](const RewardClass& c) { return c.sign == SignMode::Positive; });
  if (!has_goal) {
    RewardClass goal{next_free(), "goal", SignMode::Positive, "reach the green goal", "green goal"};
    classes.push_back(std::move(goal));
  }
  return RewardClassSet(std::move(classes));
}

LearnerConfig parse_learner(const json& doc) {
  LearnerConfig cfg;
  if (!doc.contains("learner")) return cfg;
  const json& s = doc.at("learner");
  const std::string w = "learner";
  only_keys(s, w, {"alpha", "gamma", "epsilon_start", "epsilon_end", "epsilon_decay_episodes",
                   "episodes", "seed", "max_steps", "backing", "hidden_units"});
  cfg.alpha = get(s, w, "alpha", cfg.alpha);
  cfg.gamma = get(s, w, "gamma", cfg.gamma);
  cfg.epsilon_start = get(s, w, "epsilon_start", cfg.epsilon_start);
  cfg.epsilon_end = get(s, w, "epsilon_end", cfg.epsilon_end);
  cfg.epsilon_decay_episodes = get(s, w, "epsilon_decay_episodes", cfg.epsilon_decay_episodes);
  cfg.episodes = get(s, w, "episodes", cfg.episodes);
  cfg.seed = get(s, w, "seed", cfg.seed);
  cfg.max_steps = get_opt<int>(s, w, "max_steps");
  cfg.backing = parse_backing(get<std::string>(s, w, "backing", "table"), "learner.backing");
  cfg.hidden_units = get(s, w, "hidden_units", cfg.hidden_units);
  return cfg;
}

InfluenceConfig parse_influence(const json& doc, const RewardClassSet& classes) {
  InfluenceConfig cfg;
  if (!doc.contains("influence")) return cfg;
  const json& s = doc.at("influence");
  const std::string w = "influence";
  only_keys(s, w, {"gamma", "alpha", "capacity", "cadence", "batch_size", "backing",
                   "hidden_units", "parallel", "per_class"});
  cfg.gamma = get(s, w, "gamma", cfg.gamma);
  cfg.alpha = get_opt<double>(s, w, "alpha");
  const auto capacity = get<long long>(s, w, "capacity", static_cast<long long>(cfg.capacity));
  if (capacity <= 0) invalid("influence.capacity", "must be positive");
  cfg.capacity = static_cast<std::size_t>(capacity);
  const std::string cadence = get<std::string>(s, w, "cadence", "episode_pass");
  if (cadence == "episode_pass") {
    cfg.cadence = UpdateCadence::EpisodePass;
  } else if (cadence == "minibatch") {
    cfg.cadence = UpdateCadence::Minibatch;
  } else {
    invalid("influence.cadence", "must be 'episode_pass' or 'minibatch'");
  }
  cfg.batch_size = get(s, w, "batch_size", cfg.batch_size);
  cfg.backing = parse_backing(get<std::string>(s, w, "backing", "table"), "influence.backing");
  cfg.hidden_units = get(s, w, "hidden_units", cfg.hidden_units);
  cfg.parallel = get(s, w, "parallel", cfg.parallel);
  if (s.contains("per_class")) {
    const json& pc = s.at("per_class");
    if (!pc.is_object()) invalid("influence.per_class", "expected an object");
    for (const auto& [ref, o] : pc.items()) {
      const std::string where = "influence.per_class." + ref;
      std::optional<int> id = classes.find(ref);
      if (!id) {
        try {
          std::size_t used = 0;
          const int n = std::stoi(ref, &used);
          if (used == ref.size() && classes.contains(n)) id = n;
        } catch (const std::exception&) {
        }
      }
      if (!id) invalid(where, "unknown class");
      only_keys(o, where, {"gamma", "mode"});
      ClassInfluenceOverride ov;
      ov.gamma = get_opt<double>(o, where, "gamma");
      if (auto m = get_opt<std::string>(o, where, "mode")) {
        if (*m == "magnitude") {
          ov.mode = InfluenceMode::Magnitude;
        } else if (*m == "signed") {
          ov.mode = InfluenceMode::Signed;
        } else {
          invalid(where + ".mode", "must be 'magnitude' or 'signed'");
        }
      }
      cfg.per_class[*id] = ov;
    }
  }
  return cfg;
}

Lexicon lexicon_from_object(const json& o, const RewardClassSet& classes, Lexicon base) {
  const std::string w = "explain.lexicon";
  only_keys(o, w, {"person", "classes", "actions", "templates"});
  const std::string person = get<std::string>(o, w, "person", "third");
  if (person != "first" && person != "third") invalid(w + ".person", "must be first or third");
  base.person = person == "first" ? Person::First : Person::Third;
  base.templates = default_templates(base.person);
  if (o.contains("classes")) {
    for (const auto& [ref, entry] : o.at("classes").items()) {
      std::optional<int> id = classes.find(ref);
      if (!id) {
        try {
          id = std::stoi(ref);
        } catch (const std::exception&) {
        }
      }
      if (!id || !classes.contains(*id)) invalid(w + ".classes." + ref, "unknown class");
      auto& p = base.classes[*id];
      p.sign = classes[*id].sign;
      p.display_name = get<std::string>(entry, w, "display_name", p.display_name);
      p.consequence = get<std::string>(entry, w, "consequence", p.consequence);
    }
  }
  if (o.contains("actions")) {
    for (const auto& [k, v] : o.at("actions").items()) base.actions[k] = v.get<std::string>();
  }
  if (o.contains("templates")) {
    for (const auto& [k, v] : o.at("templates").items()) base.templates[k] = v.get<std::string>();
  }
  return base;
}

ExplainSettings parse_explain(const json& doc, const RewardClassSet& classes,
                              const std::filesystem::path& base_dir, Lexicon& lexicon) {
  ExplainSettings cfg;
  lexicon = Lexicon::from_classes(classes);
  if (!doc.contains("explain")) return cfg;
  const json& s = doc.at("explain");
  const std::string w = "explain";
  only_keys(s, w, {"exclusion_ratio", "absolute_floor", "extra_steps", "person", "lexicon_path",
                   "lexicon"});
  cfg.exclusion.ratio = get(s, w, "exclusion_ratio", cfg.exclusion.ratio);
  if (!(cfg.exclusion.ratio >= 0.0)) invalid("explain.exclusion_ratio", "must be non-negative");
  cfg.exclusion.floor = get(s, w, "absolute_floor", cfg.exclusion.floor);
  if (!(cfg.exclusion.floor >= 0.0)) invalid("explain.absolute_floor", "must be non-negative");
  cfg.extra_steps = get(s, w, "extra_steps", cfg.extra_steps);
  if (cfg.extra_steps < 0) invalid("explain.extra_steps", "must be non-negative");

  if (auto person = get_opt<std::string>(s, w, "person")) {
    if (*person == "first") {
      lexicon = Lexicon::from_classes(classes, Person::First);
    } else if (*person != "third") {
      invalid("explain.person", "must be first or third");
    }
  }
  if (auto path = get_opt<std::string>(s, w, "lexicon_path")) {
    std::filesystem::path p(*path);
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) invalid("explain.lexicon_path", "file not found: " + p.string());
    lexicon = parse_lexicon(read_file(p), classes, std::move(lexicon));
  }
  if (s.contains("lexicon")) {
    const json& lx = s.at("lexicon");
    if (lx.is_string()) {
      lexicon = parse_lexicon(lx.get<std::string>(), classes, std::move(lexicon));
    } else {
      lexicon = lexicon_from_object(lx, classes, std::move(lexicon));
    }
  }
  return cfg;
}

FaithfulnessSettings parse_faithfulness(const json& doc) {
  FaithfulnessSettings cfg;
  if (!doc.contains("faithfulness")) return cfg;
  const json& s = doc.at("faithfulness");
  const std::string w = "faithfulness";
  only_keys(s, w, {"thresholds", "k", "near_zero", "runs"});
  auto thresholds = get<std::vector<double>>(s, w, "thresholds", cfg.thresholds);
  if (!thresholds.empty()) cfg.thresholds = std::move(thresholds);
  cfg.k = get(s, w, "k", cfg.k);
  cfg.near_zero = get(s, w, "near_zero", cfg.near_zero);
  cfg.runs = get(s, w, "runs", cfg.runs);
  return cfg;
}

}  // namespace

ExperimentConfig parse_config_json(const json& doc, const std::filesystem::path& base_dir) {
  only_keys(doc, "config", {"map", "classes", "learner", "influence", "explain", "faithfulness"});
  ExperimentConfig cfg;

  if (!doc.contains("map")) invalid("map", "required");
  const json& m = doc.at("map");
  only_keys(m, "map", {"path", "text"});
  if (auto text = get_opt<std::string>(m, "map", "text")) {
    cfg.map_text = *text;
    if (auto path = get_opt<std::string>(m, "map", "path")) cfg.map_path = *path;
  } else if (auto path = get_opt<std::string>(m, "map", "path")) {
    std::filesystem::path p(*path);
    if (p.is_relative()) p = base_dir / p;
    if (!std::filesystem::exists(p)) invalid("map.path", "file not found: " + p.string());
    cfg.map_path = std::filesystem::weakly_canonical(p).string();
    cfg.map_text = read_file(p);
  } else {
    invalid("map", "needs 'path' or 'text'");
  }

  cfg.classes = parse_classes(doc);
  try {
    (void)load_map(cfg.map_text, cfg.classes);
  } catch (const Error& e) {
    throw Error(ErrorCode::ValidationError,
                std::string("map: ") + std::string(to_string(e.code())) + ": " + e.what(),
                cfg.map_path.empty() ? "map.text" : "map.path");
  }

  cfg.learner = parse_learner(doc);
  cfg.influence = parse_influence(doc, cfg.classes);
  cfg.explain = parse_explain(doc, cfg.classes, base_dir, cfg.lexicon);
  cfg.faithfulness = parse_faithfulness(doc);

  cfg.learner.validate();
  cfg.influence.validate();
  cfg.faithfulness.validate();
  cfg.lexicon.validate(cfg.classes);
  return cfg;
}

ExperimentConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    invalid("config", std::string("not valid JSON: ") + e.what());
  }
  return parse_config_json(doc, base_dir);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::IoError, "config file not found: " + path.string());
  }
  return parse_config(read_file(path), path.parent_path());
}

json to_json(const ExperimentConfig& cfg) {
  json doc;
  doc["map"]["text"] = cfg.map_text;
  if (!cfg.map_path.empty()) doc["map"]["path"] = cfg.map_path;

  json classes = json::array();
  for (const auto& c : cfg.classes) {
    classes.push_back({{"id", c.id},
                       {"name", c.name},
                       {"sign", std::string(to_string(c.sign))},
                       {"display_name", c.display_name},
                       {"consequence", c.consequence}});
  }
  doc["classes"] = classes;

  const auto& l = cfg.learner;
  doc["learner"] = {{"alpha", l.alpha},
                    {"gamma", l.gamma},
                    {"epsilon_start", l.epsilon_start},
                    {"epsilon_end", l.epsilon_end},
                    {"epsilon_decay_episodes", l.epsilon_decay_episodes},
                    {"episodes", l.episodes},
                    {"seed", l.seed},
                    {"max_steps", l.max_steps ? json(*l.max_steps) : json(nullptr)},
                    {"backing", std::string(backing_name(l.backing))},
                    {"hidden_units", l.hidden_units}};

  const auto& ip = cfg.influence;
  json per_class = json::object();
  for (const auto& [id, o] : ip.per_class) {
    json entry = json::object();
    if (o.gamma) entry["gamma"] = *o.gamma;
    if (o.mode) entry["mode"] = std::string(to_string(*o.mode));
    per_class[std::to_string(id)] = entry;
  }
  doc["influence"] = {{"gamma", ip.gamma},
                      {"alpha", ip.alpha ? json(*ip.alpha) : json(nullptr)},
                      {"capacity", ip.capacity},
                      {"cadence", std::string(to_string(ip.cadence))},
                      {"batch_size", ip.batch_size},
                      {"backing", std::string(backing_name(ip.backing))},
                      {"hidden_units", ip.hidden_units},
                      {"parallel", ip.parallel},
                      {"per_class", per_class}};

  json lex_classes = json::object();
  for (const auto& [id, p] : cfg.lexicon.classes) {
    lex_classes[std::to_string(id)] = {{"display_name", p.display_name},
                                       {"consequence", p.consequence}};
  }
  doc["explain"] = {{"exclusion_ratio", cfg.explain.exclusion.ratio},
                    {"absolute_floor", cfg.explain.exclusion.floor},
                    {"extra_steps", cfg.explain.extra_steps},
                    {"lexicon",
                     {{"person", cfg.lexicon.person == Person::First ? "first" : "third"},
                      {"classes", lex_classes},
                      {"actions", cfg.lexicon.actions},
                      {"templates", cfg.lexicon.templates}}}};

  const auto& f = cfg.faithfulness;
  doc["faithfulness"] = {
      {"thresholds", f.thresholds}, {"k", f.k}, {"near_zero", f.near_zero}, {"runs", f.runs}};
  return doc;
}

}  // namespace whynot
