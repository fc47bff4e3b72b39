#include <gtest/gtest.h>

#include "testutil.hpp"
#include "whynot/config.hpp"
#include "whynot/error.hpp"

using namespace whynot;

namespace {

const std::string kMapText = "GRID 5 4\n#####\n#Sb.#\n#..G#\n#####\n\nb object 0\n";

nlohmann::json minimal() {
  return {{"map", {{"text", kMapText}}}, {"classes", {{{"name", "blue"}, {"sign", "negative"}}}}};
}

std::string field_of(const nlohmann::json& doc, const std::filesystem::path& base = {}) {
  try {
    parse_config_json(doc, base);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationError) << e.what();
    return e.field();
  }
  ADD_FAILURE() << "config accepted";
  return {};
}

}  // namespace

TEST(Config, MinimalGetsDefaults) {
  const ExperimentConfig cfg = parse_config_json(minimal());
  EXPECT_EQ(cfg.learner.gamma, 0.99);
  EXPECT_EQ(cfg.influence.gamma, 0.5);
  EXPECT_EQ(cfg.influence.gamma_for(0), 0.5);
  EXPECT_FALSE(cfg.influence.alpha);
  ASSERT_EQ(cfg.classes.size(), 2u);
  EXPECT_EQ(cfg.classes[1].name, "goal");
  EXPECT_EQ(cfg.classes[1].sign, SignMode::Positive);
  EXPECT_EQ(cfg.classes.goal_class(), 1);
  EXPECT_EQ(cfg.classes[0].display_name, "blue");
  EXPECT_FALSE(cfg.classes[0].consequence.empty());
  EXPECT_EQ(cfg.explain.extra_steps, 5);
  EXPECT_EQ(cfg.faithfulness.thresholds, (std::vector<double>{0.0, 0.05, 0.1, 0.2}));
  EXPECT_TRUE(cfg.map_path.empty());
}

TEST(Config, FieldErrors) {
  auto doc = minimal();
  doc["learner"] = {{"epsilon_start", -1}};
  EXPECT_EQ(field_of(doc), "learner.epsilon_start");

  doc = minimal();
  doc["learner"] = {{"alpah", 0.1}};
  EXPECT_EQ(field_of(doc), "learner.alpah");

  doc = minimal();
  doc["learner"] = {{"alpha", "fast"}};
  EXPECT_EQ(field_of(doc), "learner.alpha");

  doc = minimal();
  doc["map"]["text"] = "GRID 2 2\n##\n";
  EXPECT_EQ(field_of(doc), "map.text");

  doc = minimal();
  doc["map"] = {{"path", "does/not/exist.map"}};
  EXPECT_EQ(field_of(doc), "map.path");

  doc = minimal();
  doc["influence"] = {{"per_class", {{"lava", {{"gamma", 0.9}}}}}};
  EXPECT_EQ(field_of(doc).rfind("influence.per_class", 0), 0u);

  doc = minimal();
  doc["influence"] = {{"cadence", "sometimes"}};
  EXPECT_EQ(field_of(doc), "influence.cadence");

  doc = minimal();
  doc["faithfulness"] = {{"thresholds", {0.1, -0.2}}};
  EXPECT_EQ(field_of(doc), "faithfulness.thresholds");

  doc = minimal();
  doc["classes"].push_back({{"name", "blue"}, {"sign", "negative"}});
  EXPECT_FALSE(field_of(doc).empty());

  EXPECT_THROW(parse_config("{not json"), Error);
}

TEST(Config, PerClassOverride) {
  auto doc = minimal();
  doc["influence"] = {{"per_class", {{"blue", {{"gamma", 0.9}}}, {"1", {{"mode", "signed"}}}}}};
  const ExperimentConfig cfg = parse_config_json(doc);
  EXPECT_EQ(cfg.influence.gamma_for(0), 0.9);
  EXPECT_EQ(cfg.influence.gamma_for(1), 0.5);
  EXPECT_EQ(cfg.influence.mode_for(cfg.classes[1]), InfluenceMode::Signed);
}

TEST(Config, ExplicitGoalClassAndLexicon) {
  auto doc = minimal();
  doc["classes"] = {{{"id", 1}, {"name", "blue"}, {"sign", "negative"}, {"consequence", "be hit"}},
                    {{"id", 0}, {"name", "exit"}, {"sign", "positive"}, {"display_name", "exit door"}}};
  doc["map"]["text"] = "GRID 5 4\n#####\n#Sb.#\n#..G#\n#####\n\nb object 1\n";
  doc["explain"] = {{"person", "first"}, {"lexicon", "class.blue.display = blue tiles\n"}};
  const ExperimentConfig cfg = parse_config_json(doc);
  EXPECT_EQ(cfg.classes.goal_class(), 0);
  EXPECT_EQ(cfg.lexicon.person, Person::First);
  EXPECT_EQ(cfg.lexicon.classes.at(1).display_name, "blue tiles");
  EXPECT_EQ(cfg.lexicon.classes.at(0).display_name, "exit door");
}

TEST(Config, RelativePathsAndSnapshot) {
  testutil::TempDir dir;
  testutil::write_file(dir / "m.map", kMapText);
  testutil::write_file(dir / "words.txt", "action.up = north\n");
  testutil::write_file(dir / "c.json", R"({"map": {"path": "m.map"},
    "classes": [{"name": "blue", "sign": "negative"}],
    "explain": {"lexicon_path": "words.txt"},
    "learner": {"episodes": 7, "max_steps": 33}})");
  const ExperimentConfig cfg = load_config(dir / "c.json");
  EXPECT_EQ(cfg.map_text, kMapText);
  EXPECT_EQ(cfg.learner.episodes, 7);
  EXPECT_EQ(cfg.learner.max_steps, 33);
  EXPECT_EQ(cfg.lexicon.actions.at("up"), "north");
  EXPECT_TRUE(std::filesystem::path(cfg.map_path).is_absolute());

  const ExperimentConfig back = parse_config_json(to_json(cfg));
  EXPECT_EQ(back, cfg);
  try {
    load_config(dir / "missing.json");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::IoError);
  }
}

TEST(Config, FixturesLoad) {
  for (const char* name : {"stairs.json", "blue.json", "multi.json"}) {
    const ExperimentConfig cfg = testutil::fixture_config(name);
    EXPECT_NO_THROW(load_map(cfg.map_text, cfg.classes)) << name;
    EXPECT_EQ(parse_config_json(to_json(cfg)), cfg) << name;
  }
}
