#include <gtest/gtest.h>

#include "testutil.hpp"
#include "whynot/error.hpp"
#include "whynot/explainer.hpp"

using namespace whynot;

namespace {

InfluencePredictor table_ip(int id, SignMode sign, const std::vector<double>& per_state) {
  InfluencePredictor ip;
  ip.class_id = id;
  ip.sign = sign;
  ip.values = ValueFunction::table(static_cast<Eigen::Index>(per_state.size()));
  for (std::size_t s = 0; s < per_state.size(); ++s) {
    ip.values.update_toward(state_key(static_cast<int>(s)), Action::Up, per_state[s], 1.0);
  }
  return ip;
}

Trajectory over(const std::vector<int>& states) {
  Trajectory t;
  for (int s : states) {
    TrajectoryStep st;
    st.state = state_key(s);
    t.steps.push_back(st);
  }
  return t;
}

RewardClassSet blue_and_goal() {
  return RewardClassSet({{0, "blue", SignMode::Negative, "hit a blue square", "dangerous blue obstacles"},
                         {1, "goal", SignMode::Positive, "reach the green goal", "green goal"}});
}

}  // namespace

TEST(CompareMeans, ExclusionRule) {
  const ExclusionRule rule;
  EXPECT_EQ(compare_means(0.5, 0.5, rule), Dominance::None);
  EXPECT_EQ(compare_means(1.0, 0.96, rule), Dominance::None);
  EXPECT_EQ(compare_means(1.0, 0.9, rule), Dominance::A);
  EXPECT_EQ(compare_means(0.9, 1.0, rule), Dominance::U);
  EXPECT_EQ(compare_means(0.0, 1e-9, rule), Dominance::None);
  EXPECT_EQ(compare_means(0.0, 1e-3, {0.0, 1e-6}), Dominance::U);
}

TEST(TrajectoryMean, Basics) {
  const auto ip = table_ip(0, SignMode::Negative, {0.0, 0.2, 0.4});
  EXPECT_DOUBLE_EQ(trajectory_class_mean(over({0, 0}), ip), 0.0);
  EXPECT_DOUBLE_EQ(trajectory_class_mean(over({2}), ip), influence_value(ip, state_key(2)));
  EXPECT_NEAR(trajectory_class_mean(over({1, 2}), ip), 0.3, 1e-15);
  EXPECT_THROW(trajectory_class_mean(over({}), ip), Error);
}

TEST(Aggregated, IdenticalTrajectoriesAreEmpty) {
  const std::vector<InfluencePredictor> ips{table_ip(0, SignMode::Negative, {0.1, 0.7, 0.2}),
                                            table_ip(1, SignMode::Positive, {0.3, 0.1, 0.9})};
  const auto s = aggregated_explanation(over({0, 1, 2}), over({0, 1, 2}), ips);
  EXPECT_TRUE(s.empty);
  EXPECT_EQ(s.per_class.size(), 2u);
  EXPECT_EQ(render(s, Lexicon::from_classes(blue_and_goal()), Action::Down, Action::Down),
            "Both choices look equivalent to me.");
}

TEST(Aggregated, SwapFlipsDominance) {
  const std::vector<InfluencePredictor> ips{table_ip(0, SignMode::Negative, {0.1, 0.7, 0.2}),
                                            table_ip(1, SignMode::Positive, {0.3, 0.1, 0.9})};
  const auto ab = aggregated_explanation(over({0, 2}), over({1, 1}), ips);
  const auto ba = aggregated_explanation(over({1, 1}), over({0, 2}), ips);
  ASSERT_EQ(ab.per_class.size(), ba.per_class.size());
  for (std::size_t i = 0; i < ab.per_class.size(); ++i) {
    EXPECT_EQ(ab.per_class[i].mean_a, ba.per_class[i].mean_u);
    EXPECT_EQ(ab.per_class[i].mean_u, ba.per_class[i].mean_a);
  }
  EXPECT_EQ(ab.per_class[0].dominant, Dominance::U);
  EXPECT_EQ(ba.per_class[0].dominant, Dominance::A);
  EXPECT_EQ(ab.per_class[1].dominant, Dominance::A);
  EXPECT_EQ(ba.per_class[1].dominant, Dominance::U);
}

TEST(Local, MaxSetPicksPerStateLeaders) {
  // states 0-2 sit near the danger, 3-5 near the goal.
  const std::vector<InfluencePredictor> ips{
      table_ip(0, SignMode::Negative, {0.9, 0.8, 0.7, 0.1, 0.0, 0.0}),
      table_ip(1, SignMode::Positive, {0.1, 0.2, 0.3, 0.6, 0.8, 0.9})};
  const Trajectory a = over({0, 1, 2});
  const Trajectory u = over({3, 4, 5});
  const auto s = local_explanation(make_segment(a, 0), make_segment(u, 0), ips);
  ASSERT_TRUE(s.local);
  EXPECT_EQ(s.local->method, LocalMethod::MaxSet);
  EXPECT_EQ(s.local->set_a, std::vector<int>{0});
  EXPECT_EQ(s.local->set_u, std::vector<int>{1});
  EXPECT_EQ(render(s, Lexicon::from_classes(blue_and_goal()), Action::Left, Action::Right),
            "If the agent goes right, the strongest nearby influence is the green goal; going left, "
            "it is the dangerous blue obstacles.");
}

TEST(Local, EqualSetsFallBackToTopMeans) {
  const std::vector<InfluencePredictor> ips{
      table_ip(0, SignMode::Negative, {0.5, 0.4}), table_ip(1, SignMode::Positive, {0.2, 0.3})};
  const Trajectory a = over({0, 1});
  const auto s = local_explanation(make_segment(a, 0), make_segment(a, 0), ips);
  ASSERT_TRUE(s.local);
  EXPECT_EQ(s.local->method, LocalMethod::TopMeans);
  EXPECT_EQ(s.local->set_a, s.local->set_u);
  EXPECT_EQ(s.local->set_a, (std::vector<int>{0, 1}));
}

TEST(Local, TopMeansRankingsCanDiffer) {
  // goal (class 3) leads everywhere; the others rank differently per side.
  const std::vector<InfluencePredictor> ips{
      table_ip(0, SignMode::Negative, {0.6, 0.1}), table_ip(1, SignMode::Negative, {0.3, 0.5}),
      table_ip(2, SignMode::Negative, {0.2, 0.4}), table_ip(3, SignMode::Positive, {0.9, 0.9})};
  const Trajectory a = over({0, 0});
  const Trajectory u = over({1, 1});
  const auto s = local_explanation(make_segment(a, 0), make_segment(u, 0), ips);
  ASSERT_TRUE(s.local);
  EXPECT_EQ(s.local->method, LocalMethod::TopMeans);
  EXPECT_EQ(s.local->set_a, (std::vector<int>{3, 0, 1}));
  EXPECT_EQ(s.local->set_u, (std::vector<int>{3, 1, 2}));
}

TEST(Render, TemplateExamples) {
  const Lexicon lex = Lexicon::from_classes(blue_and_goal());
  ExplanationStructure danger;
  danger.empty = false;
  danger.per_class = {{0, 0.1, 0.6, Dominance::U}, {1, 0.5, 0.5, Dominance::None}};
  EXPECT_EQ(render(danger, lex, Action::Down, Action::Up),
            "If the agent goes up, it will pass through regions influenced by the dangerous blue "
            "obstacles; going down feels safer.");

  ExplanationStructure goal;
  goal.empty = false;
  goal.per_class = {{0, 0.2, 0.2, Dominance::None}, {1, 0.8, 0.3, Dominance::A}};
  EXPECT_EQ(render(goal, lex, Action::Left, Action::Right),
            "If the agent goes right, it will pass through regions less influenced by the green "
            "goal; going left is better.");

  const Lexicon first = Lexicon::from_classes(blue_and_goal(), Person::First);
  EXPECT_EQ(render(danger, first, Action::Down, Action::Up),
            "If I go up, I fear I will hit a blue square; going down feels safer.");
}

TEST(Render, MultipleSentencesInClassOrder) {
  const Lexicon lex = Lexicon::from_classes(blue_and_goal());
  ExplanationStructure s;
  s.empty = false;
  s.per_class = {{0, 0.1, 0.6, Dominance::U}, {1, 0.8, 0.3, Dominance::A}};
  const std::string text = render(s, lex, Action::Down, Action::Up);
  const auto blue = text.find("blue");
  const auto green = text.find("green");
  ASSERT_NE(blue, std::string::npos);
  ASSERT_NE(green, std::string::npos);
  EXPECT_LT(blue, green);
}

TEST(Lexicon, ParseOverridesAndMissingEntries) {
  const auto classes = blue_and_goal();
  const Lexicon lex = parse_lexicon(
      "; custom wording\nperson = first\nclass.blue.display = blue tiles\naction.up = north\n"
      "template.negative.more_on_u = Going {action} means {class}.\n",
      classes, Lexicon::from_classes(classes));
  EXPECT_EQ(lex.person, Person::First);
  EXPECT_EQ(lex.classes.at(0).display_name, "blue tiles");
  EXPECT_EQ(lex.actions.at("up"), "north");
  ExplanationStructure s;
  s.empty = false;
  s.per_class = {{0, 0.1, 0.6, Dominance::U}, {1, 0.5, 0.5, Dominance::None}};
  EXPECT_EQ(render(s, lex, Action::Down, Action::Up), "Going north means blue tiles.");

  EXPECT_THROW(parse_lexicon("class.lava.display = x\n", classes, Lexicon{}), Error);
  EXPECT_THROW(parse_lexicon("nonsense\n", classes, Lexicon{}), Error);
  Lexicon missing = Lexicon::from_classes(classes);
  missing.classes.erase(1);
  try {
    missing.validate(classes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingLexiconEntry);
  }
  ExplanationStructure g;
  g.empty = false;
  g.per_class = {{1, 0.8, 0.3, Dominance::A}};
  EXPECT_THROW(render(g, missing, Action::Left, Action::Right), Error);
}
