#include <gtest/gtest.h>

#include <atomic>
#include <chrono>
#include <thread>

#include <nlohmann/json.hpp>

#include "testutil.hpp"
#include "whynot/service.hpp"

// after Eigen: resolv.h defines _res
#include <httplib.h>

using namespace whynot;
using nlohmann::json;

namespace {

class Api : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    ServiceOptions opts;
    opts.base_dir = WHYNOT_FIXTURE_DIR;
    opts.cors_origin = "http://localhost:5173";
    service_ = new Service(opts);
    port_ = service_->start("127.0.0.1", 0);
  }
  static void TearDownTestSuite() {
    delete service_;
    service_ = nullptr;
  }

  struct Reply {
    int status = 0;
    json body;
    httplib::Headers headers;
  };

  static Reply call(const std::string& method, const std::string& path, const json& body = nullptr) {
    httplib::Client cli("127.0.0.1", port_);
    cli.set_read_timeout(120, 0);
    const std::string url = "/api/v1" + path;
    httplib::Result r;
    if (method == "GET") {
      r = cli.Get(url);
    } else if (method == "OPTIONS") {
      r = cli.Options(url);
    } else {
      r = cli.Post(url, body.is_null() ? std::string() : body.dump(), "application/json");
    }
    Reply out;
    if (!r) return out;
    out.status = r->status;
    out.headers = r->headers;
    if (!r->body.empty()) out.body = json::parse(r->body, nullptr, false);
    return out;
  }

  static json config(const std::string& name) {
    return json::parse(read_file(testutil::fixture(name)));
  }

  static std::string create(const std::string& name = "stairs.json") {
    const Reply r = call("POST", "/sessions", config(name));
    EXPECT_EQ(r.status, 201) << r.body.dump();
    return r.body.value("session_id", "");
  }

  static json train_sync(const std::string& id, json body = json::object()) {
    body["wait"] = true;
    const Reply r = call("POST", "/sessions/" + id + "/train", body);
    EXPECT_EQ(r.status, 200) << r.body.dump();
    return r.body;
  }

  static Service* service_;
  static int port_;
};

Service* Api::service_ = nullptr;
int Api::port_ = 0;

}  // namespace

TEST_F(Api, CreateSessions) {
  const std::string a = create();
  const std::string b = create();
  EXPECT_FALSE(a.empty());
  EXPECT_NE(a, b);
  const Reply wrapped = call("POST", "/sessions", json{{"config", config("stairs.json")}});
  EXPECT_EQ(wrapped.status, 201);

  const Reply state = call("GET", "/sessions/" + a + "/state");
  ASSERT_EQ(state.status, 200);
  EXPECT_FALSE(state.body["trained"].get<bool>());
  EXPECT_EQ(state.body["map"]["width"], 7);
  EXPECT_EQ(state.body["state"]["x"], 1);
  EXPECT_EQ(state.body["state"]["y"], 3);
  EXPECT_EQ(state.body["classes"].size(), 2u);
}

TEST_F(Api, CreateValidation) {
  json bad = config("stairs.json");
  bad["map"] = {{"text", "GRID 3 3\n###\n#S#\n"}};
  Reply r = call("POST", "/sessions", bad);
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "ValidationError");
  EXPECT_EQ(r.body["field"], "map.text");

  bad = config("stairs.json");
  bad["learner"] = {{"epsilon_start", -1}};
  r = call("POST", "/sessions", bad);
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["field"], "learner.epsilon_start");

  httplib::Client cli("127.0.0.1", port_);
  auto raw = cli.Post("/api/v1/sessions", "{oops", "application/json");
  ASSERT_TRUE(raw);
  EXPECT_EQ(raw->status, 400);
  EXPECT_EQ(json::parse(raw->body)["code"], "ValidationError");
}

TEST_F(Api, UnknownThings) {
  EXPECT_EQ(call("POST", "/sessions/nope/train", json::object()).status, 404);
  EXPECT_EQ(call("GET", "/sessions/nope/state").body["code"], "UnknownSession");
  EXPECT_EQ(call("POST", "/sessions/nope/explain", json{{"counterfactual_actions", {"up"}}}).status, 404);
  EXPECT_EQ(call("GET", "/sessions/nope/heatmap").status, 404);
  EXPECT_EQ(call("POST", "/sessions/nope/map/edit", json::object()).status, 404);
  EXPECT_EQ(call("GET", "/sessions/nope/faithfulness").status, 404);
  EXPECT_EQ(call("GET", "/sessions/nope/trace").status, 404);
  EXPECT_EQ(call("POST", "/sessions/nope/step").status, 404);
  EXPECT_EQ(call("POST", "/sessions/nope/reset").status, 404);
  const std::string id = create();
  const Reply job = call("GET", "/sessions/" + id + "/jobs/41");
  EXPECT_EQ(job.status, 404);
  EXPECT_EQ(job.body["code"], "UnknownJob");
  const Reply route = call("GET", "/nothing/here");
  EXPECT_EQ(route.status, 404);
  EXPECT_EQ(route.body["code"], "NotFound");
}

TEST_F(Api, UntrainedSessionsAreRejected) {
  const std::string id = create();
  const json done = train_sync(id, {{"episodes", 0}});
  EXPECT_EQ(done["status"], "done");
  EXPECT_FALSE(done["trained"].get<bool>());
  const Reply e = call("POST", "/sessions/" + id + "/explain", json{{"counterfactual_actions", {"up"}}});
  EXPECT_EQ(e.status, 409);
  EXPECT_EQ(e.body["code"], "UntrainedOrStale");
  EXPECT_EQ(call("GET", "/sessions/" + id + "/faithfulness").status, 409);
  EXPECT_EQ(call("GET", "/sessions/" + id + "/heatmap").status, 409);
  const Reply bad = call("POST", "/sessions/" + id + "/train", json{{"episodes", -5}, {"wait", true}});
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(bad.body["field"], "learner.episodes");
}

TEST_F(Api, AsyncTrainingJob) {
  const std::string id = create();
  const Reply started = call("POST", "/sessions/" + id + "/train", json{{"seed", 3}});
  ASSERT_EQ(started.status, 202);
  EXPECT_EQ(started.body["status"], "running");
  const std::string job = started.body["job_id"];
  json status;
  for (int i = 0; i < 600; ++i) {
    status = call("GET", "/sessions/" + id + "/jobs/" + job).body;
    if (status["status"] != "running") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  ASSERT_EQ(status["status"], "done") << status.dump();
  EXPECT_EQ(status["episodes_run"], 2000);
  EXPECT_EQ(status["success_rate"], 1.0);
  EXPECT_TRUE(status["residuals"].contains("stairs"));
  EXPECT_TRUE(call("GET", "/sessions/" + id + "/state").body["trained"].get<bool>());
}

TEST_F(Api, ExplainStairs) {
  const std::string id = create();
  train_sync(id);
  const std::string base = "/sessions/" + id;
  const Reply before = call("GET", base + "/state");
  const Reply trace_before = call("GET", base + "/trace");

  const Reply r = call("POST", base + "/explain", json{{"counterfactual_actions", {"up"}}, {"mode", "aggregated"}});
  ASSERT_EQ(r.status, 200) << r.body.dump();
  const auto golden = testutil::read_golden("stairs_explanations.txt");
  EXPECT_EQ(r.body["text"], golden.at("aggregated"));
  EXPECT_EQ(r.body["structure"]["per_class"][0]["dominant"], "U");
  EXPECT_EQ(r.body["action_a"], "down");
  EXPECT_EQ(r.body["traj_u"]["forced"], json::array({"up"}));
  EXPECT_EQ(r.body["traj_u"]["path"][0], json::array({1, 3}));
  EXPECT_EQ(r.body["traj_u"]["path"][1], json::array({1, 2}));
  EXPECT_EQ(r.body["traj_a"]["origin"], "agent");

  const Reply local = call("POST", base + "/explain", json{{"counterfactual_actions", {"up"}}, {"mode", "local"}});
  EXPECT_EQ(local.body["text"], golden.at("local"));
  EXPECT_FALSE(local.body["structure"]["local"].is_null());

  const Reply same = call("POST", base + "/explain", json{{"counterfactual_actions", {"down"}}});
  EXPECT_TRUE(same.body["structure"]["empty"].get<bool>());
  EXPECT_EQ(same.body["text"], "Both choices look equivalent to me.");

  const Reply at = call("POST", base + "/explain",
                        json{{"at_state", {{"x", 5}, {"y", 2}}}, {"counterfactual_actions", {"left"}}});
  EXPECT_EQ(at.status, 200);
  EXPECT_EQ(at.body["traj_a"]["origin"], "agent");

  // Nothing above moved the session.
  EXPECT_EQ(call("GET", base + "/state").body, before.body);
  EXPECT_EQ(call("GET", base + "/trace").body, trace_before.body);
}

TEST_F(Api, ExplainValidation) {
  const std::string id = create();
  train_sync(id);
  const std::string url = "/sessions/" + id + "/explain";
  Reply r = call("POST", url, json{{"counterfactual_actions", {"jump"}}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "BadAction");
  EXPECT_EQ(r.body["field"], "counterfactual_actions[0]");
  r = call("POST", url, json{{"counterfactual_actions", json::array()}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["code"], "BadAction");
  r = call("POST", url, json::object());
  EXPECT_EQ(r.status, 400);
  r = call("POST", url, json{{"counterfactual_actions", {"up"}}, {"agent_action", 3}});
  EXPECT_EQ(r.body["code"], "BadAction");
  r = call("POST", url, json{{"counterfactual_actions", {"up"}}, {"mode", "sideways"}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["field"], "mode");
  r = call("POST", url, json{{"counterfactual_actions", {"up"}}, {"at_state", {0, 0}}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["field"], "at_state");
}

TEST_F(Api, Heatmaps) {
  const std::string id = create();
  train_sync(id);
  const std::string base = "/sessions/" + id + "/heatmap";
  const Reply agent = call("GET", base + "?model=agent");
  ASSERT_EQ(agent.status, 200);
  EXPECT_EQ(agent.body["width"], 7);
  EXPECT_EQ(agent.body["height"], 6);
  ASSERT_EQ(agent.body["values"].size(), 6u);
  EXPECT_TRUE(agent.body["values"][0][0].is_null());
  // goal at (5, 4); the best agent value sits next to it.
  double best = -1e9;
  int bx = 0, by = 0;
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 7; ++x) {
      const auto& v = agent.body["values"][y][x];
      if (v.is_number() && v.get<double>() > best) {
        best = v.get<double>();
        bx = x;
        by = y;
      }
    }
  }
  EXPECT_EQ(std::abs(bx - 5) + std::abs(by - 4), 1);

  const Reply stairs = call("GET", base + "?model=0");
  ASSERT_EQ(stairs.status, 200);
  const auto& row2 = stairs.body["values"][2];
  const auto& row4 = stairs.body["values"][4];
  // the corridor under the stairs carries more of their influence than the lower one
  for (int x = 1; x <= 4; ++x) EXPECT_GT(row2[x].get<double>(), row4[x].get<double>()) << x;
  EXPECT_EQ(call("GET", base + "?model=stairs").status, 200);
  const Reply missing = call("GET", base + "?model=99");
  EXPECT_EQ(missing.status, 404);
  EXPECT_EQ(missing.body["code"], "UnknownModel");
  EXPECT_EQ(missing.body["field"], "model");
}

TEST_F(Api, StalenessLifecycle) {
  const std::string id = create();
  const std::string base = "/sessions/" + id;
  train_sync(id);
  EXPECT_EQ(call("GET", base + "/faithfulness").status, 200);

  Reply noop = call("POST", base + "/map/edit", json{{"set_cells", json::array()}});
  EXPECT_EQ(noop.status, 200);
  EXPECT_FALSE(noop.body["staleness"].get<bool>());
  EXPECT_EQ(call("POST", base + "/explain", json{{"counterfactual_actions", {"up"}}}).status, 200);

  Reply goal = call("POST", base + "/map/edit", json{{"set_cells", {{{"x", 5}, {"y", 4}, {"glyph", "."}}}}});
  EXPECT_EQ(goal.status, 400);
  EXPECT_EQ(goal.body["code"], "InvalidEdit");
  EXPECT_EQ(call("POST", base + "/map/edit", json{{"set_cells", {{{"x", 50}, {"y", 4}, {"glyph", "#"}}}}}).status, 400);
  EXPECT_EQ(call("POST", base + "/map/edit", json{{"set_cells", {{{"x", 2}, {"y", 2}, {"glyph", "?"}}}}}).status, 400);
  EXPECT_EQ(call("POST", base + "/map/edit", json{{"set_cells", {{{"x", 2}}}}}).status, 400);
  // failed edits leave the session current
  EXPECT_EQ(call("POST", base + "/explain", json{{"counterfactual_actions", {"up"}}}).status, 200);

  Reply wall = call("POST", base + "/map/edit", json{{"set_cells", {{{"x", 3}, {"y", 2}, {"glyph", "#"}}}}});
  ASSERT_EQ(wall.status, 200) << wall.body.dump();
  EXPECT_TRUE(wall.body["staleness"].get<bool>());
  EXPECT_EQ(wall.body["map"]["rows"][2], "#..#..#");
  EXPECT_EQ(call("POST", base + "/explain", json{{"counterfactual_actions", {"up"}}}).status, 409);
  EXPECT_EQ(call("GET", base + "/faithfulness").status, 409);
  EXPECT_TRUE(call("GET", base + "/state").body["stale"].get<bool>());

  train_sync(id);
  EXPECT_FALSE(call("GET", base + "/state").body["stale"].get<bool>());
  EXPECT_EQ(call("POST", base + "/explain", json{{"counterfactual_actions", {"up"}}}).status, 200);
}

TEST_F(Api, RemovingTheStairsChangesTheAnswer) {
  const std::string id = create();
  const std::string base = "/sessions/" + id;
  train_sync(id);
  const json q = {{"counterfactual_actions", {"up"}}};
  const std::string first = call("POST", base + "/explain", q).body["text"];
  EXPECT_NE(first.find("stairs"), std::string::npos);
  json cells = json::array();
  for (int x = 1; x <= 5; ++x) cells.push_back({{"x", x}, {"y", 1}, {"glyph", "."}});
  ASSERT_EQ(call("POST", base + "/map/edit", json{{"set_cells", cells}}).status, 200);
  train_sync(id);
  const Reply after = call("POST", base + "/explain", q);
  ASSERT_EQ(after.status, 200);
  const std::string text = after.body["text"];
  EXPECT_EQ(text.find("stairs"), std::string::npos) << text;
  EXPECT_NE(text, first);
}

TEST_F(Api, StepResetTrace) {
  const std::string id = create();
  const std::string base = "/sessions/" + id;
  train_sync(id);
  Reply s = call("POST", base + "/step", json{{"action", "right"}});
  ASSERT_EQ(s.status, 200);
  EXPECT_EQ(s.body["transition"]["action"], "right");
  EXPECT_EQ(s.body["state"]["x"], 1);  // blocked by the wall
  EXPECT_EQ(s.body["state"]["step_count"], 1);
  for (int i = 0; i < 10; ++i) {
    s = call("POST", base + "/step");
    ASSERT_EQ(s.status, 200);
    if (s.body["state"]["done"].get<bool>()) break;
  }
  EXPECT_EQ(s.body["transition"]["outcome"], "goal");
  EXPECT_EQ(call("POST", base + "/step").body["code"], "EpisodeDone");
  const Reply trace = call("GET", base + "/trace");
  EXPECT_EQ(trace.body["frames"].size(), 7u);  // start, blocked move, five moves
  EXPECT_EQ(trace.body["frames"][0]["action"], nullptr);
  EXPECT_EQ(trace.body["frames"].back()["x"], 5);

  EXPECT_EQ(call("POST", base + "/step", json{{"action", "fly"}}).status, 400);
  const Reply bad = call("POST", base + "/reset", json{{"start_index", 7}});
  EXPECT_EQ(bad.status, 400);
  EXPECT_EQ(bad.body["code"], "StartOutOfRange");
  const Reply r = call("POST", base + "/reset", json{{"start_index", 0}});
  EXPECT_EQ(r.status, 200);
  EXPECT_FALSE(r.body["state"]["done"].get<bool>());
  EXPECT_EQ(call("GET", base + "/trace").body["frames"].size(), 1u);
}

TEST_F(Api, EditUnderTheAgentResets) {
  const std::string id = create();
  const std::string base = "/sessions/" + id;
  call("POST", base + "/step", json{{"action", "down"}});
  EXPECT_EQ(call("GET", base + "/state").body["state"]["y"], 4);
  ASSERT_EQ(call("POST", base + "/map/edit", json{{"set_cells", {{{"x", 1}, {"y", 4}, {"glyph", "#"}}}}}).status, 200);
  const json st = call("GET", base + "/state").body["state"];
  EXPECT_EQ(st["x"], 1);
  EXPECT_EQ(st["y"], 3);
  EXPECT_EQ(st["step_count"], 0);
}

TEST_F(Api, Faithfulness) {
  const std::string id = create("multi.json");
  train_sync(id);
  const Reply r = call("GET", "/sessions/" + id + "/faithfulness");
  ASSERT_EQ(r.status, 200);
  EXPECT_TRUE(r.body["direct_agreement"].is_number());
  EXPECT_EQ(r.body["threshold_curve"].size(), 4u);
  EXPECT_EQ(r.body["probe"], "knn-loo");
  EXPECT_LT(r.body["rmspe_mean"].get<double>(), 10.0);
}

TEST_F(Api, BlueSquaresSuccessRate) {
  const std::string id = create("blue.json");
  const json done = train_sync(id);
  EXPECT_GE(done["success_rate"].get<double>(), 0.95);
}

TEST_F(Api, Cors) {
  const Reply pre = call("OPTIONS", "/sessions");
  EXPECT_EQ(pre.status, 204);
  auto origin = pre.headers.find("Access-Control-Allow-Origin");
  ASSERT_NE(origin, pre.headers.end());
  EXPECT_EQ(origin->second, "http://localhost:5173");
  EXPECT_NE(pre.headers.find("Access-Control-Allow-Methods"), pre.headers.end());
  const Reply err = call("GET", "/sessions/nope/state");
  EXPECT_NE(err.headers.find("Access-Control-Allow-Origin"), err.headers.end());
}

TEST_F(Api, ConcurrentReadersAndSessions) {
  const std::string a = create();
  const std::string b = create();
  train_sync(a);
  std::vector<std::thread> workers;
  std::atomic<int> ok{0};
  for (int i = 0; i < 8; ++i) {
    workers.emplace_back([&, i] {
      if (i == 0) {
        if (call("POST", "/sessions/" + b + "/train", json{{"wait", true}}).status == 200) ++ok;
        return;
      }
      for (int k = 0; k < 5; ++k) {
        const Reply r = call("POST", "/sessions/" + a + "/explain", json{{"counterfactual_actions", {"up"}}});
        if (r.status == 200) ++ok;
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(ok.load(), 1 + 7 * 5);
}
