#include "whynot/service.hpp"

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "whynot/error.hpp"
#include "whynot/faithfulness.hpp"
#include "whynot/json_io.hpp"
#include "whynot/pipeline.hpp"

namespace whynot {

using nlohmann::json;

namespace {

struct ApiError {
  int status;
  std::string code;
  std::string message;
  std::string field;
};

[[noreturn]] void fail(int status, std::string code, std::string message, std::string field = {}) {
  throw ApiError{status, std::move(code), std::move(message), std::move(field)};
}

struct Job {
  std::string id;
  std::string status = "running";  // running | done | failed
  json result = json::object();
};

struct Session {
  std::string id;
  mutable std::shared_mutex mu;
  ExperimentConfig cfg;
  GridMap map;
  Model model;
  bool stale = false;
  std::uint64_t map_version = 0;
  EnvState state;
  json trace = json::array();
  std::map<std::string, std::shared_ptr<Job>> jobs;
  int next_job = 1;
};

std::string_view outcome_name(Outcome o) {
  switch (o) {
    case Outcome::None: return "none";
    case Outcome::Goal: return "goal";
    case Outcome::Object: return "object";
    case Outcome::Timeout: return "timeout";
  }
  return "none";
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

json map_json(const GridMap& map) {
  json rows = json::array();
  for (int y = 0; y < map.height(); ++y) {
    std::string row;
    for (int x = 0; x < map.width(); ++x) row.push_back(map.glyph({x, y}));
    rows.push_back(row);
  }
  return {{"width", map.width()}, {"height", map.height()}, {"rows", rows}, {"text", to_text(map)}};
}

json classes_json(const RewardClassSet& classes) {
  json out = json::array();
  for (const auto& c : classes) {
    out.push_back({{"id", c.id},
                   {"name", c.name},
                   {"sign", std::string(to_string(c.sign))},
                   {"display_name", c.display_name}});
  }
  return out;
}

json start_frame(const EnvState& s) {
  return {{"step", s.step_count}, {"x", s.position.x}, {"y", s.position.y}, {"action", nullptr}};
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) fail(400, "ValidationError", "request body must be a JSON object", "body");
    return j;
  } catch (const json::parse_error& e) {
    fail(400, "ValidationError", std::string("malformed JSON: ") + e.what(), "body");
  }
}

Action parse_action_field(const json& j, const std::string& field) {
  if (!j.is_string()) fail(400, "BadAction", "action must be a string", field);
  const auto a = parse_action(j.get<std::string>());
  if (!a) fail(400, "BadAction", "unknown action '" + j.get<std::string>() + "'", field);
  return *a;
}

Position parse_position(const json& j, const std::string& field) {
  try {
    if (j.is_array() && j.size() == 2) return {j[0].get<int>(), j[1].get<int>()};
    if (j.is_object()) return {j.at("x").get<int>(), j.at("y").get<int>()};
  } catch (const json::exception&) {
  }
  fail(400, "ValidationError", "expected {x, y} or [x, y]", field);
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) {
  json body = {{"code", e.code}, {"message", e.message}};
  if (!e.field.empty()) body["field"] = e.field;
  send_json(res, e.status, body);
}

std::string random_hex(std::mt19937_64& rng) {
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << rng();
  return out.str();
}

}  // namespace

struct Service::Impl {
  ServiceOptions options;
  httplib::Server server;
  std::thread listener;
  std::mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::mt19937_64 id_rng{std::random_device{}()};
  std::mutex workers_mu;
  std::vector<std::jthread> workers;
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;

  std::string add_session(const ExperimentConfig& cfg) {
    auto s = std::make_shared<Session>();
    s->cfg = cfg;
    s->map = load_map(cfg.map_text, cfg.classes);
    s->model.agent = make_value_function(s->map, cfg.learner.backing, cfg.learner.hidden_units,
                                         cfg.learner.seed);
    s->state = reset(s->map, std::nullopt, cfg.learner.max_steps);
    s->trace.push_back(start_frame(s->state));
    std::lock_guard lk(sessions_mu);
    do {
      s->id = random_hex(id_rng);
    } while (sessions.count(s->id));
    sessions[s->id] = s;
    return s->id;
  }

  std::shared_ptr<Session> session(const std::string& id) {
    std::lock_guard lk(sessions_mu);
    auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "UnknownSession", "no session '" + id + "'", "session_id");
    return it->second;
  }

  static void require_current(const Session& s) {
    if (!s.model.trained) fail(409, "UntrainedOrStale", "session has not been trained");
    if (s.stale) fail(409, "UntrainedOrStale", "map was edited after training; retrain first");
  }

  static void run_train(const std::shared_ptr<Session>& s, const std::shared_ptr<Job>& job,
                        const ExperimentConfig& cfg, const GridMap& map, std::uint64_t version) {
    try {
      Model model = train_model(map, cfg);
      const TrainingSummary summary = summarize(map, cfg, model);
      json residuals = json::object();
      for (const auto& [id, r] : summary.residuals) residuals[cfg.classes[id].name] = r;
      std::unique_lock lk(s->mu);
      s->model = std::move(model);
      s->cfg.learner = cfg.learner;
      if (s->map_version == version) s->stale = false;
      job->status = "done";
      job->result = {{"episodes_run", summary.episodes},
                     {"success_rate", summary.success_rate},
                     {"trained", s->model.trained},
                     {"residuals", residuals}};
    } catch (const std::exception& e) {
      std::unique_lock lk(s->mu);
      job->status = "failed";
      job->result = {{"message", e.what()}};
    }
  }

  static json job_json(const Job& job) {
    json out = job.result;
    out["job_id"] = job.id;
    out["status"] = job.status;
    return out;
  }

  void routes();
};

namespace {

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const ApiError& e) {
      send_error(res, e);
    } catch (const Error& e) {
      std::string code(to_string(e.code()));
      send_error(res, {400, code, e.what(), e.field()});
    } catch (const json::exception& e) {
      send_error(res, {400, "ValidationError", e.what(), "body"});
    } catch (const std::exception& e) {
      send_error(res, {500, "Internal", e.what(), ""});
    }
  };
}

}  // namespace

void Service::Impl::routes() {
  const std::string sid = R"(/api/v1/sessions/([^/]+))";

  server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  server.Post("/api/v1/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
    json body = parse_body(req);
    const json& doc = body.contains("config") ? body.at("config") : body;
    ExperimentConfig cfg;
    try {
      cfg = parse_config_json(doc, options.base_dir);
    } catch (const Error& e) {
      fail(400, "ValidationError", e.what(), e.field());
    }
    send_json(res, 201, {{"session_id", add_session(cfg)}});
  }));

  server.Post(sid + "/train", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    const json body = parse_body(req);
    ExperimentConfig cfg;
    GridMap map;
    std::uint64_t version = 0;
    auto job = std::make_shared<Job>();
    {
      std::unique_lock lk(s->mu);
      cfg = s->cfg;
      map = s->map;
      version = s->map_version;
      job->id = std::to_string(s->next_job++);
      s->jobs[job->id] = job;
    }
    try {
      if (body.contains("episodes")) cfg.learner.episodes = body.at("episodes").get<int>();
      if (body.contains("seed")) cfg.learner.seed = body.at("seed").get<std::uint64_t>();
    } catch (const json::exception&) {
      fail(400, "ValidationError", "episodes and seed must be non-negative integers", "episodes");
    }
    try {
      cfg.learner.validate();
    } catch (const Error& e) {
      std::unique_lock lk(s->mu);
      s->jobs.erase(job->id);
      fail(400, "ValidationError", e.what(), e.field());
    }
    const bool wait = body.value("wait", false);
    if (wait) {
      run_train(s, job, cfg, map, version);
      std::shared_lock lk(s->mu);
      send_json(res, 200, job_json(*job));
      return;
    }
    {
      std::lock_guard lk(workers_mu);
      workers.emplace_back([s, job, cfg, map, version] { run_train(s, job, cfg, map, version); });
    }
    send_json(res, 202, {{"job_id", job->id}, {"status", "running"}});
  }));

  server.Get(sid + R"(/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    std::shared_lock lk(s->mu);
    auto it = s->jobs.find(req.matches[2]);
    if (it == s->jobs.end()) fail(404, "UnknownJob", "no job '" + std::string(req.matches[2]) + "'", "job_id");
    send_json(res, 200, job_json(*it->second));
  }));

  server.Post(sid + "/explain", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    const json body = parse_body(req);
    std::shared_lock lk(s->mu);
    require_current(*s);

    ExplainRequest rq;
    if (!body.contains("counterfactual_actions") || !body.at("counterfactual_actions").is_array() ||
        body.at("counterfactual_actions").empty()) {
      fail(400, "BadAction", "counterfactual_actions must be a non-empty list", "counterfactual_actions");
    }
    const auto& cf = body.at("counterfactual_actions");
    for (std::size_t i = 0; i < cf.size(); ++i) {
      rq.counterfactual.push_back(
          parse_action_field(cf[i], "counterfactual_actions[" + std::to_string(i) + "]"));
    }
    if (body.contains("agent_action") && !body.at("agent_action").is_null()) {
      rq.agent_action = parse_action_field(body.at("agent_action"), "agent_action");
    }
    const std::string mode = body.value("mode", "aggregated");
    const auto parsed = parse_explanation_mode(mode);
    if (!parsed) fail(400, "ValidationError", "mode must be aggregated or local", "mode");
    rq.mode = *parsed;
    if (body.contains("at_state") && !body.at("at_state").is_null()) {
      const Position p = parse_position(body.at("at_state"), "at_state");
      if (s->map.is_wall(p)) fail(400, "ValidationError", "at_state is not an open cell", "at_state");
      rq.at = state_at(s->map, p, s->cfg.learner.max_steps);
    } else {
      rq.at = s->state;
    }
    if (rq.at.done) fail(400, "EpisodeDone", "current episode has finished; reset or pass at_state", "at_state");

    const ExplainResult r = explain(s->map, s->cfg, s->model, rq);
    send_json(res, 200,
              {{"structure", to_json(r.structure, s->cfg.classes)},
               {"text", r.text},
               {"traj_a", to_json(r.traj_a)},
               {"traj_u", to_json(r.traj_u)},
               {"action_a", std::string(to_string(r.action_a))},
               {"action_u", std::string(to_string(r.action_u))}});
  }));

  server.Get(sid + "/heatmap", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    const std::string model = req.has_param("model") ? req.get_param_value("model") : "agent";
    std::shared_lock lk(s->mu);
    const ValueFunction* v = find_model(s->model, s->cfg.classes, model);
    if (!v) fail(404, "UnknownModel", "no model '" + model + "'", "model");
    if (!s->model.trained) fail(409, "UntrainedOrStale", "session has not been trained");
    json values = json::array();
    for (const auto& row : heatmap(s->map, *v)) {
      json r = json::array();
      for (const auto& cell : row) r.push_back(cell ? json(*cell) : json(nullptr));
      values.push_back(std::move(r));
    }
    send_json(res, 200,
              {{"model", model},
               {"width", s->map.width()},
               {"height", s->map.height()},
               {"values", values},
               {"stale", s->stale}});
  }));

  server.Post(sid + "/map/edit", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    const json body = parse_body(req);
    const json cells = body.value("set_cells", json::array());
    if (!cells.is_array()) fail(400, "InvalidEdit", "set_cells must be a list", "set_cells");
    std::vector<CellEdit> edits;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string field = "set_cells[" + std::to_string(i) + "]";
      try {
        const auto& c = cells[i];
        const std::string glyph = c.at("glyph").get<std::string>();
        if (glyph.size() != 1) fail(400, "InvalidEdit", "glyph must be one character", field);
        edits.push_back({{c.at("x").get<int>(), c.at("y").get<int>()}, glyph[0]});
      } catch (const json::exception&) {
        fail(400, "InvalidEdit", "each edit needs x, y and glyph", field);
      }
    }
    std::unique_lock lk(s->mu);
    if (edits.empty()) {
      send_json(res, 200, {{"staleness", s->stale}, {"map", map_json(s->map)}});
      return;
    }
    try {
      s->map = apply_edits(s->map, edits, s->cfg.classes);
    } catch (const Error& e) {
      fail(400, "InvalidEdit", e.what(), "set_cells");
    }
    s->cfg.map_text = to_text(s->map);
    ++s->map_version;
    s->stale = true;
    const Position here = s->state.position;
    if (s->map.is_wall(here) || s->map.cell(here).type != CellType::Floor) {
      s->state = reset(s->map, std::nullopt, s->cfg.learner.max_steps);
      s->trace = json::array({start_frame(s->state)});
    }
    send_json(res, 200, {{"staleness", true}, {"map", map_json(s->map)}});
  }));

  server.Get(sid + "/state", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    std::shared_lock lk(s->mu);
    send_json(res, 200,
              {{"session_id", s->id},
               {"state", to_json(s->state)},
               {"trained", s->model.trained},
               {"stale", s->stale},
               {"episodes_run", s->model.episodes_run},
               {"map", map_json(s->map)},
               {"classes", classes_json(s->cfg.classes)}});
  }));

  server.Post(sid + "/step", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    const json body = parse_body(req);
    std::unique_lock lk(s->mu);
    if (s->state.done) fail(400, "EpisodeDone", "episode has finished; reset first");
    const Action a = body.contains("action") && !body.at("action").is_null()
                         ? parse_action_field(body.at("action"), "action")
                         : s->model.agent.greedy(s->map.key(s->state.position));
    const Transition t = step(s->state, a, s->map, s->cfg.classes);
    s->state = t.next_state;
    json frame = {{"step", t.next_state.step_count},
                  {"x", t.next_state.position.x},
                  {"y", t.next_state.position.y},
                  {"action", std::string(to_string(a))},
                  {"reward_by_class", vector_json(t.reward_by_class)},
                  {"reward_total", t.reward_total},
                  {"terminal", t.terminal},
                  {"outcome", std::string(outcome_name(t.outcome))}};
    s->trace.push_back(frame);
    send_json(res, 200, {{"transition", frame}, {"state", to_json(s->state)}});
  }));

  server.Post(sid + "/reset", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    const json body = parse_body(req);
    std::optional<std::size_t> index;
    if (body.contains("start_index") && !body.at("start_index").is_null()) {
      const auto& v = body.at("start_index");
      if (!v.is_number_integer() || v.get<long long>() < 0) {
        fail(400, "ValidationError", "start_index must be a non-negative integer", "start_index");
      }
      index = v.get<std::size_t>();
    }
    std::unique_lock lk(s->mu);
    try {
      s->state = reset(s->map, index, s->cfg.learner.max_steps);
    } catch (const Error& e) {
      fail(400, std::string(to_string(e.code())), e.what(), "start_index");
    }
    s->trace = json::array({start_frame(s->state)});
    send_json(res, 200, {{"state", to_json(s->state)}});
  }));

  server.Get(sid + "/faithfulness", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    std::shared_lock lk(s->mu);
    require_current(*s);
    const auto report =
        evaluate_faithfulness(s->map, s->cfg.classes, s->model.agent, s->model.ips, s->cfg.faithfulness);
    send_json(res, 200, to_json(report));
  }));

  server.Get(sid + "/trace", guarded([this](const httplib::Request& req, httplib::Response& res) {
    auto s = session(req.matches[1]);
    std::shared_lock lk(s->mu);
    send_json(res, 200, {{"frames", s->trace}, {"state", to_json(s->state)}});
  }));
}

Service::Service(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->options = std::move(options);
  impl_->server.set_default_headers(
      {{"Access-Control-Allow-Origin", impl_->options.cors_origin},
       {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
       {"Access-Control-Allow-Headers", "Content-Type"}});
  impl_->server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      send_json(res, res.status, {{"code", res.status == 404 ? "NotFound" : "HttpError"},
                                  {"message", httplib::status_message(res.status)}});
    }
  });
  impl_->routes();
}

Service::~Service() {
  stop();
  std::lock_guard lk(impl_->workers_mu);
  impl_->workers.clear();  // joins
}

int Service::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::IoError, "cannot bind " + host);
  } else if (port < 0 || port > 65535 || !impl_->server.bind_to_port(host, port)) {
    throw Error(ErrorCode::IoError, "cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->listener = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void Service::wait() {
  std::unique_lock lk(impl_->stop_mu);
  impl_->stop_cv.wait(lk, [this] { return impl_->stopped; });
}

void Service::stop() {
  impl_->server.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  {
    std::lock_guard lk(impl_->stop_mu);
    impl_->stopped = true;
  }
  impl_->stop_cv.notify_all();
}

std::string Service::create_session(const ExperimentConfig& config) {
  return impl_->add_session(config);
}

}  // namespace whynot
