#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "whynot/checkpoint.hpp"
#include "whynot/error.hpp"
#include "whynot/json_io.hpp"
#include "whynot/pipeline.hpp"
#include "whynot/service.hpp"

using namespace whynot;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kIo = 2;

class Exit {
 public:
  Exit(int code, std::string message) : code(code), message(std::move(message)) {}
  int code;
  std::string message;
};

int exit_code_for(ErrorCode c) {
  switch (c) {
    case ErrorCode::IoError:
    case ErrorCode::CorruptFile:
    case ErrorCode::VersionMismatch:
    case ErrorCode::MapHashMismatch:
      return kIo;
    default:
      return kValidation;
  }
}

std::string env_or(const char* name, const std::string& fallback) {
  if (!fallback.empty()) return fallback;
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Action action_arg(const std::string& text) {
  const auto a = parse_action(text);
  if (!a) throw Exit(kValidation, "unknown action '" + text + "'");
  return *a;
}

struct Loaded {
  Checkpoint cp;
  GridMap map;
  Model model;
};

Loaded load(const std::string& path, bool force) {
  if (path.empty()) throw Exit(kValidation, "--ckpt is required (or set WHYNOT_CKPT)");
  Loaded l{load_checkpoint(path, force), {}, {}};
  l.map = load_map(l.cp.config.map_text, l.cp.config.classes);
  l.model = model_from_checkpoint(l.cp, l.map);
  return l;
}

int cmd_train(const std::string& config_path, const std::string& out) {
  if (config_path.empty()) throw Exit(kValidation, "--config is required (or set WHYNOT_CONFIG)");
  const ExperimentConfig cfg = load_config(config_path);
  const GridMap map = load_map(cfg.map_text, cfg.classes);
  const Model model = train_model(map, cfg);
  const TrainingSummary summary = summarize(map, cfg, model);
  save_checkpoint(out, make_checkpoint(cfg, model.agent, model.ips, model.episodes_run, model.trained));
  std::cout << "episodes: " << summary.episodes << "\n";
  std::cout << "success rate: " << summary.success_rate << "\n";
  for (const auto& [id, r] : summary.residuals) {
    std::cout << "residual " << cfg.classes[id].name << ": " << r << "\n";
  }
  std::cout << "checkpoint: " << out << "\n";
  return kOk;
}

int cmd_explain(const std::string& ckpt, const std::string& state, const std::string& counterfactual,
                const std::string& mode, const std::string& agent_action, bool as_json, bool force) {
  const Loaded l = load(ckpt, force);
  if (!l.model.trained) throw Exit(kValidation, "checkpoint is untrained");
  ExplainRequest rq;
  const auto max_steps = l.cp.config.learner.max_steps;
  if (state.empty()) {
    rq.at = reset(l.map, std::nullopt, max_steps);
  } else {
    const auto parts = split(state, ',');
    Position p;
    try {
      if (parts.size() != 2) throw std::invalid_argument("x,y");
      p = {std::stoi(parts[0]), std::stoi(parts[1])};
    } catch (const std::exception&) {
      throw Exit(kValidation, "--state must be x,y");
    }
    if (l.map.is_wall(p)) throw Exit(kValidation, "state is not an open cell");
    rq.at = state_at(l.map, p, max_steps);
  }
  for (const auto& a : split(counterfactual, ',')) rq.counterfactual.push_back(action_arg(a));
  if (!agent_action.empty()) rq.agent_action = action_arg(agent_action);
  const auto m = parse_explanation_mode(mode);
  if (!m) throw Exit(kValidation, "--mode must be aggregated or local");
  rq.mode = *m;

  const ExplainResult r = explain(l.map, l.cp.config, l.model, rq);
  if (as_json) {
    const nlohmann::json j = {{"structure", to_json(r.structure, l.cp.config.classes)},
                              {"text", r.text},
                              {"traj_a", to_json(r.traj_a)},
                              {"traj_u", to_json(r.traj_u)},
                              {"action_a", std::string(to_string(r.action_a))},
                              {"action_u", std::string(to_string(r.action_u))}};
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << r.text << "\n";
  }
  return kOk;
}

int cmd_faithfulness(const std::string& ckpt, const std::string& thresholds, const std::string& out,
                     bool force) {
  const Loaded l = load(ckpt, force);
  if (!l.model.trained) throw Exit(kValidation, "checkpoint is untrained");
  FaithfulnessSettings settings = l.cp.config.faithfulness;
  const auto parts = split(thresholds, ',');
  if (!parts.empty()) {
    settings.thresholds.clear();
    for (const auto& t : parts) {
      try {
        std::size_t used = 0;
        settings.thresholds.push_back(std::stod(t, &used));
        if (used != t.size()) throw std::invalid_argument(t);
      } catch (const std::exception&) {
        throw Exit(kValidation, "bad threshold '" + t + "'");
      }
    }
  }
  const auto report =
      evaluate_faithfulness(l.map, l.cp.config.classes, l.model.agent, l.model.ips, settings);
  const std::string text = to_json(report).dump(2) + "\n";
  if (out.empty()) {
    std::cout << text;
    return kOk;
  }
  write_text(out, text);
  std::filesystem::path csv(out);
  csv.replace_extension(".csv");
  write_text(csv, threshold_curve_csv(report));
  std::cout << "direct agreement: " << report.direct_agreement << "\n";
  std::cout << "report: " << out << "\ncurve: " << csv.string() << "\n";
  return kOk;
}

int cmd_heatmap(const std::string& ckpt, const std::string& model, const std::string& out, bool force) {
  const Loaded l = load(ckpt, force);
  const ValueFunction* v = find_model(l.model, l.cp.config.classes, model);
  if (!v) throw Exit(kValidation, "unknown model '" + model + "'");
  std::ostringstream csv;
  csv.precision(17);
  for (const auto& row : heatmap(l.map, *v)) {
    for (std::size_t x = 0; x < row.size(); ++x) {
      if (x) csv << ',';
      if (row[x]) csv << *row[x];
    }
    csv << '\n';
  }
  if (out.empty()) {
    std::cout << csv.str();
  } else {
    write_text(out, csv.str());
  }
  return kOk;
}

volatile std::sig_atomic_t g_interrupted = 0;

extern "C" void on_signal(int) { g_interrupted = 1; }

int cmd_serve(const std::string& config_path, const std::string& host, int port, const std::string& cors) {
  ServiceOptions options;
  options.cors_origin = cors;
  if (!config_path.empty()) options.base_dir = std::filesystem::path(config_path).parent_path();
  Service service(options);
  std::string session;
  if (!config_path.empty()) session = service.create_session(load_config(config_path));
  const int bound = service.start(host, port);
  std::cout << "listening on http://" << host << ":" << bound << "/api/v1\n";
  if (!session.empty()) std::cout << "session: " << session << "\n";
  std::cout.flush();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  service.stop();
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Influence-predictor explanations for gridworld agents.\n"
               "Exit codes: 0 success, 1 validation error, 2 I/O error."};
  app.require_subcommand(1);

  std::string config, out, ckpt, state, counterfactual, mode = "aggregated", agent_action;
  std::string thresholds, model = "agent", host = "127.0.0.1", cors = "*";
  int port = 8080;
  bool as_json = false, force = false;

  auto* train = app.add_subcommand("train", "co-train agent and influence predictors");
  train->add_option("--config", config, "experiment config (default $WHYNOT_CONFIG)");
  train->add_option("--out", out, "checkpoint to write")->required();

  auto* expl = app.add_subcommand("explain", "answer a why-not question");
  expl->add_option("--ckpt", ckpt, "checkpoint (default $WHYNOT_CKPT)");
  expl->add_option("--state", state, "x,y; defaults to the first start");
  expl->add_option("--counterfactual", counterfactual, "actions, e.g. up,up,left")->required();
  expl->add_option("--mode", mode, "aggregated or local")->capture_default_str();
  expl->add_option("--agent-action", agent_action, "force the agent's first action");
  expl->add_flag("--json", as_json, "print the full structure as JSON");
  expl->add_flag("--force", force, "use the current map file even if it changed");

  auto* faith = app.add_subcommand("faithfulness", "evaluate predictor faithfulness");
  faith->add_option("--ckpt", ckpt, "checkpoint (default $WHYNOT_CKPT)");
  faith->add_option("--thresholds", thresholds, "criticality thresholds, comma separated");
  faith->add_option("--out", out, "report.json; the curve goes next to it as .csv");
  faith->add_flag("--force", force, "use the current map file even if it changed");

  auto* heat = app.add_subcommand("heatmap", "export per-cell max values as CSV");
  heat->add_option("--ckpt", ckpt, "checkpoint (default $WHYNOT_CKPT)");
  heat->add_option("--model", model, "agent, class name or class id")->capture_default_str();
  heat->add_option("--out", out, "CSV output; stdout when absent");
  heat->add_flag("--force", force, "use the current map file even if it changed");

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  serve->add_option("--config", config, "config for an initial session (default $WHYNOT_CONFIG)");
  serve->add_option("--host", host)->capture_default_str();
  serve->add_option("--port", port, "0 picks a free port")->capture_default_str();
  serve->add_option("--cors-origin", cors, "allowed UI origin")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kValidation;
  }

  try {
    config = env_or("WHYNOT_CONFIG", config);
    ckpt = env_or("WHYNOT_CKPT", ckpt);
    if (*train) return cmd_train(config, out);
    if (*expl) return cmd_explain(ckpt, state, counterfactual, mode, agent_action, as_json, force);
    if (*faith) return cmd_faithfulness(ckpt, thresholds, out, force);
    if (*heat) return cmd_heatmap(ckpt, model, out, force);
    if (*serve) return cmd_serve(config, host, port, cors);
  } catch (const Exit& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << e.what();
    if (!e.field().empty()) std::cerr << " (" << e.field() << ")";
    std::cerr << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  }
  return kOk;
}
