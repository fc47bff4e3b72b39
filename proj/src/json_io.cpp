#include "whynot/json_io.hpp"

#include "whynot/error.hpp"

namespace whynot {

using nlohmann::json;

namespace {

json matrix_rows(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from(const json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw Error(ErrorCode::CorruptFile, "matrix has the wrong number of rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const json& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw Error(ErrorCode::CorruptFile, "matrix row has the wrong length");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

Eigen::VectorXd vector_from(const json& j, Eigen::Index n) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n) {
    throw Error(ErrorCode::CorruptFile, "vector has the wrong length");
  }
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
  return v;
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json curve(const std::vector<ThresholdPoint>& points) {
  json out = json::array();
  for (const auto& p : points) {
    out.push_back({{"threshold", p.threshold},
                   {"agreement", optional_number(p.agreement)},
                   {"coverage", p.coverage}});
  }
  return out;
}

}  // namespace

json to_json(const ValueFunction& v) {
  if (const auto* t = v.as_table()) {
    json rows = json::array();
    const auto& m = t->matrix();
    for (Eigen::Index s = 0; s < m.rows(); ++s) {
      if ((m.row(s).array() == t->default_value()).all()) continue;
      rows.push_back({s, {m(s, 0), m(s, 1), m(s, 2), m(s, 3)}});
    }
    return {{"backing", "table"},
            {"states", t->state_count()},
            {"default", t->default_value()},
            {"rows", rows}};
  }
  const auto& a = *v.as_approximator();
  return {{"backing", "approximator"},
          {"width", a.width()},
          {"height", a.height()},
          {"hidden", a.hidden()},
          {"w1", matrix_rows(a.w1())},
          {"b1", vector_json(a.b1())},
          {"w2", matrix_rows(a.w2())},
          {"b2", vector_json(a.b2())},
          {"visited", a.visited_mask()}};
}

ValueFunction value_function_from_json(const json& j) {
  try {
    const std::string backing = j.at("backing").get<std::string>();
    if (backing == "table") {
      const auto states = j.at("states").get<Eigen::Index>();
      if (states < 0) throw Error(ErrorCode::CorruptFile, "negative state count");
      ValueTable t(states, j.at("default").get<double>());
      Eigen::Index previous = -1;
      for (const auto& row : j.at("rows")) {
        const auto s = row.at(0).get<Eigen::Index>();
        if (s <= previous || s >= states) throw Error(ErrorCode::CorruptFile, "bad table row index");
        previous = s;
        const auto& vals = row.at(1);
        if (vals.size() != kActionCount) throw Error(ErrorCode::CorruptFile, "table row needs 4 values");
        for (int a = 0; a < kActionCount; ++a) t.matrix()(s, a) = vals.at(static_cast<std::size_t>(a)).get<double>();
      }
      return ValueFunction(std::move(t));
    }
    if (backing == "approximator") {
      const int w = j.at("width").get<int>();
      const int h = j.at("height").get<int>();
      const int hidden = j.at("hidden").get<int>();
      if (w <= 0 || h <= 0 || hidden <= 0) throw Error(ErrorCode::CorruptFile, "bad approximator shape");
      auto visited = j.at("visited").get<std::vector<std::uint8_t>>();
      if (visited.size() != static_cast<std::size_t>(w) * static_cast<std::size_t>(h)) {
        throw Error(ErrorCode::CorruptFile, "visited mask has the wrong length");
      }
      return ValueFunction(Approximator::from_parts(
          w, h, matrix_from(j.at("w1"), hidden, w + h), vector_from(j.at("b1"), hidden),
          matrix_from(j.at("w2"), kActionCount, hidden), vector_from(j.at("b2"), kActionCount),
          std::move(visited)));
    }
    throw Error(ErrorCode::CorruptFile, "unknown backing '" + backing + "'");
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("bad value function: ") + e.what());
  }
}

json to_json(const ExplanationStructure& s, const RewardClassSet& classes) {
  json per_class = json::array();
  for (const auto& c : s.per_class) {
    per_class.push_back({{"class_id", c.class_id},
                         {"class", classes.contains(c.class_id) ? classes[c.class_id].name : ""},
                         {"mean_a", c.mean_a},
                         {"mean_u", c.mean_u},
                         {"dominant", std::string(to_string(c.dominant))}});
  }
  json out = {{"mode", std::string(to_string(s.mode))}, {"per_class", per_class}, {"empty", s.empty}};
  if (s.local) {
    out["local"] = {{"set_a", s.local->set_a},
                    {"set_u", s.local->set_u},
                    {"method", std::string(to_string(s.local->method))}};
  } else {
    out["local"] = nullptr;
  }
  return out;
}

json to_json(const EnvState& s) {
  return {{"x", s.position.x},
          {"y", s.position.y},
          {"step_count", s.step_count},
          {"done", s.done},
          {"max_steps", s.max_steps}};
}

json to_json(const Trajectory& t) {
  json path = json::array();
  for (Position p : t.path()) path.push_back({p.x, p.y});
  json actions = json::array();
  for (const auto& s : t.steps) actions.push_back(std::string(to_string(s.action)));
  json forced = json::array();
  for (Action a : t.forced) forced.push_back(std::string(to_string(a)));
  return {{"origin", t.origin == Origin::Agent ? "agent" : "counterfactual"},
          {"path", path},
          {"actions", actions},
          {"forced", forced},
          {"terminated", std::string(to_string(t.terminated))},
          {"danger_class", t.danger_class >= 0 ? json(t.danger_class) : json(nullptr)},
          {"length", t.size()}};
}

json to_json(const FaithfulnessReport& r) {
  double mean = 0.0;
  for (double v : r.rmspe_per_run) mean += v;
  return {{"direct_agreement", r.direct_agreement},
          {"probe_accuracy", optional_number(r.probe_accuracy)},
          {"probe", r.probe},
          {"probe_k", r.probe_k},
          {"threshold_curve", curve(r.threshold_curve)},
          {"positive_only_curve", curve(r.positive_only_curve)},
          {"rmspe_per_run", r.rmspe_per_run},
          {"rmspe_mean", r.rmspe_per_run.empty()
                             ? json(nullptr)
                             : json(mean / static_cast<double>(r.rmspe_per_run.size()))},
          {"runs_skipped", r.runs_skipped},
          {"states_evaluated", r.states_evaluated},
          {"excluded_near_zero", r.excluded_near_zero}};
}

}  // namespace whynot
