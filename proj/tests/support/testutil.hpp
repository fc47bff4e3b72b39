#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "whynot/config.hpp"
#include "whynot/gridworld.hpp"

namespace testutil {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(WHYNOT_FIXTURE_DIR) / name;
}

// n negative classes "c0".."c{n-1}" followed by the goal class.
inline whynot::RewardClassSet danger_classes(int n) {
  std::vector<whynot::RewardClass> cs;
  for (int i = 0; i < n; ++i) {
    const std::string name = "c" + std::to_string(i);
    cs.push_back({i, name, whynot::SignMode::Negative, "touch " + name, name});
  }
  cs.push_back({n, "goal", whynot::SignMode::Positive, "reach the goal", "goal"});
  return whynot::RewardClassSet(std::move(cs));
}

// Bordered W x H map with one start, one goal and random walls and dangers.
// Glyphs 'a', 'b', ... bind to classes 0, 1, ...
inline std::string random_map_text(std::mt19937_64& rng, int w, int h, int n_classes,
                                   double wall_p = 0.15, double object_p = 0.12) {
  std::vector<std::string> rows(static_cast<std::size_t>(h), std::string(static_cast<std::size_t>(w), '#'));
  std::vector<std::pair<int, int>> inner;
  for (int y = 1; y < h - 1; ++y) {
    for (int x = 1; x < w - 1; ++x) inner.emplace_back(x, y);
  }
  std::shuffle(inner.begin(), inner.end(), rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < inner.size(); ++i) {
    const auto [x, y] = inner[i];
    char& c = rows[static_cast<std::size_t>(y)][static_cast<std::size_t>(x)];
    if (i == 0) {
      c = 'S';
    } else if (i == 1) {
      c = 'G';
    } else {
      const double r = u(rng);
      if (r < wall_p) {
        c = '#';
      } else if (r < wall_p + object_p && n_classes > 0) {
        c = static_cast<char>('a' + static_cast<int>(rng() % static_cast<unsigned>(n_classes)));
      } else {
        c = '.';
      }
    }
  }
  std::string text = "GRID " + std::to_string(w) + " " + std::to_string(h) + "\n";
  for (const auto& r : rows) text += r + "\n";
  text += "\n";
  for (int i = 0; i < n_classes; ++i) {
    text += std::string(1, static_cast<char>('a' + i)) + " object " + std::to_string(i) + "\n";
  }
  return text;
}

inline whynot::ExperimentConfig fixture_config(const std::string& name) {
  return whynot::load_config(fixture(name));
}

}  // namespace testutil

namespace testutil {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("whynot-test-" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

}  // namespace testutil

namespace testutil {

// `key = value` lines; `;` starts a comment line.
inline std::map<std::string, std::string> read_golden(const std::string& name) {
  std::ifstream in(std::filesystem::path(WHYNOT_GOLDEN_DIR) / name);
  std::map<std::string, std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (line.empty() || line[0] == ';') continue;
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) out[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

// The stairs map with every stair cell turned into wall.
inline std::vector<whynot::CellEdit> wall_off_objects(const whynot::GridMap& map) {
  std::vector<whynot::CellEdit> edits;
  for (const auto& o : map.objects()) {
    if (o.class_id) edits.push_back({o.position, '#'});
  }
  return edits;
}

}  // namespace testutil
