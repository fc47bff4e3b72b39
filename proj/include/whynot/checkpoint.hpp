#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "whynot/config.hpp"
#include "whynot/influence.hpp"
#include "whynot/value_function.hpp"

namespace whynot {

inline constexpr int kCheckpointVersion = 1;

struct PredictorSnapshot {
  int class_id = 0;
  double gamma = 0.5;
  InfluenceMode mode = InfluenceMode::Magnitude;
  ValueFunction values;

  friend bool operator==(const PredictorSnapshot&, const PredictorSnapshot&) = default;
};

/// Everything needed to explain or evaluate without retraining. Replay
/// buffers are not stored.
struct Checkpoint {
  int format_version = kCheckpointVersion;
  std::string map_hash;  // sha256 of config.map_text, lowercase hex
  ExperimentConfig config;
  bool trained = false;
  int episodes_run = 0;
  ValueFunction agent;
  std::vector<PredictorSnapshot> ips;
  std::uint64_t seed = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

std::string sha256_hex(std::string_view data);

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const ValueFunction& agent,
                           std::span<const InfluencePredictor> ips, int episodes_run, bool trained);

/// Sorted keys, two-space indent, trailing newline.
std::string checkpoint_text(const Checkpoint& cp);
/// Throws CorruptFile or VersionMismatch.
Checkpoint parse_checkpoint(std::string_view text);

/// Throws IoError when the file cannot be written.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp);

/// When the checkpoint names a map file that still exists, its current text
/// must hash to map_hash (MapHashMismatch); with `force` the current file
/// replaces the stored map instead.
Checkpoint load_checkpoint(const std::filesystem::path& path, bool force = false);

/// Predictors rebuilt from snapshots, with empty buffers.
std::vector<InfluencePredictor> restore_predictors(const Checkpoint& cp, const GridMap& map);

}  // namespace whynot
