#include "whynot/checkpoint.hpp"

#include <array>
#include <fstream>

#include <openssl/evp.h>

#include "whynot/error.hpp"
#include "whynot/json_io.hpp"

namespace whynot {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorCode::IoError, "sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xf]);
  }
  return out;
}

Checkpoint make_checkpoint(const ExperimentConfig& cfg, const ValueFunction& agent,
                           std::span<const InfluencePredictor> ips, int episodes_run, bool trained) {
  Checkpoint cp;
  cp.map_hash = sha256_hex(cfg.map_text);
  cp.config = cfg;
  cp.trained = trained;
  cp.episodes_run = episodes_run;
  cp.agent = agent;
  cp.seed = cfg.learner.seed;
  for (const auto& ip : ips) cp.ips.push_back({ip.class_id, ip.gamma, ip.mode, ip.values});
  return cp;
}

std::string checkpoint_text(const Checkpoint& cp) {
  json ips = json::array();
  for (const auto& ip : cp.ips) {
    ips.push_back({{"class_id", ip.class_id},
                   {"gamma", ip.gamma},
                   {"mode", std::string(to_string(ip.mode))},
                   {"values", to_json(ip.values)}});
  }
  const json doc = {{"format_version", cp.format_version},
                    {"map_hash", cp.map_hash},
                    {"config", to_json(cp.config)},
                    {"trained", cp.trained},
                    {"episodes_run", cp.episodes_run},
                    {"agent", to_json(cp.agent)},
                    {"ips", ips},
                    {"seed", cp.seed}};
  return doc.dump(2) + "\n";
}

Checkpoint parse_checkpoint(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::CorruptFile, std::string("checkpoint is not valid JSON: ") + e.what());
  }
  try {
    Checkpoint cp;
    cp.format_version = doc.at("format_version").get<int>();
    if (cp.format_version != kCheckpointVersion) {
      throw Error(ErrorCode::VersionMismatch,
                  "checkpoint format " + std::to_string(cp.format_version) + ", expected " +
                      std::to_string(kCheckpointVersion));
    }
    cp.map_hash = doc.at("map_hash").get<std::string>();
    try {
      cp.config = parse_config_json(doc.at("config"));
    } catch (const Error& e) {
      throw Error(ErrorCode::CorruptFile, std::string("embedded config: ") + e.what(), e.field());
    }
    if (sha256_hex(cp.config.map_text) != cp.map_hash) {
      throw Error(ErrorCode::CorruptFile, "embedded map does not match map_hash");
    }
    cp.trained = doc.at("trained").get<bool>();
    cp.episodes_run = doc.at("episodes_run").get<int>();
    cp.agent = value_function_from_json(doc.at("agent"));
    for (const auto& ip : doc.at("ips")) {
      PredictorSnapshot s;
      s.class_id = ip.at("class_id").get<int>();
      s.gamma = ip.at("gamma").get<double>();
      const auto mode = ip.at("mode").get<std::string>();
      if (mode == "magnitude") {
        s.mode = InfluenceMode::Magnitude;
      } else if (mode == "signed") {
        s.mode = InfluenceMode::Signed;
      } else {
        throw Error(ErrorCode::CorruptFile, "unknown predictor mode '" + mode + "'");
      }
      if (!cp.config.classes.contains(s.class_id)) {
        throw Error(ErrorCode::CorruptFile, "predictor for unknown class");
      }
      s.values = value_function_from_json(ip.at("values"));
      cp.ips.push_back(std::move(s));
    }
    cp.seed = doc.at("seed").get<std::uint64_t>();
    return cp;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::CorruptFile, std::string("checkpoint field missing or mistyped: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& cp) {
  const std::string text = checkpoint_text(cp);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
    out << text;
    if (!out.flush()) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "': " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path, bool force) {
  if (!std::filesystem::exists(path)) {
    throw Error(ErrorCode::IoError, "checkpoint not found: " + path.string());
  }
  Checkpoint cp = parse_checkpoint(read_file(path));
  const auto& map_path = cp.config.map_path;
  if (!map_path.empty() && std::filesystem::exists(map_path)) {
    const std::string current = read_file(map_path);
    if (sha256_hex(current) != cp.map_hash) {
      if (!force) {
        throw Error(ErrorCode::MapHashMismatch,
                    "map file '" + map_path + "' changed since the checkpoint was written");
      }
      const GridMap fresh = load_map(current, cp.config.classes);
      const GridMap stored = load_map(cp.config.map_text, cp.config.classes);
      if (fresh.width() != stored.width() || fresh.height() != stored.height()) {
        throw Error(ErrorCode::MapHashMismatch, "forced map has different dimensions");
      }
      cp.config.map_text = current;
      cp.map_hash = sha256_hex(current);
    }
  }
  return cp;
}

std::vector<InfluencePredictor> restore_predictors(const Checkpoint& cp, const GridMap& map) {
  InfluenceConfig cfg = cp.config.influence;
  auto ips = make_predictors(map, cp.config.classes, cfg, cp.seed);
  for (auto& ip : ips) {
    for (const auto& s : cp.ips) {
      if (s.class_id != ip.class_id) continue;
      ip.gamma = s.gamma;
      ip.mode = s.mode;
      ip.values = s.values;
    }
  }
  return ips;
}

}  // namespace whynot
