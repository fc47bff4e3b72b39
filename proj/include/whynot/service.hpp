#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "whynot/config.hpp"

namespace whynot {

struct ServiceOptions {
  std::string cors_origin = "*";
  std::filesystem::path base_dir;  // resolves relative paths in posted configs
};

/// JSON-over-HTTP front end under /api/v1. Sessions live for the lifetime of
/// the object.
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves on a background thread. port 0 picks a free port.
  /// Returns the bound port; throws IoError when binding fails.
  int start(const std::string& host, int port);
  /// Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

  /// Same as POST /sessions; returns the new id.
  std::string create_session(const ExperimentConfig& config);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace whynot
