#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace nlmilp::service {

using nlohmann::json;

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::string> token;  // required as "Authorization: Bearer <token>" when set
  std::filesystem::path root = "projects";
  json run_config = json::object();   // default config for new projects
  std::filesystem::path base;          // resolves relative backend paths
  int workers = 2;
};

// File (optional) then environment: NLMILP_HOST, NLMILP_PORT, NLMILP_TOKEN,
// NLMILP_ROOT, NLMILP_TRANSCRIPT (scripted backend), NLMILP_ENGINE.
ServiceConfig load_config(const std::optional<std::filesystem::path>& file);
ServiceConfig config_from_json(const json& j, const std::filesystem::path& base);

class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Blocks until stop().
  void listen();
  // Binds (port 0 = any free port), serves on a background thread and
  // returns the port.
  int start();
  void stop();
  // Waits for queued stage runs to finish.
  void drain();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nlmilp::service
