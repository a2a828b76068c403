#pragma once

// Deployment and worker configuration. One JSON config file describes the
// whole desk-scale deployment; N2SKY_* environment variables override it.
// Reference: docs/configuration.md.

#include <chrono>
#include <string>
#include <vector>

#include <json.hpp>

#include "registry/registry.hpp"

namespace n2sky::services {

// Everything a simulation worker is told. It deliberately has no archive,
// datastream or registry-store locator: workers receive fully inlined jobs
// and answer over their own HTTP endpoint.
struct WorkerConfig {
  std::string service_id;
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  int capacity = 1;
  registry::Affinity affinity = registry::Affinity::compute;
  std::string monitor_endpoint;  // service monitor for register/heartbeat
  std::chrono::milliseconds heartbeat_interval{2000};
};

// The closed key set of the worker config document.
const std::vector<std::string>& worker_config_keys();

nlohmann::ordered_json to_json(const WorkerConfig& c);
// Rejects keys outside worker_config_keys().
WorkerConfig worker_config_from_json(const nlohmann::json& j);

struct BootstrapUser {
  std::string name;
  std::string password;
};

struct DeploymentConfig {
  std::string gateway_host = "127.0.0.1";
  int gateway_port = 8080;
  std::string data_dir = "n2sky-data";
  std::string stores_dir;
  std::string users_file;  // default <data_dir>/users.json
  std::vector<BootstrapUser> bootstrap_users;
  std::chrono::milliseconds heartbeat_interval{2000};
  std::chrono::milliseconds heartbeat_timeout{6000};
  std::chrono::seconds session_lifetime{1800};
  std::chrono::milliseconds job_poll_interval{20};
  std::string log_level = "info";
  std::vector<WorkerConfig> workers;
};

// Relative paths resolve against `base_dir`.
DeploymentConfig deployment_config_from_json(const nlohmann::json& j,
                                             const std::string& base_dir = {});
DeploymentConfig load_deployment_config(const std::string& path);
void apply_env_overrides(DeploymentConfig& c);
nlohmann::ordered_json to_json(const DeploymentConfig& c);

}  // namespace n2sky::services
