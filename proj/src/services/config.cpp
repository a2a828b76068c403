#include "services/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "common/error.hpp"

namespace n2sky::services {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

const std::vector<std::string>& worker_config_keys() {
  static const std::vector<std::string> keys{
      "service_id", "host", "port", "capacity", "affinity", "monitor_endpoint",
      "heartbeat_interval_ms"};
  return keys;
}

ordered_json to_json(const WorkerConfig& c) {
  ordered_json j;
  j["service_id"] = c.service_id;
  j["host"] = c.host;
  j["port"] = c.port;
  j["capacity"] = c.capacity;
  j["affinity"] = registry::affinity_name(c.affinity);
  j["monitor_endpoint"] = c.monitor_endpoint;
  j["heartbeat_interval_ms"] = c.heartbeat_interval.count();
  return j;
}

WorkerConfig worker_config_from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::invalid_argument, "worker config must be an object");
  const auto& keys = worker_config_keys();
  for (const auto& [k, v] : j.items()) {
    if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
      throw Error(Errc::invalid_argument, "unknown worker config key '" + k + "'");
    }
  }
  try {
    WorkerConfig c;
    c.service_id = j.at("service_id").get<std::string>();
    c.host = j.value("host", c.host);
    c.port = j.value("port", c.port);
    c.capacity = j.value("capacity", c.capacity);
    c.affinity = registry::parse_affinity(j.value("affinity", std::string("compute")));
    c.monitor_endpoint = j.value("monitor_endpoint", std::string{});
    c.heartbeat_interval =
        std::chrono::milliseconds(j.value("heartbeat_interval_ms", std::int64_t{2000}));
    if (c.capacity < 1) throw Error(Errc::invalid_argument, "worker capacity must be >= 1");
    return c;
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed worker config: ") + e.what());
  }
}

namespace {

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || base.empty() || fs::path(p).is_absolute()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

const char* env(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

}  // namespace

DeploymentConfig deployment_config_from_json(const json& j, const std::string& base_dir) {
  DeploymentConfig c;
  try {
    if (j.contains("gateway")) {
      const auto& g = j.at("gateway");
      c.gateway_host = g.value("host", c.gateway_host);
      c.gateway_port = g.value("port", c.gateway_port);
    }
    c.data_dir = resolve(base_dir, j.value("data_dir", c.data_dir));
    c.stores_dir = resolve(base_dir, j.value("stores_dir", std::string{}));
    c.users_file = resolve(base_dir, j.value("users_file", std::string{}));
    for (const auto& u : j.value("bootstrap_users", json::array())) {
      c.bootstrap_users.push_back(
          {u.at("name").get<std::string>(), u.at("password").get<std::string>()});
    }
    c.heartbeat_interval = std::chrono::milliseconds(
        j.value("heartbeat_interval_ms", std::int64_t{c.heartbeat_interval.count()}));
    c.heartbeat_timeout = std::chrono::milliseconds(
        j.value("heartbeat_timeout_ms", std::int64_t{c.heartbeat_timeout.count()}));
    c.session_lifetime = std::chrono::seconds(
        j.value("session_lifetime_s", std::int64_t{c.session_lifetime.count()}));
    c.job_poll_interval = std::chrono::milliseconds(
        j.value("job_poll_interval_ms", std::int64_t{c.job_poll_interval.count()}));
    c.log_level = j.value("log_level", c.log_level);
    for (const auto& w : j.value("workers", json::array())) {
      json wj = w;
      if (!wj.contains("heartbeat_interval_ms")) {
        wj["heartbeat_interval_ms"] = c.heartbeat_interval.count();
      }
      c.workers.push_back(worker_config_from_json(wj));
    }
  } catch (const json::exception& e) {
    throw Error(Errc::invalid_argument, std::string("malformed deployment config: ") + e.what());
  }
  if (c.users_file.empty()) c.users_file = (fs::path(c.data_dir) / "users.json").string();
  if (c.heartbeat_timeout <= c.heartbeat_interval) {
    throw Error(Errc::invalid_argument, "heartbeat_timeout_ms must exceed heartbeat_interval_ms");
  }
  return c;
}

DeploymentConfig load_deployment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::not_found, "cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SyntaxError(e.byte > 0 ? e.byte - 1 : 0, "malformed config '" + path + "'");
  }
  auto base = fs::path(path).parent_path().string();
  auto c = deployment_config_from_json(j, base.empty() ? "." : base);
  apply_env_overrides(c);
  return c;
}

void apply_env_overrides(DeploymentConfig& c) {
  if (auto v = env("N2SKY_GATEWAY_HOST")) c.gateway_host = v;
  if (auto v = env("N2SKY_GATEWAY_PORT")) c.gateway_port = std::atoi(v);
  if (auto v = env("N2SKY_DATA_DIR")) {
    const bool default_users = c.users_file == (fs::path(c.data_dir) / "users.json").string();
    c.data_dir = v;
    if (default_users) c.users_file = (fs::path(c.data_dir) / "users.json").string();
  }
  if (auto v = env("N2SKY_STORES_DIR")) c.stores_dir = v;
  if (auto v = env("N2SKY_USERS_FILE")) c.users_file = v;
  if (auto v = env("N2SKY_HEARTBEAT_INTERVAL_MS")) {
    c.heartbeat_interval = std::chrono::milliseconds(std::atoll(v));
    for (auto& w : c.workers) w.heartbeat_interval = c.heartbeat_interval;
  }
  if (auto v = env("N2SKY_HEARTBEAT_TIMEOUT_MS")) {
    c.heartbeat_timeout = std::chrono::milliseconds(std::atoll(v));
  }
  if (auto v = env("N2SKY_SESSION_LIFETIME_S")) c.session_lifetime = std::chrono::seconds(std::atoll(v));
  if (auto v = env("N2SKY_WORKER_CAPACITY")) {
    for (auto& w : c.workers) w.capacity = std::max(1, std::atoi(v));
  }
  if (auto v = env("N2SKY_LOG_LEVEL")) c.log_level = v;
}

ordered_json to_json(const DeploymentConfig& c) {
  ordered_json j;
  j["gateway"] = {{"host", c.gateway_host}, {"port", c.gateway_port}};
  j["data_dir"] = c.data_dir;
  j["stores_dir"] = c.stores_dir;
  j["users_file"] = c.users_file;
  j["heartbeat_interval_ms"] = c.heartbeat_interval.count();
  j["heartbeat_timeout_ms"] = c.heartbeat_timeout.count();
  j["session_lifetime_s"] = c.session_lifetime.count();
  j["job_poll_interval_ms"] = c.job_poll_interval.count();
  j["log_level"] = c.log_level;
  ordered_json workers = ordered_json::array();
  for (const auto& w : c.workers) workers.push_back(to_json(w));
  j["workers"] = std::move(workers);
  return j;
}

}  // namespace n2sky::services
