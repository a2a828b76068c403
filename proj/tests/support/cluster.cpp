#include "support/cluster.hpp"

#include <random>
#include <thread>

#include "services/http.hpp"

namespace n2sky::testing {

using nlohmann::json;
using namespace std::chrono_literals;

services::DeploymentConfig cluster_config(const std::string& data_dir, int workers, int capacity) {
  services::DeploymentConfig c;
  c.gateway_port = 0;
  c.data_dir = data_dir;
  c.users_file = data_dir + "/users.json";
  c.stores_dir = N2SKY_SOURCE_DIR "/share/stores";
  c.bootstrap_users = {{"alice", "pw-a"}, {"bob", "pw-b"}};
  c.heartbeat_interval = 100ms;
  c.heartbeat_timeout = 400ms;
  c.session_lifetime = 600s;
  c.job_poll_interval = 10ms;
  c.log_level = "warn";
  for (int i = 1; i <= workers; ++i) {
    services::WorkerConfig w;
    w.service_id = "worker-" + std::to_string(i);
    w.capacity = capacity;
    w.heartbeat_interval = c.heartbeat_interval;
    c.workers.push_back(w);
  }
  return c;
}

std::string Reply::error_code() const {
  if (body.is_object() && body.contains("error")) return body["error"].value("code", "");
  return {};
}

Reply GatewayClient::call_raw(const std::string& method, const std::string& path,
                              const std::string& body) const {
  httplib::Headers headers;
  if (!session_.empty()) headers.emplace(services::kSessionHeader, session_);
  auto r = services::http_call(endpoint_, method, path, body, headers);
  Reply out;
  if (!r) return out;
  out.status = r->status;
  out.body = json::parse(r->body, nullptr, false);
  return out;
}

Reply GatewayClient::call(const std::string& method, const std::string& path,
                          const json& body) const {
  return call_raw(method, path, body.is_null() ? std::string{} : body.dump());
}

json xor_datastream() {
  return {{"kind", "explicit"},
          {"inputs", {{0, 0}, {0, 1}, {1, 0}, {1, 1}}},
          {"targets", {{0}, {1}, {1}, {0}}}};
}

json random_datastream(std::size_t n, std::size_t in, std::size_t out, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  json inputs = json::array(), targets = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json x = json::array(), t = json::array();
    for (std::size_t k = 0; k < in; ++k) x.push_back(u(rng));
    for (std::size_t k = 0; k < out; ++k) t.push_back(u(rng));
    inputs.push_back(x);
    targets.push_back(t);
  }
  return {{"kind", "explicit"}, {"inputs", inputs}, {"targets", targets}};
}

bool eventually(const std::function<bool()>& pred, std::chrono::milliseconds timeout) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(5ms);
  }
  return pred();
}

}  // namespace n2sky::testing
