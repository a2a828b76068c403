#include "services/deployment.hpp"

#include <filesystem>

#include "common/log.hpp"

namespace n2sky::services {

namespace fs = std::filesystem;

Deployment::Deployment(DeploymentConfig config) : config_(std::move(config)) {
  set_log_level(config_.log_level);
  fs::create_directories(config_.data_dir);

  auto storage = std::make_unique<archive::FaultInjectingStorage>(
      std::make_unique<archive::FileStorage>((fs::path(config_.data_dir) / "archive").string()));
  storage_ = storage.get();
  archive_ = std::make_shared<archive::Archive>(std::move(storage));

  const auto users_file = config_.users_file.empty()
                              ? (fs::path(config_.data_dir) / "users.json").string()
                              : config_.users_file;
  registry::UserStore users(users_file);
  for (const auto& u : config_.bootstrap_users) {
    if (!users.contains(u.name)) users.add_user(u.name, u.password);
  }

  registry::RegistryConfig rc;
  rc.heartbeat_interval = config_.heartbeat_interval;
  rc.heartbeat_timeout = config_.heartbeat_timeout;
  rc.session_lifetime = config_.session_lifetime;
  rc.data_dir = (fs::path(config_.data_dir) / "registry").string();
  registry_ = std::make_shared<registry::Registry>(rc, std::move(users),
                                                   std::make_shared<HttpReplicationTransport>());

  catalog_ = std::make_shared<datastream::StoreCatalog>();
  if (!config_.stores_dir.empty()) catalog_->load_directory(config_.stores_dir);

  GatewayConfig gc;
  gc.host = config_.gateway_host;
  gc.port = config_.gateway_port;
  gc.job_poll_interval = config_.job_poll_interval;
  gc.maintenance_interval = config_.heartbeat_interval;
  gateway_ = std::make_unique<Gateway>(gc, registry_, archive_, catalog_);
}

Deployment::~Deployment() { stop(); }

void Deployment::start() {
  gateway_->start();
  for (const auto& w : config_.workers) add_worker(w);
}

SimulationWorker& Deployment::add_worker(WorkerConfig c) {
  if (c.monitor_endpoint.empty()) c.monitor_endpoint = gateway_->endpoint();
  auto worker = std::make_unique<SimulationWorker>(std::move(c));
  worker->start();
  std::lock_guard lock(workers_mutex_);
  workers_.push_back(std::move(worker));
  return *workers_.back();
}

std::vector<SimulationWorker*> Deployment::workers() {
  std::lock_guard lock(workers_mutex_);
  std::vector<SimulationWorker*> out;
  for (auto& w : workers_) out.push_back(w.get());
  return out;
}

SimulationWorker* Deployment::worker(const std::string& service_id) {
  std::lock_guard lock(workers_mutex_);
  for (auto& w : workers_) {
    if (w->config().service_id == service_id) return w.get();
  }
  return nullptr;
}

void Deployment::stop() {
  if (stopped_) return;
  stopped_ = true;
  // Workers first so in-flight jobs are cancelled before the gateway goes.
  std::vector<std::unique_ptr<SimulationWorker>> workers;
  {
    std::lock_guard lock(workers_mutex_);
    workers.swap(workers_);
  }
  for (auto& w : workers) w->stop();
  gateway_->stop();
}

}  // namespace n2sky::services
