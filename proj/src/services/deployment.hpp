#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "archive/archive.hpp"
#include "datastream/datastream.hpp"
#include "registry/registry.hpp"
#include "services/config.hpp"
#include "services/gateway.hpp"
#include "services/worker.hpp"

namespace n2sky::services {

// One process hosting the gateway, the registry/monitor, the archive and
// the configured simulation workers. Layout under data_dir:
//   archive/    archive entries and index
//   registry/   paradigms.jsonl, ledger.jsonl
class Deployment {
 public:
  explicit Deployment(DeploymentConfig config);
  ~Deployment();

  Deployment(const Deployment&) = delete;
  Deployment& operator=(const Deployment&) = delete;

  // Starts the gateway, then each configured worker.
  void start();
  void stop();

  std::string endpoint() const { return gateway_->endpoint(); }
  const DeploymentConfig& config() const { return config_; }

  // Starts an extra worker against this deployment's monitor.
  SimulationWorker& add_worker(WorkerConfig c);
  std::vector<SimulationWorker*> workers();
  SimulationWorker* worker(const std::string& service_id);

  registry::Registry& registry() { return *registry_; }
  archive::Archive& archive() { return *archive_; }
  // Outage switch for the archive's storage.
  archive::FaultInjectingStorage& archive_storage() { return *storage_; }
  datastream::StoreCatalog& catalog() { return *catalog_; }
  Gateway& gateway() { return *gateway_; }

 private:
  DeploymentConfig config_;
  archive::FaultInjectingStorage* storage_ = nullptr;  // owned by archive_
  std::shared_ptr<archive::Archive> archive_;
  std::shared_ptr<registry::Registry> registry_;
  std::shared_ptr<datastream::StoreCatalog> catalog_;
  std::unique_ptr<Gateway> gateway_;

  std::mutex workers_mutex_;
  std::vector<std::unique_ptr<SimulationWorker>> workers_;
  bool stopped_ = false;
};

}  // namespace n2sky::services
