#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>

#include "archive/archive.hpp"
#include "datastream/datastream.hpp"
#include "registry/registry.hpp"
#include "services/job.hpp"
#include "services/scheduler.hpp"

namespace n2sky::services {

// Pushes descriptors to workers with PUT /worker/v1/paradigms/{id}.
class HttpReplicationTransport final : public registry::ReplicationTransport {
 public:
  bool push(const registry::ServiceRecord& worker,
            const paradigm::ParadigmDescriptor& descriptor) override;
};

struct GatewayConfig {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::chrono::milliseconds job_poll_interval{20};
  std::chrono::milliseconds maintenance_interval{2000};
};

// The REST gateway. It owns the job table and the scheduler and is the only
// writer to the archive. See docs/api.md for the routes.
class Gateway {
 public:
  Gateway(GatewayConfig config, std::shared_ptr<registry::Registry> registry,
          std::shared_ptr<archive::Archive> archive,
          std::shared_ptr<datastream::StoreCatalog> catalog);
  ~Gateway();

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void start();
  void stop();
  std::string endpoint() const;

  std::optional<JobStatus> job(const std::string& job_id) const;
  const Scheduler& scheduler() const { return *scheduler_; }

 private:
  struct JobRecord {
    JobSpec spec;
    JobStatus status;
    std::string owner;
    archive::ArchiveKey parent;  // archive entry the result derives from
    std::string worker_endpoint;
  };

  void setup_routes();
  void setup_internal_routes();

  std::string submit_job(JobRecord record);
  bool dispatch(const std::string& job_id, const std::string& worker_id);
  void fail_job(const std::string& job_id, const std::string& reason);
  std::vector<WorkerNode> worker_nodes() const;

  void poll_loop();
  void poll_once();
  void poll_job(const std::string& job_id);
  void finish_job(const std::string& job_id, const nlohmann::json& result);
  void maintenance_loop();

  GatewayConfig config_;
  std::shared_ptr<registry::Registry> registry_;
  std::shared_ptr<archive::Archive> archive_;
  std::shared_ptr<datastream::StoreCatalog> catalog_;
  std::unique_ptr<Scheduler> scheduler_;

  httplib::Server server_;
  std::thread listen_thread_;
  std::thread poll_thread_;
  std::thread maintenance_thread_;
  int bound_port_ = 0;
  std::atomic<bool> started_{false};
  std::atomic<bool> stopping_{false};
  std::mutex wake_mutex_;
  std::condition_variable wake_cv_;

  mutable std::mutex mutex_;  // guards jobs_
  std::map<std::string, JobRecord> jobs_;
};

}  // namespace n2sky::services
