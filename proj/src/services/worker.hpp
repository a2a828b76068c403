#pragma once

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "engine/network.hpp"
#include "paradigm/paradigm.hpp"
#include "services/config.hpp"
#include "services/job.hpp"

namespace n2sky::services {

// Executes one job with the engine named by the paradigm descriptor and
// returns its result payload:
//   train/retrain: {"training_result": {...}, "network": {...trained...}}
//   evaluate:      {"evaluation_result": {...}}
// Engine errors propagate as n2sky::Error.
nlohmann::ordered_json run_job(const paradigm::ParadigmDescriptor& descriptor,
                               const JobSpec& job, const engine::ProgressSink& sink);

// Worker-side view of one job, as served on GET /worker/v1/jobs/{id}.
struct WorkerJobView {
  std::string job_id;
  JobPhase phase = JobPhase::running;
  std::size_t series_length = 0;
  std::vector<double> error_series;  // entries from the requested offset
  std::optional<nlohmann::ordered_json> result;
  std::string failure_reason;
};

nlohmann::ordered_json to_json(const WorkerJobView& v);
WorkerJobView worker_job_view_from_json(const nlohmann::json& j);

// A simulation service node. Holds replicated paradigms and runs up to
// `capacity` jobs concurrently, each on its own thread.
//
// HTTP surface:
//   GET    /worker/v1/health
//   GET    /worker/v1/paradigms
//   PUT    /worker/v1/paradigms/{id}     descriptor body
//   POST   /worker/v1/jobs               JobSpec body; 503 when full
//   GET    /worker/v1/jobs/{id}?since=N
//   DELETE /worker/v1/jobs/{id}
class SimulationWorker {
 public:
  explicit SimulationWorker(WorkerConfig config);
  ~SimulationWorker();

  SimulationWorker(const SimulationWorker&) = delete;
  SimulationWorker& operator=(const SimulationWorker&) = delete;

  // Binds the HTTP endpoint, registers with the monitor (when configured)
  // and starts heartbeating.
  void start();
  void stop();
  // Fault injection: the endpoint vanishes, heartbeats cease and running
  // computations are abandoned without reporting.
  void crash();

  std::string endpoint() const;
  const WorkerConfig& config() const { return config_; }
  bool registered() const { return registered_; }

  void install_paradigm(paradigm::ParadigmDescriptor descriptor);
  std::set<std::string> local_paradigms() const;

  // Errors: unavailable (at capacity), failed_precondition (paradigm not
  // replicated here), already_exists (duplicate job id).
  void submit(JobSpec job);
  std::optional<WorkerJobView> job(const std::string& job_id, std::size_t since = 0) const;
  void forget(const std::string& job_id);

  std::size_t running() const;
  // Largest number of simultaneously running jobs ever observed.
  std::size_t peak_running() const;
  std::size_t completed() const;

 private:
  struct JobState {
    JobPhase phase = JobPhase::running;
    engine::ProgressLog progress;
    std::optional<nlohmann::ordered_json> result;
    std::string failure_reason;
  };

  void setup_routes();
  bool register_with_monitor();
  void heartbeat_loop();
  void execute(JobSpec job, std::shared_ptr<JobState> state,
               paradigm::ParadigmDescriptor descriptor);

  WorkerConfig config_;
  httplib::Server server_;
  std::thread listen_thread_;
  std::thread heartbeat_thread_;
  int bound_port_ = 0;

  std::atomic<bool> stopping_{false};
  std::atomic<bool> registered_{false};
  std::atomic<bool> started_{false};
  std::mutex hb_mutex_;
  std::condition_variable hb_cv_;

  mutable std::mutex mutex_;
  std::map<std::string, paradigm::ParadigmDescriptor> paradigms_;
  std::map<std::string, std::shared_ptr<JobState>> jobs_;
  std::size_t running_ = 0;
  std::size_t peak_running_ = 0;
  std::size_t completed_ = 0;
  std::vector<std::thread> job_threads_;
};

}  // namespace n2sky::services
