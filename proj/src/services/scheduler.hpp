#pragma once

#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include "registry/registry.hpp"

namespace n2sky::services {

struct WorkerNode {
  std::string service_id;
  bool up = false;
  registry::Affinity affinity = registry::Affinity::compute;
  int capacity = 1;
  int running = 0;
  std::set<std::string> paradigms;  // replicated paradigm ids
};

struct Placement {
  enum class Action { assign, queue, fail };
  Action action = Action::queue;
  std::string worker_id;  // set iff assign
  std::string reason;     // set iff fail
};

// Pure placement rule. Eligible workers are up, compute-affine, hold the
// paradigm and have a free slot; the least loaded wins and ties go to the
// lowest service id. No eligible worker means queue, unless no compute
// worker is up at all, which fails the job.
Placement assign_worker(const std::vector<WorkerNode>& nodes, const std::string& paradigm_id);

// FIFO job placement over the registry's worker view. Callbacks run under
// the scheduler lock and must not call back into the scheduler.
class Scheduler {
 public:
  // Current worker view; the `running` field is ignored and supplied from
  // the scheduler's own bookkeeping.
  using NodeSource = std::function<std::vector<WorkerNode>()>;
  // Hands the job to the worker; false when the worker refused or was
  // unreachable (the job stays queued).
  using Dispatch = std::function<bool(const std::string& job_id, const std::string& worker_id)>;
  using Fail = std::function<void(const std::string& job_id, const std::string& reason)>;

  Scheduler(NodeSource nodes, Dispatch dispatch, Fail fail);

  void submit(const std::string& job_id, const std::string& paradigm_id);
  // Releases the job's slot (a no-op for unknown ids) and pumps the queue.
  void on_finished(const std::string& job_id);
  // Places as many queued jobs as capacity allows, in FIFO order.
  void pump();

  std::size_t queued() const;
  std::map<std::string, int> running() const;

 private:
  struct Pending {
    std::string job_id;
    std::string paradigm_id;
  };
  void pump_locked();

  NodeSource nodes_;
  Dispatch dispatch_;
  Fail fail_;

  mutable std::mutex mutex_;
  std::deque<Pending> queue_;
  std::map<std::string, std::string> assigned_;  // job id -> worker id
  std::map<std::string, int> load_;              // worker id -> running jobs
};

}  // namespace n2sky::services
