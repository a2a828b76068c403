#include "services/scheduler.hpp"

#include <algorithm>

namespace n2sky::services {

Placement assign_worker(const std::vector<WorkerNode>& nodes, const std::string& paradigm_id) {
  const WorkerNode* best = nullptr;
  bool any_up = false;
  for (const auto& n : nodes) {
    if (!n.up || n.affinity != registry::Affinity::compute) continue;
    any_up = true;
    if (!n.paradigms.count(paradigm_id) || n.running >= n.capacity) continue;
    if (!best || n.running < best->running ||
        (n.running == best->running && n.service_id < best->service_id)) {
      best = &n;
    }
  }
  Placement p;
  if (best) {
    p.action = Placement::Action::assign;
    p.worker_id = best->service_id;
  } else if (!any_up) {
    p.action = Placement::Action::fail;
    p.reason = "no compute capacity: no simulation worker is up";
  }
  return p;
}

Scheduler::Scheduler(NodeSource nodes, Dispatch dispatch, Fail fail)
    : nodes_(std::move(nodes)), dispatch_(std::move(dispatch)), fail_(std::move(fail)) {}

void Scheduler::submit(const std::string& job_id, const std::string& paradigm_id) {
  std::lock_guard lock(mutex_);
  queue_.push_back({job_id, paradigm_id});
  pump_locked();
}

void Scheduler::on_finished(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  auto it = assigned_.find(job_id);
  if (it != assigned_.end()) {
    if (--load_[it->second] <= 0) load_.erase(it->second);
    assigned_.erase(it);
  }
  pump_locked();
}

void Scheduler::pump() {
  std::lock_guard lock(mutex_);
  pump_locked();
}

void Scheduler::pump_locked() {
  if (queue_.empty()) return;
  auto nodes = nodes_();
  for (auto& n : nodes) {
    auto it = load_.find(n.service_id);
    n.running = it == load_.end() ? 0 : it->second;
  }
  std::deque<Pending> still_queued;
  while (!queue_.empty()) {
    Pending job = std::move(queue_.front());
    queue_.pop_front();
    bool placed = false;
    while (!placed) {
      auto p = assign_worker(nodes, job.paradigm_id);
      if (p.action == Placement::Action::fail) {
        fail_(job.job_id, p.reason);
        placed = true;
        break;
      }
      if (p.action == Placement::Action::queue) break;
      auto node = std::find_if(nodes.begin(), nodes.end(),
                               [&](const WorkerNode& n) { return n.service_id == p.worker_id; });
      if (dispatch_(job.job_id, p.worker_id)) {
        ++node->running;
        ++load_[p.worker_id];
        assigned_[job.job_id] = p.worker_id;
        placed = true;
      } else {
        // Refused: treat as full for the rest of this pass.
        node->running = node->capacity;
      }
    }
    if (!placed) still_queued.push_back(std::move(job));
  }
  queue_ = std::move(still_queued);
}

std::size_t Scheduler::queued() const {
  std::lock_guard lock(mutex_);
  return queue_.size();
}

std::map<std::string, int> Scheduler::running() const {
  std::lock_guard lock(mutex_);
  return load_;
}

}  // namespace n2sky::services
