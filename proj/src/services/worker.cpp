#include "services/worker.hpp"

#include "common/error.hpp"
#include "common/log.hpp"
#include "engine/engine.hpp"
#include "engine/serialize.hpp"
#include "services/http.hpp"

namespace n2sky::services {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Cancelled {};

}  // namespace

ordered_json run_job(const paradigm::ParadigmDescriptor& descriptor, const JobSpec& job,
                     const engine::ProgressSink& sink) {
  const auto& eng = engine::find_engine(descriptor.engine_ref);
  engine::NetworkObject net = job.network;
  ordered_json out;
  switch (job.kind) {
    case registry::JobKind::train:
    case registry::JobKind::retrain: {
      if (!job.params) throw Error(Errc::invalid_argument, "training job without params");
      auto result = engine::run_training(eng, net, job.patterns, *job.params, sink,
                                         job.kind == registry::JobKind::retrain);
      out["training_result"] = engine::to_json(result);
      out["network"] = engine::to_json(net);
      break;
    }
    case registry::JobKind::evaluate: {
      auto result = engine::evaluate(net, job.patterns);
      out["evaluation_result"] = engine::to_json(result);
      break;
    }
  }
  return out;
}

ordered_json to_json(const WorkerJobView& v) {
  ordered_json j;
  j["job_id"] = v.job_id;
  j["phase"] = phase_name(v.phase);
  j["series_length"] = v.series_length;
  j["error_series"] = v.error_series;
  if (v.result) j["result"] = *v.result;
  if (v.phase == JobPhase::failed) j["failure_reason"] = v.failure_reason;
  return j;
}

WorkerJobView worker_job_view_from_json(const json& j) {
  WorkerJobView v;
  v.job_id = j.at("job_id").get<std::string>();
  v.phase = parse_phase(j.at("phase").get<std::string>());
  v.series_length = j.at("series_length").get<std::size_t>();
  v.error_series = j.at("error_series").get<std::vector<double>>();
  if (j.contains("result")) v.result = ordered_json(j.at("result"));
  v.failure_reason = j.value("failure_reason", std::string{});
  return v;
}

SimulationWorker::SimulationWorker(WorkerConfig config) : config_(std::move(config)) {
  if (config_.service_id.empty()) {
    throw Error(Errc::invalid_argument, "worker needs a service_id");
  }
  setup_routes();
}

SimulationWorker::~SimulationWorker() { stop(); }

void SimulationWorker::setup_routes() {
  auto guard = [](auto&& fn) {
    return [fn](const httplib::Request& req, httplib::Response& res) {
      try {
        fn(req, res);
      } catch (const Error& e) {
        send_error(res, e);
      } catch (const std::exception& e) {
        send_error(res, Error(Errc::internal, e.what()));
      }
    };
  };
  server_.Get("/worker/v1/health", guard([this](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200, {{"service_id", config_.service_id}, {"status", "up"}});
              }));
  server_.Get("/worker/v1/paradigms",
              guard([this](const httplib::Request&, httplib::Response& res) {
                send_json(res, 200, {{"paradigms", local_paradigms()}});
              }));
  server_.Put(R"(/worker/v1/paradigms/([^/]+))",
              guard([this](const httplib::Request& req, httplib::Response& res) {
                auto d = paradigm::from_json(parse_body(req));
                if (d.id != req.matches[1].str()) {
                  throw Error(Errc::invalid_argument, "descriptor id does not match path");
                }
                install_paradigm(std::move(d));
                res.status = 204;
              }));
  server_.Post("/worker/v1/jobs", guard([this](const httplib::Request& req, httplib::Response& res) {
                 auto spec = job_spec_from_json(parse_body(req));
                 const auto id = spec.job_id;
                 submit(std::move(spec));
                 send_json(res, 202, {{"job_id", id}, {"phase", "running"}});
               }));
  server_.Get(R"(/worker/v1/jobs/([^/]+))",
              guard([this](const httplib::Request& req, httplib::Response& res) {
                std::size_t since = 0;
                if (req.has_param("since")) since = std::stoul(req.get_param_value("since"));
                auto view = job(req.matches[1].str(), since);
                if (!view) throw Error(Errc::not_found, "no job '" + req.matches[1].str() + "'");
                send_json(res, 200, to_json(*view));
              }));
  server_.Delete(R"(/worker/v1/jobs/([^/]+))",
                 guard([this](const httplib::Request& req, httplib::Response& res) {
                   forget(req.matches[1].str());
                   res.status = 204;
                 }));
}

void SimulationWorker::start() {
  if (started_.exchange(true)) return;
  bound_port_ = config_.port == 0 ? server_.bind_to_any_port(config_.host)
                                  : (server_.bind_to_port(config_.host, config_.port)
                                         ? config_.port
                                         : -1);
  if (bound_port_ <= 0) {
    throw Error(Errc::unavailable, "worker '" + config_.service_id + "' cannot bind " +
                                       config_.host + ":" + std::to_string(config_.port));
  }
  listen_thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
  logger("worker")->info("event=start service={} endpoint={}", config_.service_id, endpoint());
  if (!config_.monitor_endpoint.empty()) {
    register_with_monitor();
    heartbeat_thread_ = std::thread([this] { heartbeat_loop(); });
  }
}

std::string SimulationWorker::endpoint() const {
  return "http://" + config_.host + ":" + std::to_string(bound_port_);
}

bool SimulationWorker::register_with_monitor() {
  ordered_json body;
  body["service_id"] = config_.service_id;
  body["kind"] = "simulation_worker";
  body["endpoint"] = endpoint();
  body["affinity"] = registry::affinity_name(config_.affinity);
  body["capacity"] = config_.capacity;
  auto reply = http_call(config_.monitor_endpoint, "POST", "/internal/v1/services/register",
                         body.dump());
  registered_ = reply && reply->status / 100 == 2;
  if (!registered_) {
    logger("worker")->warn("event=register_failed service={} monitor={}", config_.service_id,
                           config_.monitor_endpoint);
  }
  return registered_;
}

void SimulationWorker::heartbeat_loop() {
  std::unique_lock lock(hb_mutex_);
  while (!stopping_) {
    hb_cv_.wait_for(lock, config_.heartbeat_interval, [this] { return stopping_.load(); });
    if (stopping_) break;
    lock.unlock();
    if (!registered_) {
      register_with_monitor();
    } else {
      auto reply = http_call(config_.monitor_endpoint, "POST",
                             "/internal/v1/services/" + config_.service_id + "/heartbeat", "{}");
      // The monitor lost track of us (e.g. it restarted): register again.
      if (reply && reply->status == 404) registered_ = false;
    }
    lock.lock();
  }
}

void SimulationWorker::stop() {
  {
    std::lock_guard lock(hb_mutex_);
    stopping_ = true;
  }
  hb_cv_.notify_all();
  if (heartbeat_thread_.joinable()) heartbeat_thread_.join();
  server_.stop();
  if (listen_thread_.joinable()) listen_thread_.join();
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(mutex_);
    threads.swap(job_threads_);
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
}

void SimulationWorker::crash() {
  logger("worker")->warn("event=crash service={}", config_.service_id);
  stop();
}

void SimulationWorker::install_paradigm(paradigm::ParadigmDescriptor descriptor) {
  std::lock_guard lock(mutex_);
  auto id = descriptor.id;
  paradigms_.insert_or_assign(std::move(id), std::move(descriptor));
}

std::set<std::string> SimulationWorker::local_paradigms() const {
  std::lock_guard lock(mutex_);
  std::set<std::string> out;
  for (const auto& [id, d] : paradigms_) out.insert(id);
  return out;
}

void SimulationWorker::submit(JobSpec job) {
  std::lock_guard lock(mutex_);
  if (stopping_) throw Error(Errc::unavailable, "worker is shutting down");
  auto p = paradigms_.find(job.paradigm_id);
  if (p == paradigms_.end()) {
    throw Error(Errc::failed_precondition,
                "paradigm '" + job.paradigm_id + "' is not replicated to " + config_.service_id);
  }
  if (jobs_.count(job.job_id)) {
    throw Error(Errc::already_exists, "job '" + job.job_id + "' already submitted");
  }
  if (running_ >= static_cast<std::size_t>(config_.capacity)) {
    throw Error(Errc::unavailable, "worker '" + config_.service_id + "' is at capacity");
  }
  auto state = std::make_shared<JobState>();
  jobs_[job.job_id] = state;
  ++running_;
  peak_running_ = std::max(peak_running_, running_);
  job_threads_.emplace_back(&SimulationWorker::execute, this, std::move(job), state, p->second);
}

void SimulationWorker::execute(JobSpec job, std::shared_ptr<JobState> state,
                               paradigm::ParadigmDescriptor descriptor) {
  auto log = logger("worker");
  log->info("event=job_start service={} job={} kind={}", config_.service_id, job.job_id,
            registry::job_kind_name(job.kind));
  auto sink = [this, &state](std::int64_t, double sse) {
    if (stopping_) throw Cancelled{};
    state->progress.append(sse);
  };
  std::optional<ordered_json> result;
  std::string failure;
  bool cancelled = false;
  try {
    result = run_job(descriptor, job, sink);
  } catch (const Cancelled&) {
    cancelled = true;
  } catch (const std::exception& e) {
    failure = e.what();
  }
  std::lock_guard lock(mutex_);
  --running_;
  if (cancelled) return;
  ++completed_;
  if (result) {
    state->result = std::move(result);
    state->phase = JobPhase::done;
  } else {
    state->failure_reason = failure;
    state->phase = JobPhase::failed;
  }
  log->info("event=job_end service={} job={} phase={}", config_.service_id, job.job_id,
            phase_name(state->phase));
}

std::optional<WorkerJobView> SimulationWorker::job(const std::string& job_id,
                                                   std::size_t since) const {
  std::shared_ptr<JobState> state;
  WorkerJobView v;
  {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return std::nullopt;
    state = it->second;
    v.phase = state->phase;
    v.result = state->result;
    v.failure_reason = state->failure_reason;
  }
  v.job_id = job_id;
  // Phase is read before the series, so a done view carries the full series.
  v.error_series = state->progress.snapshot(since);
  v.series_length = state->progress.size();
  return v;
}

void SimulationWorker::forget(const std::string& job_id) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it != jobs_.end() && it->second->phase != JobPhase::running) jobs_.erase(it);
}

std::size_t SimulationWorker::running() const {
  std::lock_guard lock(mutex_);
  return running_;
}

std::size_t SimulationWorker::peak_running() const {
  std::lock_guard lock(mutex_);
  return peak_running_;
}

std::size_t SimulationWorker::completed() const {
  std::lock_guard lock(mutex_);
  return completed_;
}

}  // namespace n2sky::services
