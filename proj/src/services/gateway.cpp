#include "services/gateway.hpp"

#include "common/error.hpp"
#include "common/ids.hpp"
#include "common/log.hpp"
#include "engine/engine.hpp"
#include "engine/serialize.hpp"
#include "services/http.hpp"
#include "services/worker.hpp"

#include <sstream>

namespace n2sky::services {

using nlohmann::json;
using nlohmann::ordered_json;

bool HttpReplicationTransport::push(const registry::ServiceRecord& worker,
                                    const paradigm::ParadigmDescriptor& descriptor) {
  auto reply = http_call(worker.endpoint, "PUT", "/worker/v1/paradigms/" + descriptor.id,
                         paradigm::to_json(descriptor).dump(), {}, std::chrono::seconds(5));
  return reply && reply->status / 100 == 2;
}

namespace {

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
using AuthedHandler =
    std::function<void(const registry::Session&, const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(Errc::schema_violation, e.what()));
    } catch (const std::exception& e) {
      send_error(res, Error(Errc::internal, e.what()));
    }
  };
}

const json& required(const json& body, const char* field) {
  if (!body.is_object() || !body.contains(field)) {
    throw Error(Errc::schema_violation, std::string("field '") + field + "': missing required field");
  }
  return body.at(field);
}

std::string required_string(const json& body, const char* field) {
  const auto& v = required(body, field);
  if (!v.is_string()) {
    throw Error(Errc::schema_violation, std::string("field '") + field + "': expected a string");
  }
  return v.get<std::string>();
}

double as_real(const paradigm::HyperValue& v) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return 0.0;
}

// Omitted numeric params take the descriptor default; supplied ones must lie in the declared
// inclusive range. Undeclared params keep the engine default and are not range checked.
engine::TrainingParams params_for(const json& body, const paradigm::ParadigmDescriptor& d) {
  json given = body.contains("params") ? body.at("params") : json::object();
  if (!given.is_object()) throw Error(Errc::schema_violation, "field 'params': expected an object");
  json merged = given;
  for (const auto& h : d.hyperparams) {
    if (h.kind == paradigm::HyperparamKind::enumeration || merged.contains(h.name)) continue;
    if (const auto* i = std::get_if<std::int64_t>(&h.default_value)) {
      merged[h.name] = *i;
    } else if (const auto* r = std::get_if<double>(&h.default_value)) {
      merged[h.name] = *r;
    }
  }
  auto params = engine::training_params_from_json(merged);
  const std::pair<const char*, double> values[] = {
      {"learning_rate", params.learning_rate},
      {"momentum", params.momentum},
      {"max_epochs", static_cast<double>(params.max_epochs)},
      {"target_error", params.target_error},
  };
  for (const auto& h : d.hyperparams) {
    if (h.kind == paradigm::HyperparamKind::enumeration) continue;
    for (const auto& [name, value] : values) {
      if (h.name != name) continue;
      if (value < as_real(h.min) || value > as_real(h.max)) {
        std::ostringstream msg;
        msg << "field 'params." << name << "': " << value << " outside declared range ["
            << as_real(h.min) << ", " << as_real(h.max) << "]";
        throw Error(Errc::schema_violation, msg.str());
      }
    }
  }
  return params;
}

ordered_json metadata_json(const archive::EntryMetadata& m) {
  ordered_json j;
  j["owner"] = m.owner;
  j["created_at_ms"] = m.created_at_ms;
  j["paradigm_id"] = m.paradigm_id ? json(*m.paradigm_id) : json(nullptr);
  j["parent"] = m.parent ? json(m.parent->str()) : json(nullptr);
  return j;
}

// Accepts either "kind/id" or a bare id of the expected kind.
archive::ArchiveKey key_of(archive::Kind kind, const std::string& ref) {
  if (ref.find('/') != std::string::npos) {
    auto key = archive::ArchiveKey::parse(ref);
    if (key.kind != kind) {
      throw Error(Errc::invalid_argument, "expected a " + std::string(archive::kind_name(kind)) +
                                              " key, got '" + ref + "'");
    }
    return key;
  }
  return {kind, ref};
}

engine::NetworkObject load_network(const archive::Archive& a, const std::string& id) {
  auto entry = a.get(key_of(archive::Kind::network_object, id));
  return engine::network_from_json(json::parse(entry.payload));
}

}  // namespace

Gateway::Gateway(GatewayConfig config, std::shared_ptr<registry::Registry> registry,
                 std::shared_ptr<archive::Archive> archive,
                 std::shared_ptr<datastream::StoreCatalog> catalog)
    : config_(std::move(config)),
      registry_(std::move(registry)),
      archive_(std::move(archive)),
      catalog_(std::move(catalog)) {
  scheduler_ = std::make_unique<Scheduler>(
      [this] { return worker_nodes(); },
      [this](const std::string& job, const std::string& worker) { return dispatch(job, worker); },
      [this](const std::string& job, const std::string& reason) { fail_job(job, reason); });
  server_.new_task_queue = [] { return new httplib::ThreadPool(16); };
  setup_routes();
  setup_internal_routes();
}

Gateway::~Gateway() { stop(); }

void Gateway::start() {
  if (started_.exchange(true)) return;
  bound_port_ = config_.port == 0
                    ? server_.bind_to_any_port(config_.host)
                    : (server_.bind_to_port(config_.host, config_.port) ? config_.port : -1);
  if (bound_port_ <= 0) {
    throw Error(Errc::unavailable,
                "gateway cannot bind " + config_.host + ":" + std::to_string(config_.port));
  }
  listen_thread_ = std::thread([this] { server_.listen_after_bind(); });
  server_.wait_until_ready();
  poll_thread_ = std::thread([this] { poll_loop(); });
  maintenance_thread_ = std::thread([this] { maintenance_loop(); });
  logger("gateway")->info("event=start endpoint={}", endpoint());
}

void Gateway::stop() {
  {
    std::lock_guard lock(wake_mutex_);
    stopping_ = true;
  }
  wake_cv_.notify_all();
  if (poll_thread_.joinable()) poll_thread_.join();
  if (maintenance_thread_.joinable()) maintenance_thread_.join();
  server_.stop();
  if (listen_thread_.joinable()) listen_thread_.join();
}

std::string Gateway::endpoint() const {
  return "http://" + config_.host + ":" + std::to_string(bound_port_);
}

std::optional<JobStatus> Gateway::job(const std::string& job_id) const {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second.status;
}

void Gateway::setup_routes() {
  auto authed = [this](AuthedHandler fn) {
    return guarded([this, fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
      // Session check precedes any body parsing.
      const auto id = req.get_header_value(kSessionHeader);
      if (id.empty()) throw Error(Errc::unauthenticated, "missing session id");
      fn(registry_->validate_session(id), req, res);
    });
  };

  server_.Post("/api/v1/login", guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 auto session = registry_->authenticate(required_string(body, "user"),
                                                        required_string(body, "credential"));
                 if (!session) throw Error(Errc::unauthenticated, "invalid credentials");
                 send_json(res, 200, registry::to_json(*session));
               }));

  server_.Post("/api/v1/logout",
               authed([this](const registry::Session& s, const httplib::Request&,
                             httplib::Response& res) {
                 registry_->end_session(s.session_id);
                 send_json(res, 200, {{"session_id", s.session_id}, {"ended", true}});
               }));

  server_.Post("/api/v1/paradigms",
               authed([this](const registry::Session& s, const httplib::Request& req,
                             httplib::Response& res) {
                 auto body = parse_body(req);
                 const auto& d = required(body, "descriptor");
                 auto descriptor = d.is_string() ? paradigm::parse_descriptor(d.get<std::string>())
                                                 : paradigm::from_json(d);
                 registry::AccessPolicy policy;
                 if (body.contains("policy")) policy = registry::policy_from_json(body.at("policy"));
                 auto entry = registry_->publish_paradigm(s.session_id, descriptor, policy);
                 send_json(res, 201, registry::to_json(entry));
               }));

  server_.Get("/api/v1/paradigms",
              authed([this](const registry::Session& s, const httplib::Request&,
                            httplib::Response& res) {
                ordered_json list = ordered_json::array();
                for (const auto& e : registry_->paradigms()) {
                  if (registry_->visible_to(e, s.user_id)) list.push_back(registry::to_json(e));
                }
                send_json(res, 200, {{"paradigms", list}});
              }));

  server_.Post("/api/v1/paradigms/query",
               authed([this](const registry::Session& s, const httplib::Request& req,
                             httplib::Response& res) {
                 auto body = parse_body(req);
                 auto result = registry_->query_paradigms(s.session_id, required_string(body, "query"));
                 ordered_json rows = ordered_json::array();
                 for (const auto& row : result.rows) {
                   ordered_json r = ordered_json::array();
                   for (const auto& v : row) {
                     if (const auto* d = std::get_if<double>(&v)) r.push_back(*d);
                     else r.push_back(std::get<std::string>(v));
                   }
                   rows.push_back(r);
                 }
                 send_json(res, 200, {{"columns", result.columns}, {"rows", rows}});
               }));

  server_.Get(R"(/api/v1/paradigms/([^/]+))",
              authed([this](const registry::Session& s, const httplib::Request& req,
                            httplib::Response& res) {
                const auto id = req.matches[1].str();
                auto e = registry_->paradigm(id);
                if (!e || !registry_->visible_to(*e, s.user_id)) {
                  throw Error(Errc::not_found, "no paradigm '" + id + "'");
                }
                auto j = registry::to_json(*e);
                j["summary"] = paradigm::summarize_descriptor(e->descriptor).to_text();
                send_json(res, 200, j);
              }));

  server_.Post("/api/v1/networks",
               authed([this](const registry::Session& s, const httplib::Request& req,
                             httplib::Response& res) {
                 auto body = parse_body(req);
                 const auto paradigm_id = required_string(body, "paradigm_id");
                 auto e = registry_->paradigm(paradigm_id);
                 if (!e) throw Error(Errc::not_found, "no paradigm '" + paradigm_id + "'");
                 if (!registry_->visible_to(*e, s.user_id)) {
                   throw Error(Errc::permission_denied,
                               "user '" + s.user_id + "' may not use paradigm '" + paradigm_id + "'");
                 }
                 auto sizes = required(body, "layer_sizes").get<std::vector<std::size_t>>();
                 auto act = engine::parse_activation(body.value("activation", std::string("sigmoid")));
                 auto seed = body.value("seed", std::uint64_t{0});
                 auto net = engine::instantiate_network(e->descriptor, sizes, act, seed,
                                                        make_id("net"));
                 archive::ArchiveEntry entry;
                 entry.key = {archive::Kind::network_object, net.id};
                 entry.payload = engine::to_json(net).dump();
                 entry.metadata.owner = s.user_id;
                 entry.metadata.paradigm_id = paradigm_id;
                 entry = archive_->put(std::move(entry));
                 ordered_json out;
                 out["network_id"] = net.id;
                 out["key"] = entry.key.str();
                 out["network"] = engine::to_json(net);
                 send_json(res, 201, out);
               }));

  // Common tail of the three job routes.
  auto accept_job = [this](const registry::Session& s, JobRecord record, std::int64_t units,
                           httplib::Response& res) {
    const auto& e = registry_->paradigm(record.spec.paradigm_id);
    if (!e) throw Error(Errc::not_found, "no paradigm '" + record.spec.paradigm_id + "'");
    record.spec.job_id = make_id("job");
    record.spec.session_id = s.session_id;
    auto grant = registry_->authorize_job(s.session_id, record.spec.paradigm_id, record.spec.kind,
                                          record.spec.job_id, units);
    if (!grant.granted) throw Error(Errc::permission_denied, grant.reason);
    record.owner = s.user_id;
    record.status.job_id = record.spec.job_id;
    record.status.kind = record.spec.kind;
    record.status.paradigm_id = record.spec.paradigm_id;
    record.status.network_id = record.spec.network.id;
    auto id = submit_job(std::move(record));
    auto status = job(id);
    send_json(res, 202, to_json(*status));
  };

  auto patterns_for = [this](const json& body, const engine::NetworkObject& net, bool need_targets) {
    auto e = registry_->paradigm(net.paradigm_id);
    if (!e) throw Error(Errc::not_found, "no paradigm '" + net.paradigm_id + "'");
    auto spec = datastream::spec_from_json(required(body, "datastream"));
    auto patterns = datastream::resolve_datastream(spec, e->descriptor.io_schema, *catalog_);
    if (need_targets && !patterns.targets) {
      throw Error(Errc::invalid_argument, "training datastream has no targets");
    }
    // Shape errors surface at submission rather than as a failed job.
    if (need_targets) {
      engine::check_training_data(net, patterns);
    } else {
      for (std::size_t p = 0; p < patterns.inputs.size(); ++p) {
        const bool bad_target =
            patterns.targets && (*patterns.targets)[p].size() != net.layer_sizes.back();
        if (patterns.inputs[p].size() != net.layer_sizes.front() || bad_target) {
          throw Error(Errc::dimension_mismatch,
                      "pattern " + std::to_string(p) +
                          " does not match the network's input/output layers");
        }
      }
    }
    return patterns;
  };

  auto paradigm_of = [this](const std::string& id) {
    auto e = registry_->paradigm(id);
    if (!e) throw Error(Errc::not_found, "no paradigm '" + id + "'");
    return e->descriptor;
  };

  server_.Post("/api/v1/jobs/train",
               authed([this, accept_job, patterns_for, paradigm_of](const registry::Session& s,
                                                       const httplib::Request& req,
                                                       httplib::Response& res) {
                 auto body = parse_body(req);
                 JobRecord r;
                 r.spec.kind = registry::JobKind::train;
                 r.spec.network = load_network(*archive_, required_string(body, "network_id"));
                 r.spec.paradigm_id = r.spec.network.paradigm_id;
                 r.spec.patterns = patterns_for(body, r.spec.network, true);
                 r.spec.params = params_for(body, paradigm_of(r.spec.paradigm_id));
                 r.parent = {archive::Kind::network_object, r.spec.network.id};
                 const auto units = r.spec.params->max_epochs;
                 accept_job(s, std::move(r), units, res);
               }));

  // A trained network reconstructed from its archived training result.
  auto trained_network = [this](const std::string& ref) {
    auto entry = archive_->get(key_of(archive::Kind::training_result, ref));
    auto result = engine::training_result_from_json(json::parse(entry.payload));
    auto net = load_network(*archive_, result.network_id);
    net.weights = result.final_weights;
    net.state = engine::NetworkState::trained;
    return std::make_pair(net, entry.key);
  };

  server_.Post("/api/v1/jobs/retrain",
               authed([this, accept_job, patterns_for, trained_network, paradigm_of](
                          const registry::Session& s, const httplib::Request& req,
                          httplib::Response& res) {
                 auto body = parse_body(req);
                 JobRecord r;
                 r.spec.kind = registry::JobKind::retrain;
                 r.spec.network = trained_network(required_string(body, "training_result")).first;
                 r.spec.paradigm_id = r.spec.network.paradigm_id;
                 r.spec.patterns = patterns_for(body, r.spec.network, true);
                 r.spec.params = params_for(body, paradigm_of(r.spec.paradigm_id));
                 r.parent = {archive::Kind::network_object, r.spec.network.id};
                 const auto units = r.spec.params->max_epochs;
                 accept_job(s, std::move(r), units, res);
               }));

  server_.Post("/api/v1/jobs/evaluate",
               authed([this, accept_job, patterns_for, trained_network](
                          const registry::Session& s, const httplib::Request& req,
                          httplib::Response& res) {
                 auto body = parse_body(req);
                 JobRecord r;
                 r.spec.kind = registry::JobKind::evaluate;
                 if (body.contains("training_result")) {
                   auto [net, key] = trained_network(required_string(body, "training_result"));
                   r.spec.network = std::move(net);
                   r.parent = key;
                 } else {
                   // An untrained network is accepted; the engine rejects it.
                   r.spec.network = load_network(*archive_, required_string(body, "network_id"));
                   r.parent = {archive::Kind::network_object, r.spec.network.id};
                 }
                 r.spec.paradigm_id = r.spec.network.paradigm_id;
                 r.spec.patterns = patterns_for(body, r.spec.network, false);
                 const auto units = static_cast<std::int64_t>(r.spec.patterns.inputs.size());
                 accept_job(s, std::move(r), units, res);
               }));

  server_.Get(R"(/api/v1/jobs/([^/]+))",
              authed([this](const registry::Session& s, const httplib::Request& req,
                            httplib::Response& res) {
                const auto id = req.matches[1].str();
                JobStatus status;
                {
                  std::lock_guard lock(mutex_);
                  auto it = jobs_.find(id);
                  if (it == jobs_.end() || it->second.owner != s.user_id) {
                    throw Error(Errc::not_found, "no job '" + id + "'");
                  }
                  status = it->second.status;
                }
                std::size_t since = 0;
                if (req.has_param("since")) since = std::stoul(req.get_param_value("since"));
                auto j = to_json(status);
                auto& series = status.error_series_so_far;
                since = std::min(since, series.size());
                j["series_offset"] = since;
                j["error_series_so_far"] =
                    std::vector<double>(series.begin() + static_cast<std::ptrdiff_t>(since), series.end());
                send_json(res, 200, j);
              }));

  server_.Get(R"(/api/v1/results/([^/]+)/([^/]+))",
              authed([this](const registry::Session&, const httplib::Request& req,
                            httplib::Response& res) {
                archive::ArchiveKey key{archive::parse_kind(req.matches[1].str()),
                                        req.matches[2].str()};
                auto entry = archive_->get(key);
                ordered_json out;
                out["key"] = entry.key.str();
                out["metadata"] = metadata_json(entry.metadata);
                out["payload"] = ordered_json::parse(entry.payload);
                send_json(res, 200, out);
              }));

  server_.Get(R"(/api/v1/archive/([^/]+))",
              authed([this](const registry::Session&, const httplib::Request& req,
                            httplib::Response& res) {
                archive::ListFilter filter;
                if (req.has_param("owner")) filter.owner = req.get_param_value("owner");
                if (req.has_param("paradigm_id")) filter.paradigm_id = req.get_param_value("paradigm_id");
                ordered_json list = ordered_json::array();
                for (const auto& l : archive_->list(archive::parse_kind(req.matches[1].str()), filter)) {
                  list.push_back({{"key", l.key.str()}, {"metadata", metadata_json(l.metadata)}});
                }
                send_json(res, 200, {{"entries", list}});
              }));

  server_.Get("/api/v1/ledger",
              authed([this](const registry::Session& s, const httplib::Request&,
                            httplib::Response& res) {
                ordered_json records = ordered_json::array();
                double total = 0.0;
                for (const auto& u : registry_->ledger()) {
                  if (u.user_id != s.user_id) continue;
                  records.push_back(registry::to_json(u));
                  total += u.charge;
                }
                send_json(res, 200, {{"user_id", s.user_id}, {"records", records}, {"total", total}});
              }));

  server_.Get("/api/v1/services",
              authed([this](const registry::Session&, const httplib::Request&,
                            httplib::Response& res) {
                ordered_json list = ordered_json::array();
                for (const auto& r : registry_->services()) list.push_back(registry::to_json(r));
                send_json(res, 200, {{"services", list}});
              }));

  server_.Get("/api/v1/stores",
              authed([this](const registry::Session&, const httplib::Request&,
                            httplib::Response& res) {
                send_json(res, 200, {{"stores", catalog_->names()}});
              }));

  // Unknown /api/v1 routes still demand a session first.
  server_.set_error_handler([this](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (req.path.rfind("/api/v1/", 0) == 0 && req.path != "/api/v1/login") {
      const auto id = req.get_header_value(kSessionHeader);
      try {
        if (id.empty()) throw Error(Errc::unauthenticated, "missing session id");
        registry_->validate_session(id);
      } catch (const Error& e) {
        send_error(res, e);
        return;
      }
    }
    if (res.status == 404) {
      send_error(res, Error(Errc::not_found, "no route " + req.method + " " + req.path));
    }
  });
}

void Gateway::setup_internal_routes() {
  server_.Get("/internal/v1/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "up"}});
  });

  server_.Post("/internal/v1/services/register",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto body = parse_body(req);
                 registry::ServiceRecord r;
                 r.service_id = required_string(body, "service_id");
                 r.kind = registry::parse_service_kind(body.value("kind", std::string("simulation_worker")));
                 r.endpoint = required_string(body, "endpoint");
                 r.affinity = registry::parse_affinity(body.value("affinity", std::string("compute")));
                 r.capacity = body.value("capacity", 1);
                 if (r.capacity < 1) throw Error(Errc::invalid_argument, "capacity must be at least 1");
                 registry_->register_service(r);
                 send_json(res, 200, registry::to_json(*registry_->service(r.service_id)));
                 // Newly registered capacity may admit queued jobs.
                 if (!stopping_) scheduler_->pump();
               }));

  server_.Post(R"(/internal/v1/services/([^/]+)/heartbeat)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 registry_->heartbeat(req.matches[1].str());
                 send_json(res, 200, {{"service_id", req.matches[1].str()}});
               }));
}

std::string Gateway::submit_job(JobRecord record) {
  const auto id = record.spec.job_id;
  const auto paradigm_id = record.spec.paradigm_id;
  {
    std::lock_guard lock(mutex_);
    jobs_.emplace(id, std::move(record));
  }
  logger("gateway")->info("event=job_submitted job={} paradigm={}", id, paradigm_id);
  scheduler_->submit(id, paradigm_id);
  return id;
}

std::vector<WorkerNode> Gateway::worker_nodes() const {
  std::vector<WorkerNode> nodes;
  for (const auto& r : registry_->services()) {
    if (r.kind != registry::ServiceKind::simulation_worker) continue;
    WorkerNode n;
    n.service_id = r.service_id;
    n.up = r.status == registry::ServiceStatus::up;
    n.affinity = r.affinity;
    n.capacity = r.capacity;
    n.paradigms = registry_->replicated_paradigms(r.service_id);
    nodes.push_back(std::move(n));
  }
  return nodes;
}

bool Gateway::dispatch(const std::string& job_id, const std::string& worker_id) {
  auto worker = registry_->service(worker_id);
  if (!worker) return false;
  std::string body;
  {
    std::lock_guard lock(mutex_);
    auto it = jobs_.find(job_id);
    if (it == jobs_.end()) return false;
    body = to_json(it->second.spec).dump();
  }
  auto reply = http_call(worker->endpoint, "POST", "/worker/v1/jobs", body);
  if (!reply || reply->status != 202) {
    logger("gateway")->warn("event=dispatch_refused job={} worker={} status={}", job_id, worker_id,
                            reply ? reply->status : 0);
    return false;
  }
  std::lock_guard lock(mutex_);
  auto& rec = jobs_.at(job_id);
  rec.status.phase = JobPhase::running;
  rec.status.worker_id = worker_id;
  rec.worker_endpoint = worker->endpoint;
  logger("gateway")->info("event=job_dispatched job={} worker={}", job_id, worker_id);
  return true;
}

void Gateway::fail_job(const std::string& job_id, const std::string& reason) {
  std::lock_guard lock(mutex_);
  auto it = jobs_.find(job_id);
  if (it == jobs_.end()) return;
  it->second.status.phase = JobPhase::failed;
  it->second.status.failure_reason = reason;
  logger("gateway")->warn("event=job_failed job={} reason=\"{}\"", job_id, reason);
}

void Gateway::poll_loop() {
  std::unique_lock lock(wake_mutex_);
  while (!stopping_) {
    wake_cv_.wait_for(lock, config_.job_poll_interval, [this] { return stopping_.load(); });
    if (stopping_) break;
    lock.unlock();
    try {
      poll_once();
    } catch (const std::exception& e) {
      logger("gateway")->error("event=poll_error what=\"{}\"", e.what());
    }
    lock.lock();
  }
}

void Gateway::poll_once() {
  std::vector<std::string> running;
  {
    std::lock_guard lock(mutex_);
    for (const auto& [id, rec] : jobs_) {
      if (rec.status.phase == JobPhase::running) running.push_back(id);
    }
  }
  for (const auto& id : running) {
    if (stopping_) return;
    poll_job(id);
  }
}

void Gateway::poll_job(const std::string& job_id) {
  std::string endpoint, worker_id;
  std::size_t since = 0;
  {
    std::lock_guard lock(mutex_);
    const auto& rec = jobs_.at(job_id);
    endpoint = rec.worker_endpoint;
    worker_id = rec.status.worker_id;
    since = rec.status.error_series_so_far.size();
  }
  auto reply = http_call(endpoint, "GET",
                         "/worker/v1/jobs/" + job_id + "?since=" + std::to_string(since), {}, {},
                         std::chrono::seconds(5));
  if (!reply || reply->status != 200) {
    auto w = registry_->service(worker_id);
    const bool lost = (reply && reply->status == 404) || !w ||
                      w->status != registry::ServiceStatus::up;
    if (lost) {
      fail_job(job_id, "worker '" + worker_id + "' lost the job (no heartbeat or restarted)");
      scheduler_->on_finished(job_id);
    }
    return;
  }
  auto view = worker_job_view_from_json(json::parse(reply->body));
  {
    std::lock_guard lock(mutex_);
    auto& series = jobs_.at(job_id).status.error_series_so_far;
    // Only this thread appends, so the series is still `since` long.
    series.insert(series.end(), view.error_series.begin(), view.error_series.end());
  }
  if (view.phase == JobPhase::running) return;
  if (view.phase == JobPhase::done && view.result) {
    finish_job(job_id, json(*view.result));
  } else {
    fail_job(job_id, view.failure_reason.empty() ? "job failed on worker" : view.failure_reason);
  }
  http_call(endpoint, "DELETE", "/worker/v1/jobs/" + job_id);
  scheduler_->on_finished(job_id);
}

void Gateway::finish_job(const std::string& job_id, const json& result) {
  archive::ArchiveEntry entry;
  {
    std::lock_guard lock(mutex_);
    const auto& rec = jobs_.at(job_id);
    const bool evaluation = rec.spec.kind == registry::JobKind::evaluate;
    entry.key = {evaluation ? archive::Kind::evaluation_result : archive::Kind::training_result, job_id};
    auto payload = ordered_json(result.at(evaluation ? "evaluation_result" : "training_result"));
    // Workers see only the inlined network; the gateway knows its origin.
    if (evaluation && rec.parent.kind == archive::Kind::training_result) {
      payload["created_from"] = rec.parent.str();
    }
    entry.payload = payload.dump();
    entry.metadata.owner = rec.owner;
    entry.metadata.paradigm_id = rec.spec.paradigm_id;
    entry.metadata.parent = rec.parent;
  }
  try {
    auto stored = archive_->put(std::move(entry));
    std::lock_guard lock(mutex_);
    auto& st = jobs_.at(job_id).status;
    st.result_key = stored.key;
    st.phase = JobPhase::done;
    logger("gateway")->info("event=job_done job={} result={}", job_id, stored.key.str());
  } catch (const Error& e) {
    fail_job(job_id, std::string("archive write failed: ") + e.what());
  }
}

void Gateway::maintenance_loop() {
  std::unique_lock lock(wake_mutex_);
  while (!stopping_) {
    wake_cv_.wait_for(lock, config_.maintenance_interval, [this] { return stopping_.load(); });
    if (stopping_) break;
    lock.unlock();
    try {
      registry_->replicate_pending();
      scheduler_->pump();
    } catch (const std::exception& e) {
      logger("gateway")->error("event=maintenance_error what=\"{}\"", e.what());
    }
    lock.lock();
  }
}

}  // namespace n2sky::services
