#include "registry/registry.hpp"

#include <filesystem>
#include <fstream>

#include "common/error.hpp"
#include "common/ids.hpp"
#include "common/log.hpp"
#include "engine/engine.hpp"

namespace n2sky::registry {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string_view policy_mode_name(PolicyMode m) {
  switch (m) {
    case PolicyMode::open: return "public";
    case PolicyMode::restricted: return "restricted";
    case PolicyMode::metered: return "metered";
  }
  return "public";
}

PolicyMode parse_policy_mode(std::string_view s) {
  if (s == "public") return PolicyMode::open;
  if (s == "restricted") return PolicyMode::restricted;
  if (s == "metered") return PolicyMode::metered;
  throw Error(Errc::schema_violation, "unknown policy mode '" + std::string(s) + "'");
}

std::string_view service_kind_name(ServiceKind k) {
  switch (k) {
    case ServiceKind::simulation_worker: return "simulation_worker";
    case ServiceKind::archive: return "archive";
    case ServiceKind::registry: return "registry";
    case ServiceKind::gateway: return "gateway";
  }
  return "simulation_worker";
}

ServiceKind parse_service_kind(std::string_view s) {
  for (auto k : {ServiceKind::simulation_worker, ServiceKind::archive, ServiceKind::registry,
                 ServiceKind::gateway}) {
    if (service_kind_name(k) == s) return k;
  }
  throw Error(Errc::invalid_argument, "unknown service kind '" + std::string(s) + "'");
}

std::string_view affinity_name(Affinity a) {
  switch (a) {
    case Affinity::compute: return "compute";
    case Affinity::data: return "data";
    case Affinity::admin: return "admin";
  }
  return "compute";
}

Affinity parse_affinity(std::string_view s) {
  for (auto a : {Affinity::compute, Affinity::data, Affinity::admin}) {
    if (affinity_name(a) == s) return a;
  }
  throw Error(Errc::invalid_argument, "unknown affinity '" + std::string(s) + "'");
}

std::string_view status_name(ServiceStatus s) {
  switch (s) {
    case ServiceStatus::up: return "up";
    case ServiceStatus::suspect: return "suspect";
    case ServiceStatus::down: return "down";
  }
  return "down";
}

std::string_view job_kind_name(JobKind k) {
  switch (k) {
    case JobKind::train: return "train";
    case JobKind::retrain: return "retrain";
    case JobKind::evaluate: return "evaluate";
  }
  return "train";
}

JobKind parse_job_kind(std::string_view s) {
  for (auto k : {JobKind::train, JobKind::retrain, JobKind::evaluate}) {
    if (job_kind_name(k) == s) return k;
  }
  throw Error(Errc::invalid_argument, "unknown job kind '" + std::string(s) + "'");
}

ordered_json to_json(const AccessPolicy& p) {
  ordered_json j;
  j["mode"] = policy_mode_name(p.mode);
  if (p.mode == PolicyMode::restricted) j["allowed_users"] = p.allowed_users;
  if (p.mode == PolicyMode::metered) j["fee_per_job"] = p.fee_per_job;
  return j;
}

AccessPolicy policy_from_json(const json& j) {
  AccessPolicy p;
  if (j.is_null()) return p;
  if (!j.is_object()) throw Error(Errc::schema_violation, "policy must be an object");
  p.mode = parse_policy_mode(j.value("mode", std::string("public")));
  if (p.mode == PolicyMode::restricted) {
    if (!j.contains("allowed_users") || !j.at("allowed_users").is_array()) {
      throw Error(Errc::schema_violation, "restricted policy requires allowed_users");
    }
    for (const auto& u : j.at("allowed_users")) {
      if (!u.is_string()) throw Error(Errc::schema_violation, "allowed_users must be strings");
      p.allowed_users.insert(u.get<std::string>());
    }
  }
  if (p.mode == PolicyMode::metered) {
    const auto& fee = j.contains("fee_per_job") ? j.at("fee_per_job") : json(0.0);
    if (!fee.is_number() || fee.get<double>() < 0.0) {
      throw Error(Errc::schema_violation, "fee_per_job must be a non-negative number");
    }
    p.fee_per_job = fee.get<double>();
  }
  return p;
}

ordered_json to_json(const ParadigmEntry& e) {
  ordered_json j;
  j["descriptor"] = paradigm::to_json(e.descriptor);
  j["owner"] = e.owner;
  j["policy"] = to_json(e.policy);
  j["published_at"] = to_unix_ms(e.published_at);
  j["replicated_to"] = e.replicated_to;
  return j;
}

ordered_json to_json(const ServiceRecord& r) {
  ordered_json j;
  j["service_id"] = r.service_id;
  j["kind"] = service_kind_name(r.kind);
  j["endpoint"] = r.endpoint;
  j["affinity"] = affinity_name(r.affinity);
  j["capacity"] = r.capacity;
  j["last_heartbeat"] = to_unix_ms(r.last_heartbeat);
  j["status"] = status_name(r.status);
  return j;
}

ordered_json to_json(const UsageRecord& u) {
  ordered_json j;
  j["session_id"] = u.session_id;
  j["user_id"] = u.user_id;
  j["paradigm_id"] = u.paradigm_id;
  j["job_id"] = u.job_id;
  j["job_kind"] = job_kind_name(u.job_kind);
  j["units"] = u.units;
  j["charge"] = u.charge;
  j["recorded_at"] = u.recorded_at_ms;
  return j;
}

UsageRecord usage_from_json(const json& j) {
  UsageRecord u;
  u.session_id = j.at("session_id").get<std::string>();
  u.user_id = j.value("user_id", std::string{});
  u.paradigm_id = j.at("paradigm_id").get<std::string>();
  u.job_id = j.at("job_id").get<std::string>();
  u.job_kind = parse_job_kind(j.at("job_kind").get<std::string>());
  u.units = j.value("units", std::int64_t{0});
  u.charge = j.at("charge").get<double>();
  u.recorded_at_ms = j.value("recorded_at", std::int64_t{0});
  return u;
}

ordered_json to_json(const Session& s) {
  ordered_json j;
  j["session_id"] = s.session_id;
  j["user_id"] = s.user_id;
  j["created_at"] = to_unix_ms(s.created_at);
  j["expires_at"] = to_unix_ms(s.expires_at);
  return j;
}

namespace {

void append_line(const std::string& path, const std::string& line) {
  std::ofstream out(path, std::ios::app);
  out << line << "\n";
  out.flush();
  if (!out) throw Error(Errc::io_error, "cannot append to '" + path + "'");
}

}  // namespace

Registry::Registry(RegistryConfig config, UserStore users,
                   std::shared_ptr<ReplicationTransport> transport, Clock clock)
    : config_(std::move(config)),
      users_(std::move(users)),
      transport_(std::move(transport)),
      clock_(std::move(clock)) {
  if (!config_.data_dir.empty()) load();
}

void Registry::load() {
  fs::create_directories(config_.data_dir);
  const auto entries_path = fs::path(config_.data_dir) / "paradigms.jsonl";
  if (fs::exists(entries_path)) {
    std::ifstream in(entries_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto j = json::parse(line);
      ParadigmEntry e;
      e.descriptor = paradigm::from_json(j.at("descriptor"));
      e.owner = j.at("owner").get<std::string>();
      e.policy = policy_from_json(j.at("policy"));
      e.published_at = from_unix_ms(j.at("published_at").get<std::int64_t>());
      entry_order_.push_back(e.descriptor.id);
      entries_[e.descriptor.id] = std::move(e);
    }
  }
  const auto ledger_path = fs::path(config_.data_dir) / "ledger.jsonl";
  if (fs::exists(ledger_path)) {
    std::ifstream in(ledger_path);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) ledger_.push_back(usage_from_json(json::parse(line)));
    }
  }
}

void Registry::persist_entry(const ParadigmEntry& e) const {
  if (config_.data_dir.empty()) return;
  auto j = to_json(e);
  j.erase("replicated_to");
  append_line((fs::path(config_.data_dir) / "paradigms.jsonl").string(), j.dump());
}

void Registry::persist_usage(const UsageRecord& u) const {
  if (config_.data_dir.empty()) return;
  append_line((fs::path(config_.data_dir) / "ledger.jsonl").string(), to_json(u).dump());
}

std::optional<Session> Registry::authenticate(const std::string& user,
                                              const std::string& credential) {
  if (!users_.verify(user, credential)) return std::nullopt;
  std::lock_guard lock(mutex_);
  Session s;
  do {
    s.session_id = random_hex(32);
  } while (sessions_.count(s.session_id));
  s.user_id = user;
  s.created_at = clock_();
  s.expires_at = s.created_at + config_.session_lifetime;
  sessions_[s.session_id] = s;
  return s;
}

Session Registry::validate_session(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(session_id);
  if (session_id.empty() || it == sessions_.end()) {
    throw Error(Errc::unauthenticated, "invalid session");
  }
  const auto now = clock_();
  if (now >= it->second.expires_at) {
    sessions_.erase(it);
    throw Error(Errc::unauthenticated, "session expired");
  }
  it->second.expires_at = now + config_.session_lifetime;
  return it->second;
}

void Registry::end_session(const std::string& session_id) {
  std::lock_guard lock(mutex_);
  sessions_.erase(session_id);
}

ParadigmEntry Registry::publish_paradigm(const std::string& session_id,
                                         const paradigm::ParadigmDescriptor& descriptor,
                                         const AccessPolicy& policy) {
  const auto session = validate_session(session_id);
  const auto violations = paradigm::validate_descriptor(descriptor, engine::list_engines());
  if (!violations.empty()) {
    std::string msg = "invalid descriptor:";
    for (const auto& v : violations) msg += " " + v.field + ": " + v.message + ";";
    throw Error(Errc::schema_violation, msg);
  }
  if (policy.fee_per_job < 0.0) {
    throw Error(Errc::schema_violation, "fee_per_job must be non-negative");
  }
  std::vector<std::pair<ServiceRecord, paradigm::ParadigmDescriptor>> work;
  ParadigmEntry entry;
  {
    std::lock_guard lock(mutex_);
    if (entries_.count(descriptor.id)) {
      throw Error(Errc::already_exists, "paradigm '" + descriptor.id + "' is already published");
    }
    entry.descriptor = descriptor;
    entry.owner = session.user_id;
    entry.policy = policy;
    entry.published_at = clock_();
    persist_entry(entry);
    entries_[descriptor.id] = entry;
    entry_order_.push_back(descriptor.id);
    const auto now = clock_();
    for (const auto& [id, svc] : services_) {
      if (svc.kind == ServiceKind::simulation_worker &&
          derive_status(svc, now) == ServiceStatus::up) {
        work.emplace_back(svc, descriptor);
      }
    }
  }
  replicate(work);
  return *paradigm(descriptor.id);
}

std::optional<ParadigmEntry> Registry::paradigm(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(id);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

std::vector<ParadigmEntry> Registry::paradigms() const {
  std::lock_guard lock(mutex_);
  std::vector<ParadigmEntry> out;
  for (const auto& id : entry_order_) out.push_back(entries_.at(id));
  return out;
}

bool Registry::visible_to(const ParadigmEntry& e, const std::string& user) const {
  if (e.policy.mode != PolicyMode::restricted) return true;
  return e.owner == user || e.policy.allowed_users.count(user) > 0;
}

datastream::TableResult Registry::query_paradigms(const std::string& session_id,
                                                  const std::string& query_text) {
  const auto session = validate_session(session_id);
  const auto query = datastream::parse_query(query_text);
  const auto* tq = std::get_if<datastream::TabularQuery>(&query);
  if (!tq) {
    throw Error(Errc::invalid_argument, "the paradigm registry is queried with SELECT");
  }
  datastream::TableStore table;
  table.name = "paradigms";
  for (const char* c : {"id", "name", "version", "engine_ref", "owner", "mode"}) {
    table.columns.push_back({c, datastream::ColumnKind::text});
  }
  for (const auto& e : paradigms()) {
    if (!visible_to(e, session.user_id)) continue;
    table.rows.push_back({e.descriptor.id, e.descriptor.name, e.descriptor.version,
                          e.descriptor.engine_ref, e.owner,
                          std::string(policy_mode_name(e.policy.mode))});
  }
  return datastream::execute_query(table, *tq);
}

ServiceStatus Registry::derive_status(const ServiceRecord& r, TimePoint now) const {
  return now - r.last_heartbeat <= config_.heartbeat_timeout ? ServiceStatus::up
                                                             : ServiceStatus::down;
}

void Registry::register_service(ServiceRecord record) {
  if (record.service_id.empty()) {
    throw Error(Errc::invalid_argument, "service_id must be non-empty");
  }
  if (record.capacity < 1) throw Error(Errc::invalid_argument, "capacity must be >= 1");
  std::vector<std::pair<ServiceRecord, paradigm::ParadigmDescriptor>> work;
  {
    std::lock_guard lock(mutex_);
    record.last_heartbeat = clock_();
    services_[record.service_id] = record;
    if (record.kind == ServiceKind::simulation_worker) {
      // A (re)joining worker starts with an empty local paradigm set.
      for (auto& [id, e] : entries_) e.replicated_to.erase(record.service_id);
      for (const auto& id : entry_order_) work.emplace_back(record, entries_.at(id).descriptor);
    }
  }
  logger("registry")->info("event=register service={} kind={} endpoint={}", record.service_id,
                           service_kind_name(record.kind), record.endpoint);
  replicate(work);
}

void Registry::heartbeat(const std::string& service_id) {
  std::lock_guard lock(mutex_);
  auto it = services_.find(service_id);
  if (it == services_.end()) {
    throw Error(Errc::not_found, "unknown service '" + service_id + "'");
  }
  it->second.last_heartbeat = clock_();
}

std::vector<ServiceRecord> Registry::services() const {
  std::lock_guard lock(mutex_);
  const auto now = clock_();
  std::vector<ServiceRecord> out;
  for (auto [id, r] : services_) {
    r.status = derive_status(r, now);
    out.push_back(std::move(r));
  }
  return out;
}

std::optional<ServiceRecord> Registry::service(const std::string& service_id) const {
  std::lock_guard lock(mutex_);
  auto it = services_.find(service_id);
  if (it == services_.end()) return std::nullopt;
  auto r = it->second;
  r.status = derive_status(r, clock_());
  return r;
}

std::set<std::string> Registry::replicated_paradigms(const std::string& worker_id) const {
  std::lock_guard lock(mutex_);
  std::set<std::string> out;
  for (const auto& [id, e] : entries_) {
    if (e.replicated_to.count(worker_id)) out.insert(id);
  }
  return out;
}

void Registry::replicate_pending() {
  std::vector<std::pair<ServiceRecord, paradigm::ParadigmDescriptor>> work;
  {
    std::lock_guard lock(mutex_);
    const auto now = clock_();
    for (const auto& [sid, svc] : services_) {
      if (svc.kind != ServiceKind::simulation_worker ||
          derive_status(svc, now) != ServiceStatus::up) {
        continue;
      }
      for (const auto& id : entry_order_) {
        const auto& e = entries_.at(id);
        if (!e.replicated_to.count(sid)) work.emplace_back(svc, e.descriptor);
      }
    }
  }
  replicate(work);
}

void Registry::replicate(
    const std::vector<std::pair<ServiceRecord, paradigm::ParadigmDescriptor>>& work) {
  if (!transport_) return;
  for (const auto& [worker, descriptor] : work) {
    const bool ok = transport_->push(worker, descriptor);
    logger("registry")->info("event=replicate paradigm={} worker={} ok={}", descriptor.id,
                             worker.service_id, ok);
    if (!ok) continue;
    std::lock_guard lock(mutex_);
    auto svc = services_.find(worker.service_id);
    auto e = entries_.find(descriptor.id);
    // Skip if the worker re-registered (new endpoint) while we were pushing.
    if (svc == services_.end() || svc->second.endpoint != worker.endpoint ||
        e == entries_.end()) {
      continue;
    }
    e->second.replicated_to.insert(worker.service_id);
  }
}

Grant Registry::authorize_job(const std::string& session_id, const std::string& paradigm_id,
                              JobKind kind, const std::string& job_id, std::int64_t units) {
  const auto session = validate_session(session_id);
  std::lock_guard lock(mutex_);
  Grant g;
  auto it = entries_.find(paradigm_id);
  if (it == entries_.end()) {
    g.reason = "unknown paradigm '" + paradigm_id + "'";
    return g;
  }
  const auto& e = it->second;
  if (e.policy.mode == PolicyMode::restricted && !visible_to(e, session.user_id)) {
    g.reason = "user '" + session.user_id + "' may not use paradigm '" + paradigm_id + "'";
    return g;
  }
  UsageRecord u;
  u.session_id = session.session_id;
  u.user_id = session.user_id;
  u.paradigm_id = paradigm_id;
  u.job_id = job_id;
  u.job_kind = kind;
  u.units = units;
  u.charge = e.policy.mode == PolicyMode::metered ? e.policy.fee_per_job : 0.0;
  u.recorded_at_ms = to_unix_ms(clock_());
  persist_usage(u);
  ledger_.push_back(u);
  g.granted = true;
  g.usage = std::move(u);
  return g;
}

std::vector<UsageRecord> Registry::ledger() const {
  std::lock_guard lock(mutex_);
  return ledger_;
}

double Registry::total_charge() const {
  std::lock_guard lock(mutex_);
  double total = 0.0;
  for (const auto& u : ledger_) total += u.charge;
  return total;
}

}  // namespace n2sky::registry
