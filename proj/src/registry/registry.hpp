#pragma once

// Paradigm registry, service monitor, session management and usage metering.
// All state lives in one consistency domain guarded by a single mutex;
// replication pushes run outside it.

#include <chrono>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "common/clock.hpp"
#include "datastream/query.hpp"
#include "paradigm/paradigm.hpp"
#include "registry/users.hpp"

namespace n2sky::registry {

enum class PolicyMode { open, restricted, metered };  // "public" on the wire

struct AccessPolicy {
  PolicyMode mode = PolicyMode::open;
  std::set<std::string> allowed_users;
  double fee_per_job = 0.0;
  bool operator==(const AccessPolicy&) const = default;
};

struct ParadigmEntry {
  paradigm::ParadigmDescriptor descriptor;
  std::string owner;
  AccessPolicy policy;
  TimePoint published_at;
  std::set<std::string> replicated_to;
};

enum class ServiceKind { simulation_worker, archive, registry, gateway };
enum class Affinity { compute, data, admin };
enum class ServiceStatus { up, suspect, down };

struct ServiceRecord {
  std::string service_id;
  ServiceKind kind = ServiceKind::simulation_worker;
  std::string endpoint;
  Affinity affinity = Affinity::compute;
  int capacity = 1;
  TimePoint last_heartbeat;
  ServiceStatus status = ServiceStatus::up;  // derived on read
};

struct Session {
  std::string session_id;
  std::string user_id;
  TimePoint created_at;
  TimePoint expires_at;
};

enum class JobKind { train, retrain, evaluate };

struct UsageRecord {
  std::string session_id;
  std::string user_id;
  std::string paradigm_id;
  std::string job_id;
  JobKind job_kind = JobKind::train;
  std::int64_t units = 0;  // epochs budgeted (train/retrain) or patterns (evaluate)
  double charge = 0.0;
  std::int64_t recorded_at_ms = 0;
};

struct Grant {
  bool granted = false;
  std::string reason;
  std::optional<UsageRecord> usage;
};

struct RegistryConfig {
  std::chrono::milliseconds heartbeat_interval{2000};
  std::chrono::milliseconds heartbeat_timeout{6000};
  std::chrono::seconds session_lifetime{1800};
  std::string data_dir;  // empty: nothing persisted
};

// Delivers a descriptor to a simulation worker. Returns false on failure;
// the registry retries on the next replicate_pending() pass.
class ReplicationTransport {
 public:
  virtual ~ReplicationTransport() = default;
  virtual bool push(const ServiceRecord& worker,
                    const paradigm::ParadigmDescriptor& descriptor) = 0;
};

class Registry {
 public:
  Registry(RegistryConfig config, UserStore users,
           std::shared_ptr<ReplicationTransport> transport, Clock clock = system_clock());

  // --- user management -------------------------------------------------
  // Denial is std::nullopt; no session is created.
  std::optional<Session> authenticate(const std::string& user, const std::string& credential);
  // Throws Error(unauthenticated) for absent, forged or expired ids.
  // Refreshes the sliding expiry.
  Session validate_session(const std::string& session_id);
  void end_session(const std::string& session_id);

  // --- paradigms ---------------------------------------------------------
  // Errors: unauthenticated, schema_violation (invalid descriptor or
  // policy), already_exists. Pushes the descriptor to every up worker before
  // returning.
  ParadigmEntry publish_paradigm(const std::string& session_id,
                                 const paradigm::ParadigmDescriptor& descriptor,
                                 const AccessPolicy& policy);
  std::optional<ParadigmEntry> paradigm(const std::string& id) const;
  std::vector<ParadigmEntry> paradigms() const;
  // Entries the user may read.
  bool visible_to(const ParadigmEntry& e, const std::string& user) const;

  // SQL over the virtual table
  //   paradigms(id, name, version, engine_ref, owner, mode)
  // restricted to entries visible to the session's user.
  datastream::TableResult query_paradigms(const std::string& session_id,
                                          const std::string& query_text);

  // --- service monitor --------------------------------------------------
  // Registering a simulation worker triggers catch-up replication.
  void register_service(ServiceRecord record);
  // Throws Error(not_found) for unknown ids.
  void heartbeat(const std::string& service_id);
  std::vector<ServiceRecord> services() const;
  std::optional<ServiceRecord> service(const std::string& service_id) const;
  // Paradigm ids pushed to `worker_id`.
  std::set<std::string> replicated_paradigms(const std::string& worker_id) const;
  // Retries replication of every entry missing from some up worker.
  void replicate_pending();

  // --- access control and metering --------------------------------------
  // Throws Error(unauthenticated) for bad sessions; policy denials are data.
  Grant authorize_job(const std::string& session_id, const std::string& paradigm_id,
                      JobKind kind, const std::string& job_id, std::int64_t units);
  std::vector<UsageRecord> ledger() const;
  double total_charge() const;

  const RegistryConfig& config() const { return config_; }

 private:
  ServiceStatus derive_status(const ServiceRecord& r, TimePoint now) const;
  void replicate(const std::vector<std::pair<ServiceRecord, paradigm::ParadigmDescriptor>>& work);
  void persist_entry(const ParadigmEntry& e) const;
  void persist_usage(const UsageRecord& u) const;
  void load();

  RegistryConfig config_;
  UserStore users_;
  std::shared_ptr<ReplicationTransport> transport_;
  Clock clock_;

  mutable std::mutex mutex_;
  std::map<std::string, Session> sessions_;
  std::map<std::string, ParadigmEntry> entries_;
  std::vector<std::string> entry_order_;
  std::map<std::string, ServiceRecord> services_;
  std::vector<UsageRecord> ledger_;
};

std::string_view policy_mode_name(PolicyMode m);
std::string_view service_kind_name(ServiceKind k);
std::string_view affinity_name(Affinity a);
std::string_view status_name(ServiceStatus s);
std::string_view job_kind_name(JobKind k);
PolicyMode parse_policy_mode(std::string_view s);
ServiceKind parse_service_kind(std::string_view s);
Affinity parse_affinity(std::string_view s);
JobKind parse_job_kind(std::string_view s);

nlohmann::ordered_json to_json(const AccessPolicy& p);
AccessPolicy policy_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const ParadigmEntry& e);
nlohmann::ordered_json to_json(const ServiceRecord& r);
nlohmann::ordered_json to_json(const UsageRecord& u);
nlohmann::ordered_json to_json(const Session& s);
UsageRecord usage_from_json(const nlohmann::json& j);

}  // namespace n2sky::registry
