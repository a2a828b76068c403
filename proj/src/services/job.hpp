#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "archive/archive.hpp"
#include "engine/network.hpp"
#include "registry/registry.hpp"

namespace n2sky::services {

// Everything a worker needs, inlined; workers never call back for data.
struct JobSpec {
  std::string job_id;
  registry::JobKind kind = registry::JobKind::train;
  engine::NetworkObject network;
  engine::PatternSet patterns;
  std::optional<engine::TrainingParams> params;  // train/retrain only
  std::string session_id;
  std::string paradigm_id;
};

enum class JobPhase { queued, running, done, failed };

std::string_view phase_name(JobPhase p);
JobPhase parse_phase(std::string_view s);

struct JobStatus {
  std::string job_id;
  registry::JobKind kind = registry::JobKind::train;
  JobPhase phase = JobPhase::queued;
  std::vector<double> error_series_so_far;
  std::optional<archive::ArchiveKey> result_key;  // present iff done
  std::string failure_reason;
  std::string worker_id;
  std::string paradigm_id;
  std::string network_id;
};

nlohmann::ordered_json to_json(const JobSpec& j);
JobSpec job_spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const JobStatus& s);

}  // namespace n2sky::services
