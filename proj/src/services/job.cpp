#include "services/job.hpp"

#include "common/error.hpp"
#include "engine/serialize.hpp"

namespace n2sky::services {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view phase_name(JobPhase p) {
  switch (p) {
    case JobPhase::queued: return "queued";
    case JobPhase::running: return "running";
    case JobPhase::done: return "done";
    case JobPhase::failed: return "failed";
  }
  return "failed";
}

JobPhase parse_phase(std::string_view s) {
  for (auto p : {JobPhase::queued, JobPhase::running, JobPhase::done, JobPhase::failed}) {
    if (phase_name(p) == s) return p;
  }
  throw Error(Errc::invalid_argument, "unknown job phase '" + std::string(s) + "'");
}

ordered_json to_json(const JobSpec& j) {
  ordered_json out;
  out["job_id"] = j.job_id;
  out["kind"] = registry::job_kind_name(j.kind);
  out["session_id"] = j.session_id;
  out["paradigm_id"] = j.paradigm_id;
  out["network"] = engine::to_json(j.network);
  out["patterns"] = engine::to_json(j.patterns);
  if (j.params) out["params"] = engine::to_json(*j.params);
  return out;
}

JobSpec job_spec_from_json(const json& j) {
  try {
    JobSpec s;
    s.job_id = j.at("job_id").get<std::string>();
    s.kind = registry::parse_job_kind(j.at("kind").get<std::string>());
    s.session_id = j.value("session_id", std::string{});
    s.paradigm_id = j.at("paradigm_id").get<std::string>();
    s.network = engine::network_from_json(j.at("network"));
    s.patterns = engine::pattern_set_from_json(j.at("patterns"));
    if (j.contains("params")) s.params = engine::training_params_from_json(j.at("params"));
    return s;
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, std::string("malformed job spec: ") + e.what());
  }
}

ordered_json to_json(const JobStatus& s) {
  ordered_json j;
  j["job_id"] = s.job_id;
  j["kind"] = registry::job_kind_name(s.kind);
  j["phase"] = phase_name(s.phase);
  j["paradigm_id"] = s.paradigm_id;
  j["network_id"] = s.network_id;
  j["worker_id"] = s.worker_id;
  j["epochs_so_far"] = s.error_series_so_far.size();
  j["error_series_so_far"] = s.error_series_so_far;
  if (s.result_key) j["result_key"] = s.result_key->str();
  if (s.phase == JobPhase::failed) j["failure_reason"] = s.failure_reason;
  return j;
}

}  // namespace n2sky::services
