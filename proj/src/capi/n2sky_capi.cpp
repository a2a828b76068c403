#include "n2sky/n2sky.h"

#include <chrono>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <thread>

#include <json.hpp>

#include "common/error.hpp"
#include "common/log.hpp"
#include "registry/users.hpp"
#include "services/config.hpp"
#include "services/deployment.hpp"
#include "services/http.hpp"
#include "services/worker.hpp"

using nlohmann::json;
using nlohmann::ordered_json;
using n2sky::Errc;
using n2sky::Error;

struct n2sky_client {
  std::string endpoint;
  std::string session;
};

struct n2sky_deployment {
  std::unique_ptr<n2sky::services::Deployment> deployment;
  std::string endpoint;
};

struct n2sky_worker {
  std::unique_ptr<n2sky::services::SimulationWorker> worker;
  std::string endpoint;
};

namespace {

thread_local std::string last_error;

n2sky_status status_of(Errc c) {
  switch (c) {
    case Errc::invalid_argument: return N2SKY_E_INVALID_ARGUMENT;
    case Errc::syntax_error: return N2SKY_E_SYNTAX;
    case Errc::schema_violation: return N2SKY_E_SCHEMA;
    case Errc::unsupported: return N2SKY_E_UNSUPPORTED;
    case Errc::dimension_mismatch: return N2SKY_E_DIMENSION;
    case Errc::failed_precondition: return N2SKY_E_FAILED_PRECONDITION;
    case Errc::not_found: return N2SKY_E_NOT_FOUND;
    case Errc::already_exists: return N2SKY_E_ALREADY_EXISTS;
    case Errc::unauthenticated: return N2SKY_E_UNAUTHENTICATED;
    case Errc::permission_denied: return N2SKY_E_PERMISSION_DENIED;
    case Errc::unavailable: return N2SKY_E_UNAVAILABLE;
    case Errc::io_error: return N2SKY_E_IO;
    case Errc::internal: return N2SKY_E_INTERNAL;
  }
  return N2SKY_E_INTERNAL;
}

n2sky_status fail(n2sky_status s, const std::string& code, int http, const std::string& message) {
  ordered_json e;
  e["code"] = code;
  e["status"] = http;
  e["message"] = message;
  last_error = ordered_json{{"error", e}}.dump();
  return s;
}

n2sky_status fail(const Error& e) {
  return fail(status_of(e.code()), std::string(n2sky::errc_name(e.code())),
              n2sky::errc_http_status(e.code()), e.what());
}

char* dup(const std::string& s) {
  auto* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p) std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

// Runs fn, translating exceptions into a status and last_error.
template <class F>
n2sky_status guard(F&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    return fail(e);
  } catch (const json::exception& e) {
    return fail(N2SKY_E_SCHEMA, "schema_violation", 400, e.what());
  } catch (const std::bad_alloc&) {
    return fail(N2SKY_E_INTERNAL, "internal", 500, "out of memory");
  } catch (const std::exception& e) {
    return fail(N2SKY_E_INTERNAL, "internal", 500, e.what());
  }
}

void require(const void* p, const char* what) {
  if (!p) throw Error(Errc::invalid_argument, std::string(what) + " must not be NULL");
}

n2sky_status call(n2sky_client* c, const std::string& method, const std::string& path,
                  const std::string& body, char** out) {
  if (out) *out = nullptr;
  httplib::Headers headers;
  if (!c->session.empty()) headers.emplace(n2sky::services::kSessionHeader, c->session);
  auto reply = n2sky::services::http_call(c->endpoint, method, path, body, headers,
                                          std::chrono::seconds(60));
  if (!reply) {
    return fail(N2SKY_E_TRANSPORT, "transport", 0, "cannot reach gateway at " + c->endpoint);
  }
  if (reply->status / 100 != 2) {
    json j = json::parse(reply->body, nullptr, false);
    if (j.is_object() && j.contains("error") && j["error"].contains("code")) {
      last_error = reply->body;
      try {
        return status_of(n2sky::errc_from_name(j["error"]["code"].get<std::string>()));
      } catch (const Error&) {
        return N2SKY_E_INTERNAL;
      }
    }
    return fail(N2SKY_E_INTERNAL, "internal", reply->status,
                "gateway replied " + std::to_string(reply->status));
  }
  if (out) *out = dup(reply->body.empty() ? "{}" : reply->body);
  return N2SKY_OK;
}

json parse_arg(const char* text, const char* what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw n2sky::SyntaxError(e.byte > 0 ? e.byte - 1 : 0, std::string(what) + " is not valid JSON");
  }
}

}  // namespace

extern "C" {

const char* n2sky_version(void) { return "0.1.0"; }

const char* n2sky_status_name(n2sky_status s) {
  switch (s) {
    case N2SKY_OK: return "ok";
    case N2SKY_E_INVALID_ARGUMENT: return "invalid_argument";
    case N2SKY_E_SYNTAX: return "syntax_error";
    case N2SKY_E_SCHEMA: return "schema_violation";
    case N2SKY_E_UNSUPPORTED: return "unsupported";
    case N2SKY_E_DIMENSION: return "dimension_mismatch";
    case N2SKY_E_FAILED_PRECONDITION: return "failed_precondition";
    case N2SKY_E_NOT_FOUND: return "not_found";
    case N2SKY_E_ALREADY_EXISTS: return "already_exists";
    case N2SKY_E_UNAUTHENTICATED: return "unauthenticated";
    case N2SKY_E_PERMISSION_DENIED: return "permission_denied";
    case N2SKY_E_UNAVAILABLE: return "unavailable";
    case N2SKY_E_IO: return "io_error";
    case N2SKY_E_INTERNAL: return "internal";
    case N2SKY_E_TRANSPORT: return "transport";
    case N2SKY_E_TIMEOUT: return "timeout";
  }
  return "unknown";
}

const char* n2sky_last_error(void) { return last_error.c_str(); }

void n2sky_free(void* p) { std::free(p); }

n2sky_status n2sky_set_log_level(const char* level) {
  return guard([&] {
    require(level, "level");
    n2sky::set_log_level(level);
    return N2SKY_OK;
  });
}

n2sky_status n2sky_deployment_start(const char* config_path, n2sky_deployment** out) {
  return guard([&] {
    require(config_path, "config_path");
    require(out, "out");
    *out = nullptr;
    auto config = n2sky::services::load_deployment_config(config_path);
    auto d = std::make_unique<n2sky_deployment>();
    d->deployment = std::make_unique<n2sky::services::Deployment>(std::move(config));
    d->deployment->start();
    d->endpoint = d->deployment->endpoint();
    *out = d.release();
    return N2SKY_OK;
  });
}

n2sky_status n2sky_deployment_start_json(const char* config_json, const char* base_dir,
                                         n2sky_deployment** out) {
  return guard([&] {
    require(config_json, "config_json");
    require(out, "out");
    *out = nullptr;
    auto config = n2sky::services::deployment_config_from_json(parse_arg(config_json, "config"),
                                                               base_dir ? base_dir : ".");
    n2sky::services::apply_env_overrides(config);
    auto d = std::make_unique<n2sky_deployment>();
    d->deployment = std::make_unique<n2sky::services::Deployment>(std::move(config));
    d->deployment->start();
    d->endpoint = d->deployment->endpoint();
    *out = d.release();
    return N2SKY_OK;
  });
}

const char* n2sky_deployment_endpoint(const n2sky_deployment* d) {
  return d ? d->endpoint.c_str() : "";
}

void n2sky_deployment_stop(n2sky_deployment* d) {
  if (!d) return;
  try {
    d->deployment->stop();
  } catch (...) {
  }
  delete d;
}

n2sky_status n2sky_worker_start(const char* worker_config_json, n2sky_worker** out) {
  return guard([&] {
    require(worker_config_json, "worker_config_json");
    require(out, "out");
    *out = nullptr;
    auto config = n2sky::services::worker_config_from_json(
        parse_arg(worker_config_json, "worker config"));
    auto w = std::make_unique<n2sky_worker>();
    w->worker = std::make_unique<n2sky::services::SimulationWorker>(std::move(config));
    w->worker->start();
    w->endpoint = w->worker->endpoint();
    *out = w.release();
    return N2SKY_OK;
  });
}

const char* n2sky_worker_endpoint(const n2sky_worker* w) { return w ? w->endpoint.c_str() : ""; }

void n2sky_worker_stop(n2sky_worker* w) {
  if (!w) return;
  try {
    w->worker->stop();
  } catch (...) {
  }
  delete w;
}

n2sky_status n2sky_user_add(const char* users_file, const char* name, const char* password) {
  return guard([&] {
    require(users_file, "users_file");
    require(name, "name");
    require(password, "password");
    n2sky::registry::UserStore store(users_file);
    store.add_user(name, password);
    return N2SKY_OK;
  });
}

n2sky_status n2sky_client_new(const char* endpoint, n2sky_client** out) {
  return guard([&] {
    require(endpoint, "endpoint");
    require(out, "out");
    std::string e = endpoint;
    if (e.rfind("http://", 0) != 0) {
      throw Error(Errc::invalid_argument, "endpoint must start with http://");
    }
    *out = new n2sky_client{e, {}};
    return N2SKY_OK;
  });
}

void n2sky_client_free(n2sky_client* c) { delete c; }

n2sky_status n2sky_client_set_session(n2sky_client* c, const char* session_id) {
  return guard([&] {
    require(c, "client");
    c->session = session_id ? session_id : "";
    return N2SKY_OK;
  });
}

const char* n2sky_client_session(const n2sky_client* c) { return c ? c->session.c_str() : ""; }

n2sky_status n2sky_request(n2sky_client* c, const char* method, const char* path,
                           const char* body_json, char** out_json) {
  return guard([&] {
    require(c, "client");
    require(method, "method");
    require(path, "path");
    return call(c, method, path, body_json ? body_json : "", out_json);
  });
}

n2sky_status n2sky_login(n2sky_client* c, const char* user, const char* credential,
                         char** out_json) {
  return guard([&] {
    require(c, "client");
    require(user, "user");
    require(credential, "credential");
    ordered_json body{{"user", user}, {"credential", credential}};
    char* out = nullptr;
    auto s = call(c, "POST", "/api/v1/login", body.dump(), &out);
    if (s != N2SKY_OK) return s;
    c->session = json::parse(out).at("session_id").get<std::string>();
    if (out_json) *out_json = out;
    else std::free(out);
    return N2SKY_OK;
  });
}

n2sky_status n2sky_logout(n2sky_client* c) {
  return guard([&] {
    require(c, "client");
    auto s = call(c, "POST", "/api/v1/logout", "{}", nullptr);
    if (s == N2SKY_OK) c->session.clear();
    return s;
  });
}

n2sky_status n2sky_publish(n2sky_client* c, const char* descriptor, const char* policy_json,
                           char** out_json) {
  return guard([&] {
    require(c, "client");
    require(descriptor, "descriptor");
    // Sent as text so descriptor syntax errors carry their byte position.
    json body{{"descriptor", std::string(descriptor)}};
    if (policy_json) body["policy"] = parse_arg(policy_json, "policy");
    return call(c, "POST", "/api/v1/paradigms", body.dump(), out_json);
  });
}

n2sky_status n2sky_query_paradigms(n2sky_client* c, const char* query, char** out_json) {
  return guard([&] {
    require(c, "client");
    require(query, "query");
    return call(c, "POST", "/api/v1/paradigms/query", json{{"query", query}}.dump(), out_json);
  });
}

n2sky_status n2sky_create_network(n2sky_client* c, const char* paradigm_id,
                                  const size_t* layer_sizes, size_t n_layers,
                                  const char* activation, uint64_t seed, char** out_json) {
  return guard([&] {
    require(c, "client");
    require(paradigm_id, "paradigm_id");
    if (n_layers > 0) require(layer_sizes, "layer_sizes");
    ordered_json body;
    body["paradigm_id"] = paradigm_id;
    body["layer_sizes"] = std::vector<size_t>(layer_sizes, layer_sizes + n_layers);
    body["activation"] = activation ? activation : "sigmoid";
    body["seed"] = seed;
    return call(c, "POST", "/api/v1/networks", body.dump(), out_json);
  });
}

n2sky_status n2sky_submit_train(n2sky_client* c, const char* network_id,
                                const char* datastream_json, const char* params_json,
                                char** out_json) {
  return guard([&] {
    require(c, "client");
    require(network_id, "network_id");
    require(datastream_json, "datastream_json");
    ordered_json body;
    body["network_id"] = network_id;
    body["datastream"] = parse_arg(datastream_json, "datastream");
    if (params_json) body["params"] = parse_arg(params_json, "params");
    return call(c, "POST", "/api/v1/jobs/train", body.dump(), out_json);
  });
}

n2sky_status n2sky_submit_retrain(n2sky_client* c, const char* training_result,
                                  const char* datastream_json, const char* params_json,
                                  char** out_json) {
  return guard([&] {
    require(c, "client");
    require(training_result, "training_result");
    require(datastream_json, "datastream_json");
    ordered_json body;
    body["training_result"] = training_result;
    body["datastream"] = parse_arg(datastream_json, "datastream");
    if (params_json) body["params"] = parse_arg(params_json, "params");
    return call(c, "POST", "/api/v1/jobs/retrain", body.dump(), out_json);
  });
}

n2sky_status n2sky_submit_evaluate(n2sky_client* c, const char* training_result,
                                   const char* network_id, const char* datastream_json,
                                   char** out_json) {
  return guard([&] {
    require(c, "client");
    require(datastream_json, "datastream_json");
    if ((training_result == nullptr) == (network_id == nullptr)) {
      throw Error(Errc::invalid_argument,
                  "exactly one of training_result and network_id must be given");
    }
    ordered_json body;
    if (training_result) body["training_result"] = training_result;
    else body["network_id"] = network_id;
    body["datastream"] = parse_arg(datastream_json, "datastream");
    return call(c, "POST", "/api/v1/jobs/evaluate", body.dump(), out_json);
  });
}

n2sky_status n2sky_job_status(n2sky_client* c, const char* job_id, size_t since,
                              char** out_json) {
  return guard([&] {
    require(c, "client");
    require(job_id, "job_id");
    return call(c, "GET", std::string("/api/v1/jobs/") + job_id + "?since=" + std::to_string(since),
                "", out_json);
  });
}

n2sky_status n2sky_wait_job(n2sky_client* c, const char* job_id, uint32_t timeout_ms,
                            char** out_json) {
  return guard([&] {
    require(c, "client");
    require(job_id, "job_id");
    if (out_json) *out_json = nullptr;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
    auto pause = std::chrono::milliseconds(10);
    for (;;) {
      char* out = nullptr;
      auto s = call(c, "GET", std::string("/api/v1/jobs/") + job_id, "", &out);
      if (s != N2SKY_OK) return s;
      const auto phase = json::parse(out).at("phase").get<std::string>();
      if (phase == "done" || phase == "failed") {
        if (out_json) *out_json = out;
        else std::free(out);
        return N2SKY_OK;
      }
      std::free(out);
      if (std::chrono::steady_clock::now() >= deadline) {
        return fail(N2SKY_E_TIMEOUT, "timeout", 0,
                    std::string("job '") + job_id + "' still " + phase + " after " +
                        std::to_string(timeout_ms) + " ms");
      }
      std::this_thread::sleep_for(pause);
      pause = std::min(pause * 2, std::chrono::milliseconds(200));
    }
  });
}

n2sky_status n2sky_get_result(n2sky_client* c, const char* key, char** out_json) {
  return guard([&] {
    require(c, "client");
    require(key, "key");
    const std::string k = key;
    if (k.find('/') == std::string::npos) {
      throw Error(Errc::invalid_argument, "result key must be 'kind/id'");
    }
    return call(c, "GET", "/api/v1/results/" + k, "", out_json);
  });
}

n2sky_status n2sky_ledger(n2sky_client* c, char** out_json) {
  return guard([&] {
    require(c, "client");
    return call(c, "GET", "/api/v1/ledger", "", out_json);
  });
}

}  // extern "C"
