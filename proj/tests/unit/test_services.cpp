#include <doctest.h>

#include <cstdlib>
#include <fstream>

#include "common/error.hpp"
#include "engine/engine.hpp"
#include "services/config.hpp"
#include "services/job.hpp"
#include "services/scheduler.hpp"
#include "support/fixtures.hpp"

using namespace n2sky;
using namespace n2sky::services;
using Action = Placement::Action;

namespace {

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::internal;
}

WorkerNode node(std::string id, int capacity, int running, std::set<std::string> paradigms = {"bp"},
                bool up = true, registry::Affinity affinity = registry::Affinity::compute) {
  return {std::move(id), up, affinity, capacity, running, std::move(paradigms)};
}

// Sets an environment variable for the lifetime of the guard.
struct EnvGuard {
  std::string name;
  EnvGuard(std::string n, const char* value) : name(std::move(n)) { ::setenv(name.c_str(), value, 1); }
  ~EnvGuard() { ::unsetenv(name.c_str()); }
};

}  // namespace

TEST_SUITE("scheduler") {
  TEST_CASE("least loaded eligible worker wins, ties to the lowest id") {
    auto p = assign_worker({node("w2", 4, 1), node("w1", 4, 1), node("w3", 4, 0)}, "bp");
    CHECK(p.action == Action::assign);
    CHECK(p.worker_id == "w3");
    p = assign_worker({node("w2", 4, 1), node("w1", 4, 1)}, "bp");
    CHECK(p.worker_id == "w1");
  }

  TEST_CASE("ineligible workers are skipped") {
    auto p = assign_worker({node("down", 4, 0, {"bp"}, false), node("full", 1, 1),
                            node("lacks", 4, 0, {"other"}),
                            node("data", 4, 0, {"bp"}, true, registry::Affinity::data),
                            node("ok", 4, 3)},
                           "bp");
    CHECK(p.action == Action::assign);
    CHECK(p.worker_id == "ok");
  }

  TEST_CASE("no free slot queues, no compute worker up fails") {
    auto p = assign_worker({node("w1", 1, 1), node("w2", 4, 0, {"other"})}, "bp");
    CHECK(p.action == Action::queue);
    CHECK(p.worker_id.empty());
    p = assign_worker({node("w1", 4, 0, {"bp"}, false),
                       node("d", 4, 0, {"bp"}, true, registry::Affinity::data)},
                      "bp");
    CHECK(p.action == Action::fail);
    CHECK(p.reason.find("no compute capacity") != std::string::npos);
    CHECK(assign_worker({}, "bp").action == Action::fail);
  }

  TEST_CASE("FIFO queueing against capacity") {
    std::vector<WorkerNode> nodes{node("w1", 1, 0)};
    std::vector<std::pair<std::string, std::string>> dispatched;
    std::vector<std::string> failed;
    Scheduler s([&] { return nodes; },
                [&](const std::string& job, const std::string& w) {
                  dispatched.emplace_back(job, w);
                  return true;
                },
                [&](const std::string& job, const std::string&) { failed.push_back(job); });
    s.submit("j1", "bp");
    s.submit("j2", "bp");
    s.submit("j3", "bp");
    REQUIRE(dispatched.size() == 1);
    CHECK(dispatched[0].first == "j1");
    CHECK(s.queued() == 2);
    CHECK(s.running().at("w1") == 1);
    s.on_finished("j1");
    REQUIRE(dispatched.size() == 2);
    CHECK(dispatched[1].first == "j2");
    s.on_finished("unknown");
    CHECK(dispatched.size() == 2);
    s.on_finished("j2");
    CHECK(dispatched.back().first == "j3");
    CHECK(s.queued() == 0);
    CHECK(failed.empty());
  }

  TEST_CASE("refused dispatch keeps the job queued until a later pump") {
    std::vector<WorkerNode> nodes{node("w1", 2, 0)};
    bool accept = false;
    std::vector<std::string> dispatched;
    Scheduler s([&] { return nodes; },
                [&](const std::string& job, const std::string&) {
                  if (accept) dispatched.push_back(job);
                  return accept;
                },
                [](const std::string&, const std::string&) {});
    s.submit("j1", "bp");
    s.submit("j2", "bp");
    CHECK(s.queued() == 2);
    accept = true;
    s.pump();
    CHECK(dispatched == std::vector<std::string>{"j1", "j2"});
    CHECK(s.queued() == 0);
  }

  TEST_CASE("losing every compute worker fails queued jobs") {
    std::vector<WorkerNode> nodes{node("w1", 1, 0)};
    std::vector<std::string> failed;
    Scheduler s([&] { return nodes; }, [](const std::string&, const std::string&) { return true; },
                [&](const std::string& job, const std::string&) { failed.push_back(job); });
    s.submit("j1", "bp");
    s.submit("j2", "bp");
    nodes[0].up = false;
    s.on_finished("j1");
    CHECK(failed == std::vector<std::string>{"j2"});
    CHECK(s.queued() == 0);
  }

  TEST_CASE("a job whose paradigm is not yet replicated waits for it") {
    std::vector<WorkerNode> nodes{node("w1", 2, 0, {})};
    std::vector<std::string> dispatched;
    Scheduler s([&] { return nodes; },
                [&](const std::string& job, const std::string&) {
                  dispatched.push_back(job);
                  return true;
                },
                [](const std::string&, const std::string&) {});
    s.submit("late", "bp");
    CHECK(dispatched.empty());
    nodes[0].paradigms.insert("bp");
    s.pump();
    CHECK(dispatched == std::vector<std::string>{"late"});
  }
}

TEST_SUITE("config") {
  TEST_CASE("the worker config key set is closed and holds no data locator") {
    const auto& keys = worker_config_keys();
    for (const auto& k : keys) {
      CAPTURE(k);
      CHECK(k.find("archive") == std::string::npos);
      CHECK(k.find("store") == std::string::npos);
      CHECK(k.find("data") == std::string::npos);
      CHECK(k.find("registry") == std::string::npos);
    }
    WorkerConfig c;
    c.service_id = "w1";
    c.monitor_endpoint = "http://127.0.0.1:9";
    auto j = to_json(c);
    for (const auto& [k, v] : j.items()) {
      CHECK(std::find(keys.begin(), keys.end(), k) != keys.end());
    }
    auto back = worker_config_from_json(nlohmann::json::parse(j.dump()));
    CHECK(back.service_id == "w1");
    CHECK(back.monitor_endpoint == c.monitor_endpoint);
    CHECK(back.heartbeat_interval == c.heartbeat_interval);
  }

  TEST_CASE("unknown worker config keys are rejected") {
    auto j = nlohmann::json::parse(R"({"service_id":"w","archive_endpoint":"http://x"})");
    CHECK(code_of([&] { worker_config_from_json(j); }) == Errc::invalid_argument);
    CHECK(code_of([] { worker_config_from_json(nlohmann::json::parse(R"({"capacity":0})")); }) ==
          Errc::invalid_argument);
  }

  TEST_CASE("deployment config resolves paths and validates heartbeats") {
    auto j = nlohmann::json::parse(R"({
      "gateway": {"port": 0}, "data_dir": "data", "stores_dir": "stores",
      "heartbeat_interval_ms": 100, "heartbeat_timeout_ms": 400,
      "workers": [{"service_id": "w1", "capacity": 2}]
    })");
    auto c = deployment_config_from_json(j, "/base");
    CHECK(c.gateway_port == 0);
    CHECK(c.data_dir == "/base/data");
    CHECK(c.stores_dir == "/base/stores");
    CHECK(c.users_file == "/base/data/users.json");
    REQUIRE(c.workers.size() == 1);
    CHECK(c.workers[0].heartbeat_interval == std::chrono::milliseconds(100));
    j["heartbeat_timeout_ms"] = 100;
    CHECK(code_of([&] { deployment_config_from_json(j, "/base"); }) == Errc::invalid_argument);
  }

  TEST_CASE("environment variables override the file") {
    testing::TempDir dir;
    const auto path = (dir.path() / "c.json").string();
    std::ofstream(path) << R"({"gateway":{"port":8080},"data_dir":"d","workers":[{"service_id":"w1"}]})";
    EnvGuard port("N2SKY_GATEWAY_PORT", "0");
    EnvGuard data("N2SKY_DATA_DIR", "/tmp/elsewhere");
    EnvGuard cap("N2SKY_WORKER_CAPACITY", "3");
    auto c = load_deployment_config(path);
    apply_env_overrides(c);
    CHECK(c.gateway_port == 0);
    CHECK(c.data_dir == "/tmp/elsewhere");
    CHECK(c.users_file == "/tmp/elsewhere/users.json");
    CHECK(c.workers[0].capacity == 3);
  }

  TEST_CASE("missing and malformed config files") {
    testing::TempDir dir;
    CHECK(code_of([&] { load_deployment_config((dir.path() / "nope.json").string()); }) ==
          Errc::not_found);
    const auto path = (dir.path() / "bad.json").string();
    std::ofstream(path) << "{\"gateway\": ";
    CHECK(code_of([&] { load_deployment_config(path); }) == Errc::syntax_error);
  }

  TEST_CASE("the shipped default config loads and has two compute workers") {
    auto c = load_deployment_config(N2SKY_SOURCE_DIR "/share/config/default.json");
    CHECK(c.workers.size() == 2);
    CHECK(c.bootstrap_users.size() >= 1);
    for (const auto& w : c.workers) CHECK(w.affinity == registry::Affinity::compute);
  }

  TEST_CASE("job specs round-trip through JSON") {
    auto d = testing::backprop_descriptor();
    JobSpec spec;
    spec.job_id = "job-7";
    spec.kind = registry::JobKind::retrain;
    spec.network = engine::instantiate_network(d, {2, 2, 1}, engine::Activation::sigmoid, 3, "net-7");
    spec.patterns = testing::xor_patterns();
    spec.params = engine::TrainingParams{0.3, 0.5, 77, 0.02, 9};
    spec.session_id = "sess";
    spec.paradigm_id = "backprop";
    auto back = job_spec_from_json(nlohmann::json::parse(to_json(spec).dump()));
    CHECK(back.job_id == spec.job_id);
    CHECK(back.kind == spec.kind);
    CHECK(testing::bit_equal(back.network.weights, spec.network.weights));
    CHECK(back.patterns == spec.patterns);
    CHECK(back.params == spec.params);
    CHECK(back.paradigm_id == "backprop");
    spec.kind = registry::JobKind::evaluate;
    spec.params.reset();
    CHECK_FALSE(job_spec_from_json(nlohmann::json::parse(to_json(spec).dump())).params.has_value());
  }
}
