#include <doctest.h>

#include <thread>

#include "paradigm/paradigm.hpp"
#include "services/deployment.hpp"
#include "support/cluster.hpp"
#include "support/fixtures.hpp"

using namespace n2sky;
using namespace n2sky::testing;
using namespace std::chrono_literals;
using nlohmann::json;

namespace {

struct Cluster {
  TempDir dir;
  services::Deployment deployment;
  GatewayClient alice;

  explicit Cluster(int workers, int capacity = 2)
      : deployment(cluster_config(dir.str() + "/data", workers, capacity)),
        alice([&] {
          deployment.start();
          return deployment.endpoint();
        }()) {
    alice.login("alice", "pw-a");
  }
};

// A job that keeps a worker busy for a while: 256 patterns through 8-32-4.
json long_job(GatewayClient& c, std::int64_t epochs, std::uint64_t seed = 5) {
  const auto net = c.create_network("backprop", {8, 32, 4}, seed);
  return {{"network_id", net},
          {"datastream", random_datastream(256, 8, 4, seed)},
          {"params", {{"max_epochs", epochs}, {"target_error", 0.0}, {"learning_rate", 0.1}}}};
}

int phase_rank(const std::string& p) {
  if (p == "queued") return 0;
  if (p == "running") return 1;
  return 2;
}

bool is_prefix(const json& part, const json& whole) {
  if (part.size() > whole.size()) return false;
  for (std::size_t i = 0; i < part.size(); ++i) {
    if (part[i].get<double>() != whole[i].get<double>()) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("cluster") {
  TEST_CASE("every worker, including a late joiner, holds exactly the registry's paradigms") {
    Cluster c(3);
    c.alice.publish("backprop");
    c.alice.publish("bp-small");
    c.alice.publish("bp-secret", {{"mode", "restricted"}, {"allowed_users", json::array()}});

    services::WorkerConfig late;
    late.service_id = "late-joiner";
    late.heartbeat_interval = 100ms;
    c.deployment.add_worker(late);

    std::set<std::string> expected;
    for (const auto& e : c.deployment.registry().paradigms()) expected.insert(e.descriptor.id);
    CHECK(expected.size() == 3);
    REQUIRE(c.deployment.workers().size() == 4);
    for (auto* w : c.deployment.workers()) {
      CAPTURE(w->config().service_id);
      CHECK(w->local_paradigms() == expected);
      CHECK(c.deployment.registry().replicated_paradigms(w->config().service_id) == expected);
    }
    auto shown = c.alice.call("GET", "/api/v1/paradigms/backprop");
    REQUIRE(shown.status == 200);
    CHECK(shown.body["replicated_to"].size() == 4);

    c.alice.publish("after-join");
    for (auto* w : c.deployment.workers()) CHECK(w->local_paradigms().count("after-join") == 1);
  }

  TEST_CASE("a paradigm published with no workers reaches the first one to register") {
    Cluster c(0);
    c.alice.publish("backprop");
    services::WorkerConfig w;
    w.service_id = "first";
    w.heartbeat_interval = 100ms;
    auto& worker = c.deployment.add_worker(w);
    CHECK(worker.local_paradigms() == std::set<std::string>{"backprop"});
  }

  TEST_CASE("a capacity-1 worker runs one job at a time and queues the rest") {
    Cluster c(1, 1);
    c.alice.publish("backprop");
    std::vector<std::string> jobs;
    for (int i = 0; i < 3; ++i) jobs.push_back(c.alice.submit("train", long_job(c.alice, 300, 10 + i)));
    bool saw_queued = false;
    for (const auto& j : jobs) {
      auto s = c.alice.call("GET", "/api/v1/jobs/" + j);
      saw_queued = saw_queued || s.body["phase"] == "queued";
    }
    CHECK(saw_queued);
    for (const auto& j : jobs) CHECK(c.alice.wait(j, 60s)["phase"] == "done");
    auto* w = c.deployment.worker("worker-1");
    REQUIRE(w);
    CHECK(w->peak_running() == 1);
    CHECK(w->completed() == 3);
  }

  TEST_CASE("jobs spread across workers up to capacity") {
    Cluster c(2, 1);
    c.alice.publish("backprop");
    std::vector<std::string> jobs;
    for (int i = 0; i < 2; ++i) jobs.push_back(c.alice.submit("train", long_job(c.alice, 300, 20 + i)));
    std::set<std::string> placed;
    for (const auto& j : jobs) placed.insert(c.alice.wait(j, 60s)["worker_id"].get<std::string>());
    CHECK(placed == std::set<std::string>{"worker-1", "worker-2"});
  }

  TEST_CASE("status phases never regress and polled series are prefixes of the final series") {
    Cluster c(1);
    c.alice.publish("backprop");
    const auto job = c.alice.submit("train", long_job(c.alice, 1500));
    int last_rank = 0;
    std::vector<json> snapshots;
    json incremental = json::array();
    json final_status;
    const auto deadline = std::chrono::steady_clock::now() + 60s;
    while (std::chrono::steady_clock::now() < deadline) {
      auto s = c.alice.call("GET", "/api/v1/jobs/" + job);
      REQUIRE(s.status == 200);
      const int rank = phase_rank(s.body["phase"]);
      CHECK(rank >= last_rank);
      last_rank = rank;
      snapshots.push_back(s.body["error_series_so_far"]);
      const auto since = incremental.size();
      auto d = c.alice.call("GET", "/api/v1/jobs/" + job + "?since=" + std::to_string(since));
      CHECK(d.body["series_offset"] == since);
      for (const auto& v : d.body["error_series_so_far"]) incremental.push_back(v);
      if (rank == 2) {
        final_status = s.body;
        break;
      }
      std::this_thread::sleep_for(15ms);
    }
    REQUIRE(final_status["phase"] == "done");
    const auto final_series = c.alice.call("GET", "/api/v1/jobs/" + job).body["error_series_so_far"];
    CHECK(final_series.size() == 1500);
    CHECK(snapshots.size() > 2);
    for (const auto& s : snapshots) CHECK(is_prefix(s, final_series));
    CHECK(is_prefix(incremental, final_series));
    auto result = c.alice.call("GET", "/api/v1/results/" + final_status["result_key"].get<std::string>());
    CHECK(result.body["payload"]["error_series"] == final_series);
  }

  TEST_CASE("a worker crash mid-job fails the job once its heartbeat lapses") {
    Cluster c(1);
    c.alice.publish("backprop");
    const auto job = c.alice.submit("train", long_job(c.alice, 100000));
    REQUIRE(eventually([&] {
      auto s = c.alice.call("GET", "/api/v1/jobs/" + job).body;
      return s["phase"] == "running" && s["epochs_so_far"].get<int>() > 0;
    }));
    const auto crashed_at = std::chrono::steady_clock::now();
    c.deployment.worker("worker-1")->crash();
    auto s = c.alice.wait(job, 10s);
    const auto elapsed = std::chrono::steady_clock::now() - crashed_at;
    CHECK(s["phase"] == "failed");
    CHECK(s["failure_reason"].get<std::string>().find("lost") != std::string::npos);
    CHECK(elapsed < 5s);
    CHECK(c.deployment.registry().service("worker-1")->status == registry::ServiceStatus::down);
    // With no compute worker left, new jobs fail instead of queueing forever.
    const auto next = c.alice.submit("train", long_job(c.alice, 10));
    auto n = c.alice.wait(next, 5s);
    CHECK(n["phase"] == "failed");
    CHECK(n["failure_reason"].get<std::string>().find("no compute capacity") != std::string::npos);
  }

  TEST_CASE("an archive outage fails the gateway's write while the worker computes normally") {
    Cluster c(1);
    c.alice.publish("backprop");
    const auto worker_config = services::to_json(c.deployment.worker("worker-1")->config());
    for (const auto& [k, v] : worker_config.items()) {
      CHECK(k.find("archive") == std::string::npos);
    }
    const auto job = c.alice.submit("train", long_job(c.alice, 1000));
    REQUIRE(eventually([&] { return c.alice.call("GET", "/api/v1/jobs/" + job).body["phase"] == "running"; }));
    c.deployment.archive_storage().set_outage(true);
    auto s = c.alice.wait(job, 60s);
    CHECK(s["phase"] == "failed");
    CHECK(s["failure_reason"].get<std::string>().rfind("archive write failed", 0) == 0);
    CHECK(s["error_series_so_far"].size() == 1000);
    CHECK(c.deployment.worker("worker-1")->completed() == 1);
    c.deployment.archive_storage().set_outage(false);
    CHECK_FALSE(c.deployment.archive().contains({archive::Kind::training_result, job}));
    // Once the archive is back, new jobs complete.
    auto ok = c.alice.wait(c.alice.submit("train", long_job(c.alice, 20)), 30s);
    CHECK(ok["phase"] == "done");
  }

  TEST_CASE("with no workers at all a job fails with a capacity reason") {
    Cluster c(0);
    c.alice.publish("backprop");
    const auto net = c.alice.create_network("backprop", {2, 2, 1}, 1);
    auto r = c.alice.call("POST", "/api/v1/jobs/train", {{"network_id", net}, {"datastream", xor_datastream()}});
    REQUIRE(r.status == 202);
    auto s = c.alice.wait(r.body["job_id"], 5s);
    CHECK(s["phase"] == "failed");
    CHECK(s["failure_reason"] == "no compute capacity: no simulation worker is up");
  }

  TEST_CASE("evaluating an untrained network fails the job on the worker") {
    Cluster c(1);
    c.alice.publish("backprop");
    const auto net = c.alice.create_network("backprop", {2, 2, 1}, 1);
    auto s = c.alice.wait(c.alice.submit("evaluate", {{"network_id", net}, {"datastream", xor_datastream()}}));
    CHECK(s["phase"] == "failed");
    CHECK(s["failure_reason"].get<std::string>().find("untrained") != std::string::npos);
  }

  TEST_CASE("archive entries survive a deployment restart byte-exactly") {
    TempDir dir;
    const auto data = dir.str() + "/data";
    std::vector<archive::ArchiveEntry> before;
    {
      services::Deployment d(cluster_config(data, 1));
      d.start();
      GatewayClient c(d.endpoint());
      c.login("alice", "pw-a");
      c.publish("backprop");
      const auto net = c.create_network("backprop", {2, 2, 1}, kXorSeed);
      auto t = c.wait(c.submit("train", {{"network_id", net}, {"datastream", xor_datastream()}}));
      REQUIRE(t["phase"] == "done");
      auto e = c.wait(c.submit("evaluate", {{"training_result", t["result_key"]}, {"datastream", xor_datastream()}}));
      REQUIRE(e["phase"] == "done");
      for (auto kind : {archive::Kind::network_object, archive::Kind::training_result,
                        archive::Kind::evaluation_result}) {
        for (const auto& l : d.archive().list(kind)) before.push_back(d.archive().get(l.key));
      }
      d.stop();
    }
    REQUIRE(before.size() == 3);
    services::Deployment d(cluster_config(data, 1));
    d.start();
    for (const auto& b : before) {
      CAPTURE(b.key.str());
      CHECK(d.archive().get(b.key) == b);
    }
    GatewayClient c(d.endpoint());
    c.login("alice", "pw-a");
    // The registry reloaded too, so the paradigm is still published.
    CHECK(c.call("GET", "/api/v1/paradigms/backprop").status == 200);
    auto r = c.call("GET", "/api/v1/results/" + before[1].key.str());
    REQUIRE(r.status == 200);
    CHECK(r.body["payload"].dump() == json::parse(before[1].payload).dump());
  }

  TEST_CASE("omitted training params take the descriptor defaults and supplied ones are range checked") {
    Cluster c(1);
    auto d = backprop_descriptor("bp-short");
    for (auto& h : d.hyperparams) {
      if (h.name == "max_epochs") h.default_value = std::int64_t{7};
    }
    paradigm::HyperparamDecl target;
    target.name = "target_error";
    target.kind = paradigm::HyperparamKind::real;
    target.min = 0.0;
    target.max = 1.0;
    target.default_value = 0.0;
    d.hyperparams.push_back(target);
    auto pub = c.alice.call("POST", "/api/v1/paradigms",
                            {{"descriptor", json::parse(paradigm::render_descriptor(d))}});
    REQUIRE_MESSAGE(pub.status == 201, pub.body.dump());

    const auto net = c.alice.create_network("bp-short", {2, 2, 1}, 1);
    auto done = c.alice.wait(
        c.alice.submit("train", {{"network_id", net}, {"datastream", xor_datastream()}}));
    REQUIRE(done["phase"] == "done");
    auto result = c.alice.call("GET", "/api/v1/results/" + done["result_key"].get<std::string>());
    REQUIRE(result.status == 200);
    CHECK(result.body["payload"]["epochs_run"] == 7);

    for (const json& params : {json{{"learning_rate", 1.5}}, json{{"max_epochs", -1}},
                               json{{"target_error", 2.0}}, json{{"momentum", 0.995}}}) {
      const std::string text = params.dump();
      CAPTURE(text);
      auto r = c.alice.call("POST", "/api/v1/jobs/train",
                            {{"network_id", net}, {"datastream", xor_datastream()}, {"params", params}});
      CHECK(r.status == 400);
      CHECK(r.error_code() == "schema_violation");
    }
    auto edge = c.alice.call(
        "POST", "/api/v1/jobs/train",
        {{"network_id", net},
         {"datastream", xor_datastream()},
         {"params", {{"learning_rate", 1.0}, {"momentum", 0.0}, {"max_epochs", 0}}}});
    CHECK_MESSAGE(edge.status == 202, edge.body.dump());
  }
}
