#include <doctest.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "n2sky/n2sky.h"

using nlohmann::json;
using namespace std::chrono_literals;

namespace {

namespace fs = std::filesystem;

struct Dir {
  fs::path path;
  Dir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("n2sky-capi-" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~Dir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json take(char* out) {
  REQUIRE(out != nullptr);
  auto j = json::parse(out);
  n2sky_free(out);
  return j;
}

std::string last_error_code() {
  auto e = json::parse(n2sky_last_error(), nullptr, false);
  if (!e.is_object() || !e.contains("error")) return {};
  return e["error"].value("code", "");
}

const std::string kShare = N2SKY_SOURCE_DIR "/share";

json deployment_config(const Dir& d, int session_lifetime_s = 600) {
  return {{"gateway", {{"host", "127.0.0.1"}, {"port", 0}}},
          {"data_dir", (d.path / "data").string()},
          {"stores_dir", kShare + "/stores"},
          {"bootstrap_users", {{{"name", "alice"}, {"password", "pw-a"}}, {{"name", "bob"}, {"password", "pw-b"}}}},
          {"heartbeat_interval_ms", 100},
          {"heartbeat_timeout_ms", 400},
          {"session_lifetime_s", session_lifetime_s},
          {"job_poll_interval_ms", 10},
          {"log_level", "warn"},
          {"workers", {{{"service_id", "worker-1"}, {"capacity", 2}}, {{"service_id", "worker-2"}, {"capacity", 2}}}}};
}

struct DeploymentHandle {
  n2sky_deployment* d = nullptr;
  explicit DeploymentHandle(const json& config) {
    REQUIRE(n2sky_deployment_start_json(config.dump().c_str(), nullptr, &d) == N2SKY_OK);
  }
  ~DeploymentHandle() { n2sky_deployment_stop(d); }
  std::string endpoint() const { return n2sky_deployment_endpoint(d); }
};

struct Client {
  n2sky_client* c = nullptr;
  explicit Client(const std::string& endpoint) {
    REQUIRE(n2sky_client_new(endpoint.c_str(), &c) == N2SKY_OK);
  }
  ~Client() { n2sky_client_free(c); }
  void login(const char* user, const char* pw) {
    char* out = nullptr;
    REQUIRE(n2sky_login(c, user, pw, &out) == N2SKY_OK);
    take(out);
  }
  json publish(const std::string& text, const json& policy = nullptr) {
    char* out = nullptr;
    const auto p = policy.dump();
    const auto st = n2sky_publish(c, text.c_str(), policy.is_null() ? nullptr : p.c_str(), &out);
    REQUIRE_MESSAGE(st == N2SKY_OK, n2sky_last_error());
    return take(out);
  }
  std::string network(const char* paradigm, std::vector<size_t> sizes, std::uint64_t seed) {
    char* out = nullptr;
    REQUIRE(n2sky_create_network(c, paradigm, sizes.data(), sizes.size(), "sigmoid", seed, &out) ==
            N2SKY_OK);
    return take(out)["network_id"];
  }
  std::string train(const std::string& net, const json& ds, const json& params = nullptr) {
    char* out = nullptr;
    const auto p = params.dump();
    const auto st = n2sky_submit_train(c, net.c_str(), ds.dump().c_str(),
                                       params.is_null() ? nullptr : p.c_str(), &out);
    REQUIRE_MESSAGE(st == N2SKY_OK, n2sky_last_error());
    return take(out)["job_id"];
  }
  json wait(const std::string& job) {
    char* out = nullptr;
    REQUIRE(n2sky_wait_job(c, job.c_str(), 30000, &out) == N2SKY_OK);
    return take(out);
  }
  json result(const std::string& key) {
    char* out = nullptr;
    REQUIRE(n2sky_get_result(c, key.c_str(), &out) == N2SKY_OK);
    return take(out);
  }
  n2sky_status request(const char* method, const std::string& path, const json& body = nullptr) {
    char* out = nullptr;
    const auto b = body.dump();
    auto st = n2sky_request(c, method, path.c_str(), body.is_null() ? nullptr : b.c_str(), &out);
    n2sky_free(out);
    return st;
  }
};

json xor_explicit() { return json::parse(read_file(kShare + "/datastreams/xor-explicit.json")); }
json xor_query() { return json::parse(read_file(kShare + "/datastreams/xor-query.json")); }

std::string descriptor_text(const std::string& id) {
  auto d = json::parse(read_file(kShare + "/paradigms/backprop.paradigm.json"));
  d["id"] = id;
  return d.dump();
}

}  // namespace

TEST_SUITE("capi") {
  TEST_CASE("library identity and status names") {
    CHECK(std::string(n2sky_version()) == "0.1.0");
    CHECK(std::string(n2sky_status_name(N2SKY_OK)) == "ok");
    CHECK(std::string(n2sky_status_name(N2SKY_E_UNAUTHENTICATED)) == "unauthenticated");
    CHECK(std::string(n2sky_status_name(N2SKY_E_PERMISSION_DENIED)) == "permission_denied");
    CHECK(n2sky_client_new(nullptr, nullptr) == N2SKY_E_INVALID_ARGUMENT);
    CHECK(last_error_code() == "invalid_argument");
  }

  TEST_CASE("full workflow with lineage from network to evaluation") {
    Dir dir;
    DeploymentHandle d(deployment_config(dir));
    Client c(d.endpoint());
    c.login("alice", "pw-a");
    CHECK(std::string(n2sky_client_session(c.c)).size() >= 32);

    auto published = c.publish(read_file(kShare + "/paradigms/backprop.paradigm.json"),
                               {{"mode", "public"}});
    CHECK(published["descriptor"]["id"] == "backprop");
    CHECK(published["replicated_to"].size() == 2);

    char* out = nullptr;
    REQUIRE(n2sky_query_paradigms(c.c, "SELECT id, owner FROM paradigms WHERE name = 'backprop'",
                                  &out) == N2SKY_OK);
    auto q = take(out);
    REQUIRE(q["rows"].size() == 1);
    CHECK(q["rows"][0] == json::array({"backprop", "alice"}));

    const auto net = c.network("backprop", {2, 2, 1}, 1);
    const auto job = c.train(net, xor_explicit());
    auto status = c.wait(job);
    REQUIRE(status["phase"] == "done");
    CHECK(status["result_key"] == "training_result/" + job);
    auto tr = c.result(status["result_key"]);
    CHECK(tr["metadata"]["parent"] == "network_object/" + net);
    CHECK(tr["metadata"]["paradigm_id"] == "backprop");
    CHECK(tr["payload"]["converged"] == true);
    CHECK(tr["payload"]["epochs_run"] == 323);
    CHECK(tr["payload"]["error_series"] == status["error_series_so_far"]);
    CHECK(c.result("network_object/" + net)["payload"]["state"] == "untrained");

    REQUIRE(n2sky_submit_evaluate(c.c, status["result_key"].get<std::string>().c_str(), nullptr,
                                  xor_explicit().dump().c_str(), &out) == N2SKY_OK);
    auto ej = take(out)["job_id"].get<std::string>();
    auto es = c.wait(ej);
    REQUIRE(es["phase"] == "done");
    auto ev = c.result(es["result_key"]);
    CHECK(ev["metadata"]["parent"] == status["result_key"]);
    CHECK(ev["payload"]["created_from"] == status["result_key"]);
    const double targets[] = {0, 1, 1, 0};
    for (int i = 0; i < 4; ++i) {
      CHECK(std::abs(ev["payload"]["outputs"][i][0].get<double>() - targets[i]) < 0.1);
    }

    // Retraining right after convergence starts at or below the target.
    REQUIRE(n2sky_submit_retrain(c.c, status["result_key"].get<std::string>().c_str(),
                                 xor_explicit().dump().c_str(), nullptr, &out) == N2SKY_OK);
    auto rs = c.wait(take(out)["job_id"]);
    REQUIRE(rs["phase"] == "done");
    CHECK(rs["error_series_so_far"][0].get<double>() <= 0.01);
    auto rr = c.result(rs["result_key"]);
    CHECK(rr["payload"]["converged"] == true);
    // A retrained result descends from the network object, like any training result.
    CHECK(rr["metadata"]["parent"] == "network_object/" + net);

    // A zero epoch budget completes without converging.
    auto zs = c.wait(c.train(c.network("backprop", {2, 2, 1}, 1), xor_explicit(), {{"max_epochs", 0}}));
    REQUIRE(zs["phase"] == "done");
    CHECK(c.result(zs["result_key"])["payload"]["converged"] == false);

    REQUIRE(n2sky_ledger(c.c, &out) == N2SKY_OK);
    auto ledger = take(out);
    CHECK(ledger["records"].size() == 4);
    CHECK(ledger["total"] == 0.0);

    REQUIRE(n2sky_request(c.c, "GET", "/api/v1/services", nullptr, &out) == N2SKY_OK);
    auto svcs = take(out);
    CHECK(svcs["services"].size() == 2);
  }

  TEST_CASE("a query datastream trains identically to the explicit one") {
    Dir dir;
    DeploymentHandle d(deployment_config(dir));
    Client c(d.endpoint());
    c.login("alice", "pw-a");
    c.publish(descriptor_text("backprop"));
    auto a = c.result(c.wait(c.train(c.network("backprop", {2, 2, 1}, 1), xor_explicit()))["result_key"]);
    auto b = c.result(c.wait(c.train(c.network("backprop", {2, 2, 1}, 1), xor_query()))["result_key"]);
    CHECK(a["payload"]["error_series"] == b["payload"]["error_series"]);
    CHECK(a["payload"]["final_weights"] == b["payload"]["final_weights"]);
    CHECK(a["payload"]["epochs_run"] == b["payload"]["epochs_run"]);
  }

  TEST_CASE("metered fees add up and restricted denials are not recorded") {
    Dir dir;
    DeploymentHandle d(deployment_config(dir));
    Client alice(d.endpoint()), bob(d.endpoint());
    alice.login("alice", "pw-a");
    bob.login("bob", "pw-b");
    alice.publish(descriptor_text("paid"), {{"mode", "metered"}, {"fee_per_job", 2.0}});
    alice.publish(descriptor_text("private"), {{"mode", "restricted"}, {"allowed_users", json::array()}});

    const auto net = bob.network("paid", {2, 2, 1}, 1);
    std::vector<std::string> jobs;
    for (int i = 0; i < 3; ++i) jobs.push_back(bob.train(net, xor_explicit(), {{"max_epochs", 50}}));
    for (const auto& j : jobs) CHECK(bob.wait(j)["phase"] == "done");

    // Bob may not use the restricted paradigm, not even to build a network.
    size_t sizes[] = {2, 2, 1};
    char* out = nullptr;
    CHECK(n2sky_create_network(bob.c, "private", sizes, 3, "sigmoid", 1, &out) ==
          N2SKY_E_PERMISSION_DENIED);
    const auto private_net = alice.network("private", {2, 2, 1}, 1);
    CHECK(n2sky_submit_train(bob.c, private_net.c_str(), xor_explicit().dump().c_str(), nullptr, &out) ==
          N2SKY_E_PERMISSION_DENIED);
    CHECK(last_error_code() == "permission_denied");

    REQUIRE(n2sky_ledger(bob.c, &out) == N2SKY_OK);
    auto ledger = take(out);
    CHECK(ledger["records"].size() == 3);
    CHECK(ledger["total"] == 6.0);
    for (const auto& r : ledger["records"]) CHECK(r["paradigm_id"] == "paid");
    REQUIRE(n2sky_ledger(alice.c, &out) == N2SKY_OK);
    CHECK(take(out)["records"].empty());
  }

  TEST_CASE("errors map to status codes") {
    Dir dir;
    DeploymentHandle d(deployment_config(dir));
    Client c(d.endpoint());
    char* out = nullptr;
    CHECK(n2sky_login(c.c, "alice", "wrong", &out) == N2SKY_E_UNAUTHENTICATED);
    c.login("alice", "pw-a");
    CHECK(n2sky_publish(c.c, "{\"id\": ", nullptr, &out) == N2SKY_E_SYNTAX);
    CHECK(n2sky_publish(c.c, "{\"id\": \"x\"}", nullptr, &out) == N2SKY_E_SCHEMA);
    c.publish(descriptor_text("backprop"));
    CHECK(n2sky_publish(c.c, descriptor_text("backprop").c_str(), nullptr, &out) ==
          N2SKY_E_ALREADY_EXISTS);
    CHECK(n2sky_job_status(c.c, "nope", 0, &out) == N2SKY_E_NOT_FOUND);
    CHECK(n2sky_get_result(c.c, "training_result/nope", &out) == N2SKY_E_NOT_FOUND);
    size_t bad[] = {2, 1};
    CHECK(n2sky_create_network(c.c, "backprop", bad, 2, "sigmoid", 1, &out) ==
          N2SKY_E_INVALID_ARGUMENT);
    CHECK(n2sky_query_paradigms(c.c, "SELECT * FROM paradigms JOIN x", &out) == N2SKY_E_UNSUPPORTED);
    const auto net = c.network("backprop", {2, 2, 1}, 1);
    json wide{{"kind", "explicit"}, {"inputs", {{0, 0, 0}}}, {"targets", {{0}}}};
    CHECK(n2sky_submit_train(c.c, net.c_str(), wide.dump().c_str(), nullptr, &out) ==
          N2SKY_E_DIMENSION);
    CHECK(n2sky_submit_evaluate(c.c, nullptr, net.c_str(), wide.dump().c_str(), &out) ==
          N2SKY_E_DIMENSION);
    CHECK(n2sky_submit_evaluate(c.c, nullptr, nullptr, wide.dump().c_str(), &out) ==
          N2SKY_E_INVALID_ARGUMENT);
    const auto ds = xor_explicit().dump();
    for (const json& params : {json{{"learning_rate", 10.5}}, json{{"momentum", -0.01}},
                               json{{"max_epochs", 1000001}}, json{{"target_error", 100.5}}}) {
      const std::string text = params.dump();
      CAPTURE(text);
      CHECK(n2sky_submit_train(c.c, net.c_str(), ds.c_str(), text.c_str(), &out) ==
            N2SKY_E_SCHEMA);
      const std::string field = "params." + params.begin().key();
      CHECK(std::string(n2sky_last_error()).find(field) != std::string::npos);
    }
    REQUIRE(n2sky_ledger(c.c, &out) == N2SKY_OK);
    CHECK(take(out)["records"].empty());
    n2sky_client* dead = nullptr;
    REQUIRE(n2sky_client_new("http://127.0.0.1:1", &dead) == N2SKY_OK);
    CHECK(n2sky_login(dead, "a", "b", &out) == N2SKY_E_TRANSPORT);
    n2sky_client_free(dead);
  }

  TEST_CASE("forged and expired sessions are denied on every endpoint") {
    Dir dir;
    DeploymentHandle d(deployment_config(dir, 1));
    Client c(d.endpoint());
    c.login("alice", "pw-a");
    c.publish(descriptor_text("backprop"));
    const auto net = c.network("backprop", {2, 2, 1}, 1);
    const auto job = c.train(net, xor_explicit(), {{"max_epochs", 5}});
    const auto done = c.wait(job);
    const std::string tr = done["result_key"];

    const json ds = xor_explicit();
    const std::vector<std::tuple<const char*, std::string, json>> routes{
        {"POST", "/api/v1/logout", nullptr},
        {"POST", "/api/v1/paradigms", {{"descriptor", descriptor_text("other")}}},
        {"GET", "/api/v1/paradigms", nullptr},
        {"POST", "/api/v1/paradigms/query", {{"query", "SELECT * FROM paradigms"}}},
        {"GET", "/api/v1/paradigms/backprop", nullptr},
        {"POST", "/api/v1/networks", {{"paradigm_id", "backprop"}, {"layer_sizes", {2, 2, 1}}}},
        {"POST", "/api/v1/jobs/train", {{"network_id", net}, {"datastream", ds}}},
        {"POST", "/api/v1/jobs/retrain", {{"training_result", tr}, {"datastream", ds}}},
        {"POST", "/api/v1/jobs/evaluate", {{"training_result", tr}, {"datastream", ds}}},
        {"GET", "/api/v1/jobs/" + job, nullptr},
        {"GET", "/api/v1/results/" + tr, nullptr},
        {"GET", "/api/v1/archive/training_result", nullptr},
        {"GET", "/api/v1/ledger", nullptr},
        {"GET", "/api/v1/services", nullptr},
        {"GET", "/api/v1/stores", nullptr},
        {"GET", "/api/v1/no-such-route", nullptr},
    };
    const std::string real = n2sky_client_session(c.c);
    std::string forged = real;
    forged[0] = forged[0] == 'f' ? 'e' : 'f';
    auto sweep = [&](const char* label) {
      for (const auto& [method, path, body] : routes) {
        CAPTURE(label);
        CAPTURE(path);
        CHECK(c.request(method, path, body) == N2SKY_E_UNAUTHENTICATED);
        CHECK(last_error_code() == "unauthenticated");
      }
    };
    for (const char* token : {forged.c_str(), "", "x", "../../etc/passwd"}) {
      n2sky_client_set_session(c.c, token);
      sweep("forged");
    }
    n2sky_client_set_session(c.c, nullptr);
    sweep("absent");

    // The restricted route set still works for the genuine session, then
    // the session lapses after one idle second.
    n2sky_client_set_session(c.c, real.c_str());
    CHECK(c.request("GET", "/api/v1/paradigms") == N2SKY_OK);
    std::this_thread::sleep_for(1500ms);
    sweep("expired");
    // Nothing was published, trained or charged by the denied calls.
    c.login("alice", "pw-a");
    char* out = nullptr;
    REQUIRE(n2sky_ledger(c.c, &out) == N2SKY_OK);
    CHECK(take(out)["records"].size() == 1);
    REQUIRE(n2sky_request(c.c, "GET", "/api/v1/paradigms", nullptr, &out) == N2SKY_OK);
    CHECK(take(out)["paradigms"].size() == 1);
  }

  TEST_CASE("archive listing and stores are visible through the gateway") {
    Dir dir;
    DeploymentHandle d(deployment_config(dir));
    Client c(d.endpoint());
    c.login("alice", "pw-a");
    c.publish(descriptor_text("backprop"));
    c.publish(descriptor_text("other"));
    for (int i = 0; i < 3; ++i) c.network("backprop", {2, 2, 1}, i);
    c.network("other", {2, 2, 1}, 9);
    char* out = nullptr;
    REQUIRE(n2sky_request(c.c, "GET", "/api/v1/archive/network_object?paradigm_id=backprop", nullptr,
                          &out) == N2SKY_OK);
    CHECK(take(out)["entries"].size() == 3);
    REQUIRE(n2sky_request(c.c, "GET", "/api/v1/stores", nullptr, &out) == N2SKY_OK);
    auto stores = take(out);
    CHECK(stores.dump().find("xor") != std::string::npos);
    CHECK(c.request("GET", "/api/v1/archive/bogus") == N2SKY_E_INVALID_ARGUMENT);
  }

  TEST_CASE("logout ends the session and wait times out on a long job") {
    Dir dir;
    DeploymentHandle d(deployment_config(dir));
    Client c(d.endpoint());
    c.login("alice", "pw-a");
    c.publish(descriptor_text("backprop"));
    json inputs = json::array(), targets = json::array();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 256; ++i) {
      json x = json::array(), t = json::array();
      for (int k = 0; k < 8; ++k) x.push_back(u(rng));
      for (int k = 0; k < 4; ++k) t.push_back(u(rng));
      inputs.push_back(x);
      targets.push_back(t);
    }
    const json ds{{"kind", "explicit"}, {"inputs", inputs}, {"targets", targets}};
    const auto net = c.network("backprop", {8, 32, 4}, 1);
    // Stopping the deployment cancels this job.
    const auto job = c.train(net, ds, {{"max_epochs", 1000000}, {"target_error", 0.0}});
    char* out = nullptr;
    CHECK(n2sky_wait_job(c.c, job.c_str(), 200, &out) == N2SKY_E_TIMEOUT);
    REQUIRE(n2sky_logout(c.c) == N2SKY_OK);
    CHECK(std::string(n2sky_client_session(c.c)).empty());
    CHECK(c.request("GET", "/api/v1/ledger") == N2SKY_E_UNAUTHENTICATED);
  }

  TEST_CASE("users can be added to a users file") {
    Dir dir;
    const auto users = (dir.path / "users.json").string();
    REQUIRE(n2sky_user_add(users.c_str(), "carol", "pw-c") == N2SKY_OK);
    auto cfg = deployment_config(dir);
    cfg["users_file"] = users;
    cfg["bootstrap_users"] = json::array();
    DeploymentHandle d(cfg);
    Client c(d.endpoint());
    c.login("carol", "pw-c");
    char* out = nullptr;
    CHECK(n2sky_login(c.c, "alice", "pw-a", &out) == N2SKY_E_UNAUTHENTICATED);
  }
}
