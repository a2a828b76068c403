// n2sky command-line client and launcher. Talks to the runtime only through
// the C interface in n2sky/n2sky.h.
//
// Success: exactly one JSON document on stdout, exit 0.
// Failure: a JSON error document on stderr, exit code = n2sky_status.

#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "n2sky/n2sky.h"

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

struct Options {
  std::string endpoint;
  std::string token;
  std::string output = "json";
};

struct Failure {
  int code;
};

[[noreturn]] void usage_error(const std::string& message) {
  ordered_json e;
  e["code"] = "invalid_argument";
  e["status"] = 400;
  e["message"] = message;
  std::cerr << ordered_json{{"error", e}}.dump() << "\n";
  throw Failure{N2SKY_E_INVALID_ARGUMENT};
}

void check(n2sky_status s) {
  if (s == N2SKY_OK) return;
  std::string err = n2sky_last_error();
  if (err.empty()) {
    err = ordered_json{{"error", {{"code", n2sky_status_name(s)}, {"message", ""}}}}.dump();
  }
  std::cerr << err << "\n";
  throw Failure{static_cast<int>(s)};
}

void print_text(const ordered_json& j, const std::string& prefix) {
  if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      print_text(it.value(), prefix.empty() ? it.key() : prefix + "." + it.key());
    }
  } else if (j.is_array() && !j.empty() && (j.front().is_object() || j.front().is_array())) {
    for (std::size_t i = 0; i < j.size(); ++i) print_text(j[i], prefix + "[" + std::to_string(i) + "]");
  } else {
    std::cout << prefix << ": " << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
  }
}

void emit(const Options& o, const ordered_json& doc) {
  if (o.output == "human") {
    print_text(doc, "");
  } else {
    std::cout << doc.dump() << "\n";
  }
  std::cout.flush();
}

// Takes ownership of a library string.
ordered_json take(char* out) {
  ordered_json j = out ? ordered_json::parse(out) : ordered_json::object();
  n2sky_free(out);
  return j;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) usage_error("cannot read '" + path + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string endpoint_of(const Options& o) {
  if (!o.endpoint.empty()) return o.endpoint;
  if (const char* e = std::getenv("N2SKY_ENDPOINT")) return e;
  return "http://127.0.0.1:8080";
}

struct Client {
  n2sky_client* c = nullptr;
  explicit Client(const Options& o) {
    check(n2sky_client_new(endpoint_of(o).c_str(), &c));
    std::string token = o.token;
    if (token.empty()) {
      if (const char* t = std::getenv("N2SKY_TOKEN")) token = t;
    }
    if (!token.empty()) check(n2sky_client_set_session(c, token.c_str()));
  }
  ~Client() { n2sky_client_free(c); }
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;
};

struct TrainFlags {
  std::string datastream_file;
  std::string datastream_json;
  std::optional<double> lr, momentum, target;
  std::optional<std::int64_t> max_epochs;
  std::optional<std::uint64_t> seed;
  bool wait = false;
  std::uint32_t timeout_ms = 600000;
};

void add_datastream_flags(CLI::App* app, TrainFlags& f) {
  auto* file = app->add_option("--datastream", f.datastream_file, "Datastream JSON file");
  auto* inl = app->add_option("--datastream-json", f.datastream_json, "Inline datastream JSON");
  file->excludes(inl);
}

void add_train_flags(CLI::App* app, TrainFlags& f) {
  add_datastream_flags(app, f);
  app->add_option("--lr", f.lr, "Learning rate");
  app->add_option("--momentum", f.momentum, "Momentum");
  app->add_option("--max-epochs", f.max_epochs, "Epoch budget");
  app->add_option("--target", f.target, "Target SSE");
  app->add_option("--seed", f.seed, "Training seed");
}

void add_wait_flags(CLI::App* app, TrainFlags& f) {
  app->add_flag("--wait", f.wait, "Block until the job finishes");
  app->add_option("--timeout-ms", f.timeout_ms, "Wait limit");
}

std::string datastream_of(const TrainFlags& f) {
  if (!f.datastream_json.empty()) return f.datastream_json;
  if (!f.datastream_file.empty()) return read_file(f.datastream_file);
  usage_error("one of --datastream or --datastream-json is required");
}

std::optional<std::string> params_of(const TrainFlags& f) {
  json p = json::object();
  if (f.lr) p["learning_rate"] = *f.lr;
  if (f.momentum) p["momentum"] = *f.momentum;
  if (f.max_epochs) p["max_epochs"] = *f.max_epochs;
  if (f.target) p["target_error"] = *f.target;
  if (f.seed) p["seed"] = *f.seed;
  if (p.empty()) return std::nullopt;
  return p.dump();
}

ordered_json maybe_wait(Client& cl, const TrainFlags& f, ordered_json submitted) {
  if (!f.wait) return submitted;
  char* out = nullptr;
  check(n2sky_wait_job(cl.c, submitted.at("job_id").get<std::string>().c_str(), f.timeout_ms, &out));
  return take(out);
}

std::vector<std::size_t> parse_layers(const std::string& text) {
  std::vector<std::size_t> sizes;
  std::stringstream s(text);
  std::string part;
  while (std::getline(s, part, ',')) {
    try {
      std::size_t used = 0;
      auto v = std::stoul(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
      sizes.push_back(v);
    } catch (const std::exception&) {
      usage_error("--layers expects comma separated unit counts, got '" + text + "'");
    }
  }
  return sizes;
}

volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

void wait_for_signal() {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  while (!g_stop) pause();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"n2sky: neural network simulation service client"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--endpoint", o.endpoint, "Gateway endpoint (env N2SKY_ENDPOINT)");
  app.add_option("--token", o.token, "Session id (env N2SKY_TOKEN)");
  app.add_option("--output", o.output, "json (machine-readable) or human")
      ->check(CLI::IsMember({"json", "human"}));

  // serve
  auto* serve = app.add_subcommand("serve", "Run a deployment or a standalone worker");
  std::string config_path, role = "all", log_level;
  serve->add_option("--config", config_path, "Deployment config (role all) or worker config (role worker)")
      ->required();
  serve->add_option("--role", role, "Process role")->check(CLI::IsMember({"all", "worker"}));
  serve->add_option("--log-level", log_level, "Log level override");

  // user add
  auto* user = app.add_subcommand("user", "User administration");
  user->require_subcommand(1);
  auto* user_add = user->add_subcommand("add", "Add a user to a users file");
  std::string users_file, user_name, user_password;
  user_add->add_option("--users-file", users_file)->required();
  user_add->add_option("--name", user_name)->required();
  user_add->add_option("--password", user_password)->required();

  auto* login = app.add_subcommand("login", "Open a session");
  std::string login_user, login_credential;
  login->add_option("--user", login_user)->required();
  login->add_option("--credential", login_credential)->required();

  auto* logout = app.add_subcommand("logout", "End the current session");

  auto* publish = app.add_subcommand("publish", "Publish a paradigm descriptor");
  std::string descriptor_file, policy_mode = "public", allow;
  double fee = 0.0;
  publish->add_option("descriptor", descriptor_file, "Descriptor JSON file")->required();
  publish->add_option("--policy", policy_mode)->check(CLI::IsMember({"public", "restricted", "metered"}));
  publish->add_option("--allow", allow, "Comma separated users (restricted)");
  publish->add_option("--fee", fee, "Fee per job (metered)");

  auto* paradigms = app.add_subcommand("paradigms", "Browse paradigms");
  paradigms->require_subcommand(1);
  auto* pquery = paradigms->add_subcommand("query", "Query the paradigm catalogue");
  std::string query_text;
  pquery->add_option("query", query_text, "SELECT ... FROM paradigms ...")->required();
  auto* plist = paradigms->add_subcommand("list", "List visible paradigms");
  auto* pshow = paradigms->add_subcommand("show", "Show one paradigm");
  std::string show_id;
  pshow->add_option("id", show_id)->required();

  auto* net = app.add_subcommand("net", "Network objects");
  net->require_subcommand(1);
  auto* net_create = net->add_subcommand("create", "Instantiate a network");
  std::string net_paradigm, net_layers, net_activation = "sigmoid";
  std::uint64_t net_seed = 0;
  net_create->add_option("--paradigm", net_paradigm)->required();
  net_create->add_option("--layers", net_layers, "e.g. 2,2,1")->required();
  net_create->add_option("--activation", net_activation)->check(CLI::IsMember({"sigmoid", "tanh"}));
  net_create->add_option("--seed", net_seed);

  auto* train = app.add_subcommand("train", "Submit a training job");
  std::string train_network;
  TrainFlags tf;
  train->add_option("--network", train_network)->required();
  add_train_flags(train, tf);
  add_wait_flags(train, tf);

  auto* retrain = app.add_subcommand("retrain", "Continue training from a training result");
  std::string retrain_result;
  TrainFlags rf;
  retrain->add_option("--training-result", retrain_result)->required();
  add_train_flags(retrain, rf);
  add_wait_flags(retrain, rf);

  auto* evaluate = app.add_subcommand("evaluate", "Submit an evaluation job");
  std::string eval_result, eval_network;
  TrainFlags ef;
  auto* er = evaluate->add_option("--training-result", eval_result);
  auto* en = evaluate->add_option("--network", eval_network, "Untrained network id");
  er->excludes(en);
  add_datastream_flags(evaluate, ef);
  add_wait_flags(evaluate, ef);

  auto* status = app.add_subcommand("status", "Job status");
  std::string status_job;
  std::size_t status_since = 0;
  status->add_option("job", status_job)->required();
  status->add_option("--since", status_since, "Error series offset");

  auto* wait = app.add_subcommand("wait", "Wait for a job to finish");
  std::string wait_job;
  std::uint32_t wait_timeout = 600000;
  wait->add_option("job", wait_job)->required();
  wait->add_option("--timeout-ms", wait_timeout);

  auto* result = app.add_subcommand("result", "Fetch an archived result");
  std::string result_key;
  result->add_option("key", result_key, "kind/id")->required();

  auto* ledger = app.add_subcommand("ledger", "Usage ledger of the session's user");
  auto* services = app.add_subcommand("services", "Registered services");
  auto* stores = app.add_subcommand("stores", "Datastream stores known to the gateway");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*serve) {
      if (!log_level.empty()) check(n2sky_set_log_level(log_level.c_str()));
      if (role == "all") {
        n2sky_deployment* d = nullptr;
        check(n2sky_deployment_start(config_path.c_str(), &d));
        emit(o, {{"role", "all"}, {"endpoint", n2sky_deployment_endpoint(d)}});
        wait_for_signal();
        n2sky_deployment_stop(d);
      } else {
        n2sky_worker* w = nullptr;
        check(n2sky_worker_start(read_file(config_path).c_str(), &w));
        emit(o, {{"role", "worker"}, {"endpoint", n2sky_worker_endpoint(w)}});
        wait_for_signal();
        n2sky_worker_stop(w);
      }
      return 0;
    }
    if (*user_add) {
      check(n2sky_user_add(users_file.c_str(), user_name.c_str(), user_password.c_str()));
      emit(o, {{"user", user_name}, {"users_file", users_file}});
      return 0;
    }

    Client cl(o);
    char* out = nullptr;
    if (*login) {
      check(n2sky_login(cl.c, login_user.c_str(), login_credential.c_str(), &out));
      emit(o, take(out));
    } else if (*logout) {
      check(n2sky_logout(cl.c));
      emit(o, {{"ended", true}});
    } else if (*publish) {
      json policy{{"mode", policy_mode}};
      if (policy_mode == "restricted") {
        std::vector<std::string> users;
        std::stringstream s(allow);
        std::string u;
        while (std::getline(s, u, ',')) {
          if (!u.empty()) users.push_back(u);
        }
        policy["allowed_users"] = users;
      }
      if (policy_mode == "metered") policy["fee_per_job"] = fee;
      check(n2sky_publish(cl.c, read_file(descriptor_file).c_str(), policy.dump().c_str(), &out));
      emit(o, take(out));
    } else if (*pquery) {
      check(n2sky_query_paradigms(cl.c, query_text.c_str(), &out));
      emit(o, take(out));
    } else if (*plist) {
      check(n2sky_request(cl.c, "GET", "/api/v1/paradigms", nullptr, &out));
      emit(o, take(out));
    } else if (*pshow) {
      check(n2sky_request(cl.c, "GET", ("/api/v1/paradigms/" + show_id).c_str(), nullptr, &out));
      emit(o, take(out));
    } else if (*net_create) {
      auto sizes = parse_layers(net_layers);
      check(n2sky_create_network(cl.c, net_paradigm.c_str(), sizes.data(), sizes.size(),
                                 net_activation.c_str(), net_seed, &out));
      emit(o, take(out));
    } else if (*train) {
      auto params = params_of(tf);
      check(n2sky_submit_train(cl.c, train_network.c_str(), datastream_of(tf).c_str(),
                               params ? params->c_str() : nullptr, &out));
      emit(o, maybe_wait(cl, tf, take(out)));
    } else if (*retrain) {
      auto params = params_of(rf);
      check(n2sky_submit_retrain(cl.c, retrain_result.c_str(), datastream_of(rf).c_str(),
                                 params ? params->c_str() : nullptr, &out));
      emit(o, maybe_wait(cl, rf, take(out)));
    } else if (*evaluate) {
      if (eval_result.empty() == eval_network.empty()) {
        usage_error("exactly one of --training-result and --network is required");
      }
      check(n2sky_submit_evaluate(cl.c, eval_result.empty() ? nullptr : eval_result.c_str(),
                                  eval_network.empty() ? nullptr : eval_network.c_str(),
                                  datastream_of(ef).c_str(), &out));
      emit(o, maybe_wait(cl, ef, take(out)));
    } else if (*status) {
      check(n2sky_job_status(cl.c, status_job.c_str(), status_since, &out));
      emit(o, take(out));
    } else if (*wait) {
      check(n2sky_wait_job(cl.c, wait_job.c_str(), wait_timeout, &out));
      emit(o, take(out));
    } else if (*result) {
      check(n2sky_get_result(cl.c, result_key.c_str(), &out));
      emit(o, take(out));
    } else if (*ledger) {
      check(n2sky_ledger(cl.c, &out));
      emit(o, take(out));
    } else if (*services) {
      check(n2sky_request(cl.c, "GET", "/api/v1/services", nullptr, &out));
      emit(o, take(out));
    } else if (*stores) {
      check(n2sky_request(cl.c, "GET", "/api/v1/stores", nullptr, &out));
      emit(o, take(out));
    }
  } catch (const Failure& f) {
    return f.code;
  } catch (const json::exception& e) {
    std::cerr << ordered_json{{"error", {{"code", "internal"}, {"message", e.what()}}}}.dump() << "\n";
    return N2SKY_E_INTERNAL;
  }
  return 0;
}
