#include <doctest.h>

#include <httplib.h>

#include <thread>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include "common/error.hpp"
#include "datastream/datastream.hpp"
#include "engine/engine.hpp"
#include "support/fixtures.hpp"

using namespace n2sky;
using namespace n2sky::datastream;

namespace {

Error error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  return Error(Errc::internal, "no error raised");
}

paradigm::IOSchema xor_schema() { return {2, 1}; }

void add_xor(StoreCatalog& c) {
  c.add_table(parse_csv("x1,x2,y\n0,0,0\n0,1,1\n1,0,1\n1,1,0\n", "xor"));
}

// StoreCatalog is neither copyable nor movable.
struct XorCatalog {
  StoreCatalog c;
  XorCatalog() { add_xor(c); }
};

DatastreamSpec query_spec(std::string text, std::vector<std::string> in,
                          std::vector<std::string> out, std::string store = {}) {
  return {QueryData{std::move(text), std::move(store), {std::move(in), std::move(out)}}};
}

// Serves fixed payloads on an ephemeral loopback port.
class LoopbackStore {
 public:
  LoopbackStore() {
    server_.Get("/five", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"([{"a":1,"b":2,"t":0},{"a":2,"b":3,"t":1},{"a":3,"b":4,"t":0},)"
                      R"({"a":4,"b":5,"t":1},{"a":5,"b":6,"t":0}])",
                      "application/json");
    });
    server_.Get("/empty", [](const httplib::Request&, httplib::Response& res) {
      res.set_content("[]", "application/json");
    });
    server_.Get("/malformed", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"([{"a":1},)", "application/json");
    });
    server_.Get("/nested", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(R"([{"a":{"deep":1}}])", "application/json");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LoopbackStore() {
    server_.stop();
    thread_.join();
  }
  std::string url(const std::string& path) const {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST_SUITE("datastream") {
  TEST_CASE("explicit data passes through unchanged") {
    auto xor_set = testing::xor_patterns();
    DatastreamSpec spec{ExplicitData{xor_set.inputs, xor_set.targets}};
    auto p = resolve_datastream(spec, xor_schema(), StoreCatalog{});
    CHECK(p == xor_set);
    CHECK(p.provenance == "explicit");
  }

  TEST_CASE("query over CSV equals the explicit form and trains identically") {
    XorCatalog xc;
    auto& catalog = xc.c;
    auto xor_set = testing::xor_patterns();
    auto explicit_set = resolve_datastream({ExplicitData{xor_set.inputs, xor_set.targets}},
                                           xor_schema(), catalog);
    auto query_set = resolve_datastream(
        query_spec("SELECT x1, x2, y FROM xor", {"x1", "x2"}, {"y"}), xor_schema(), catalog);
    REQUIRE(query_set == explicit_set);

    auto d = testing::backprop_descriptor();
    engine::TrainingParams params;
    params.max_epochs = 400;
    auto na = engine::instantiate_network(d, {2, 2, 1}, engine::Activation::sigmoid, testing::kXorSeed);
    auto nb = engine::instantiate_network(d, {2, 2, 1}, engine::Activation::sigmoid, testing::kXorSeed);
    auto a = engine::train(na, explicit_set, params);
    auto b = engine::train(nb, query_set, params);
    CHECK(a.epochs_run == b.epochs_run);
    CHECK(a.converged == b.converged);
    CHECK(testing::bit_equal(a.error_series, b.error_series));
    CHECK(testing::bit_equal(a.final_weights, b.final_weights));
    CHECK(testing::bit_equal(na.weights, nb.weights));
  }

  TEST_CASE("a mapping column absent from the result is named in the error") {
    auto e = error_of([] {
      resolve_datastream(query_spec("SELECT x1, x2 FROM xor", {"x1", "z"}, {}), xor_schema(),
                         XorCatalog().c);
    });
    CHECK(e.code() == Errc::not_found);
    CHECK(std::string(e.what()).find("'z'") != std::string::npos);
  }

  TEST_CASE("text cells in mapped columns are rejected with the column name") {
    StoreCatalog c;
    c.add_table(parse_csv("x1,x2,y\n0,a,0\n", "bad"));
    auto e = error_of([&] {
      resolve_datastream(query_spec("SELECT * FROM bad", {"x1", "x2"}, {"y"}), xor_schema(), c);
    });
    CHECK(std::string(e.what()).find("x2") != std::string::npos);
  }

  TEST_CASE("dimensions are checked against the schema") {
    auto e = error_of([] {
      resolve_datastream(query_spec("SELECT * FROM xor", {"x1"}, {"y"}), xor_schema(),
                         XorCatalog().c);
    });
    CHECK(e.code() == Errc::dimension_mismatch);
    e = error_of([] {
      resolve_datastream({ExplicitData{{{0, 0}, {1}}, std::nullopt}}, xor_schema(), StoreCatalog{});
    });
    CHECK(e.code() == Errc::dimension_mismatch);
    e = error_of([] {
      resolve_datastream({ExplicitData{{{0, 0}}, std::vector<engine::Vector>{{0}, {1}}}},
                         xor_schema(), StoreCatalog{});
    });
    CHECK(e.code() == Errc::dimension_mismatch);
    // Variable dimensions accept any consistent width.
    auto p = resolve_datastream({ExplicitData{{{1, 2, 3}}, std::nullopt}}, {}, StoreCatalog{});
    CHECK(p.inputs.size() == 1);
  }

  TEST_CASE("a column mapped as input and target is rejected") {
    auto e = error_of([] {
      resolve_datastream(query_spec("SELECT * FROM xor", {"x1", "y"}, {"y"}), {}, XorCatalog().c);
    });
    CHECK(e.code() == Errc::invalid_argument);
  }

  TEST_CASE("unknown stores and kind mismatches") {
    XorCatalog xc;
    auto& c = xc.c;
    c.add_collection(parse_jsonl("{\"a\":1}\n", "docs"));
    CHECK(error_of([&] { execute_query(c, parse_query("SELECT * FROM nope")); }).code() ==
          Errc::not_found);
    CHECK(error_of([&] { execute_query(c, parse_query("SELECT * FROM docs")); }).code() ==
          Errc::invalid_argument);
    CHECK(error_of([&] { execute_query(c, parse_query("xor.find({})")); }).code() ==
          Errc::invalid_argument);
  }

  TEST_CASE("CSV parsing handles quoting and kind inference") {
    auto t = parse_csv("n,s\n1,\"a,b\"\n2.5,\"say \"\"hi\"\"\"\n-3,plain\n", "q");
    REQUIRE(t.columns.size() == 2);
    CHECK(t.columns[0].kind == ColumnKind::number);
    CHECK(t.columns[1].kind == ColumnKind::text);
    REQUIRE(t.rows.size() == 3);
    CHECK(std::get<std::string>(t.rows[0][1]) == "a,b");
    CHECK(std::get<std::string>(t.rows[1][1]) == "say \"hi\"");
    CHECK(std::get<double>(t.rows[2][0]) == -3);
    CHECK(error_of([] { parse_csv("a,b\n1\n", "x"); }).code() == Errc::schema_violation);
  }

  TEST_CASE("remote store over loopback serves five documents") {
    LoopbackStore server;
    StoreCatalog c;
    auto p = resolve_datastream(query_spec("remote.find({})", {"a", "b"}, {"t"}, server.url("/five")),
                                xor_schema(), c);
    REQUIRE(p.inputs.size() == 5);
    CHECK(p.inputs[4] == engine::Vector{5, 6});
    CHECK((*p.targets)[1] == engine::Vector{1});
    auto filtered = resolve_datastream(
        query_spec(R"(remote.find({"t": 1}))", {"a", "b"}, {"t"}, server.url("/five")), xor_schema(), c);
    CHECK(filtered.inputs.size() == 2);
  }

  TEST_CASE("remote store edge cases") {
    LoopbackStore server;
    StoreCatalog c;
    auto p = resolve_datastream(query_spec("remote.find({})", {"a"}, {}, server.url("/empty")), {}, c);
    CHECK(p.inputs.empty());
    CHECK(error_of([&] { fetch_remote_store(server.url("/malformed")); }).code() ==
          Errc::schema_violation);
    CHECK(error_of([&] { fetch_remote_store(server.url("/nested")); }).code() ==
          Errc::schema_violation);
    CHECK(error_of([&] {
            resolve_datastream(query_spec("SELECT * FROM t", {"a"}, {}, server.url("/five")), {}, c);
          }).code() == Errc::unsupported);
  }

  TEST_CASE("an unreachable remote store is unavailable") {
    // Bind an ephemeral port and close it again so nothing listens there.
    int port = 0;
    {
      const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
      REQUIRE(fd >= 0);
      sockaddr_in addr{};
      addr.sin_family = AF_INET;
      addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
      REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
      socklen_t len = sizeof addr;
      ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
      port = ntohs(addr.sin_port);
      ::close(fd);
    }
    auto e = error_of([&] { fetch_remote_store("http://127.0.0.1:" + std::to_string(port) + "/x"); });
    CHECK(e.code() == Errc::unavailable);
  }

  TEST_CASE("spec JSON round trip") {
    auto j = nlohmann::json::parse(R"({"kind":"query","query":"SELECT * FROM xor","store":"",)"
                                   R"("mapping":{"inputs":["x1","x2"],"targets":["y"]}})");
    auto spec = spec_from_json(j);
    auto back = spec_from_json(nlohmann::json::parse(to_json(spec).dump()));
    const auto& q = std::get<QueryData>(back.source);
    CHECK(q.query_text == "SELECT * FROM xor");
    CHECK(q.mapping.target_columns == std::vector<std::string>{"y"});
    CHECK(error_of([] { spec_from_json(nlohmann::json::parse(R"({"kind":"magic"})")); }).code() ==
          Errc::schema_violation);
  }
}
