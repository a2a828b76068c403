#include "datastream/datastream.hpp"

#include <filesystem>
#include <set>

#include "common/error.hpp"

namespace n2sky::datastream {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

bool is_remote(const std::string& ref) {
  return ref.rfind("http://", 0) == 0 || ref.rfind("https://", 0) == 0;
}

std::vector<engine::Vector> vectors(const json& j, const char* field) {
  if (!j.is_array()) {
    throw Error(Errc::schema_violation, std::string("datastream.") + field +
                                            " must be an array of vectors");
  }
  std::vector<engine::Vector> out;
  for (const auto& v : j) {
    if (!v.is_array()) {
      throw Error(Errc::schema_violation,
                  std::string("datastream.") + field + " must hold vectors");
    }
    engine::Vector vec;
    for (const auto& x : v) {
      if (!x.is_number()) {
        throw Error(Errc::schema_violation,
                    std::string("datastream.") + field + " must be numeric");
      }
      vec.push_back(x.get<double>());
    }
    out.push_back(std::move(vec));
  }
  return out;
}

std::vector<std::string> names(const json& j, const char* field) {
  if (!j.is_array()) {
    throw Error(Errc::schema_violation,
                std::string("mapping.") + field + " must be an array of names");
  }
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) {
      throw Error(Errc::schema_violation,
                  std::string("mapping.") + field + " must hold strings");
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

void check_dims(const std::vector<engine::Vector>& vs, const paradigm::Dim& dim,
                const char* what) {
  if (vs.empty()) return;
  const auto width = vs.front().size();
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].size() != width) {
      throw Error(Errc::dimension_mismatch, std::string(what) + " pattern " +
                                                std::to_string(i) +
                                                " has inconsistent dimension");
    }
  }
  if (dim && static_cast<std::int64_t>(width) != *dim) {
    throw Error(Errc::dimension_mismatch,
                std::string(what) + " dimension " + std::to_string(width) +
                    " does not match paradigm schema (" + std::to_string(*dim) + ")");
  }
}

// Column accessor over either result kind.
struct ResultView {
  const QueryResult& result;

  std::size_t size() const {
    return std::visit(
        [](const auto& r) -> std::size_t {
          if constexpr (std::is_same_v<std::decay_t<decltype(r)>, TableResult>) {
            return r.rows.size();
          } else {
            return r.documents.size();
          }
        },
        result);
  }

  double number(std::size_t row, const std::string& column) const {
    const Value* v = nullptr;
    if (const auto* t = std::get_if<TableResult>(&result)) {
      auto it = std::find(t->columns.begin(), t->columns.end(), column);
      v = &t->rows[row][static_cast<std::size_t>(it - t->columns.begin())];
    } else {
      const auto& doc = std::get<DocumentResult>(result).documents[row];
      auto it = doc.find(column);
      if (it == doc.end()) {
        throw Error(Errc::not_found, "mapping column '" + column +
                                         "' missing from document " +
                                         std::to_string(row));
      }
      v = &it->second;
    }
    if (const auto* d = std::get_if<double>(v)) return *d;
    throw Error(Errc::invalid_argument,
                "mapping column '" + column + "' holds text, patterns need numbers");
  }

  void require_columns(const std::vector<std::string>& cols) const {
    if (const auto* t = std::get_if<TableResult>(&result)) {
      for (const auto& c : cols) {
        if (std::find(t->columns.begin(), t->columns.end(), c) == t->columns.end()) {
          throw Error(Errc::not_found,
                      "mapping column '" + c + "' is not in the query output");
        }
      }
    }
  }
};

}  // namespace

DatastreamSpec spec_from_json(const json& j) {
  if (!j.is_object()) {
    throw Error(Errc::schema_violation, "datastream must be a JSON object");
  }
  const auto kind = j.value("kind", std::string{});
  DatastreamSpec spec;
  if (kind == "explicit") {
    ExplicitData e;
    if (!j.contains("inputs")) {
      throw Error(Errc::schema_violation, "datastream.inputs is required");
    }
    e.inputs = vectors(j.at("inputs"), "inputs");
    if (j.contains("targets") && !j.at("targets").is_null()) {
      e.targets = vectors(j.at("targets"), "targets");
    }
    spec.source = std::move(e);
  } else if (kind == "query") {
    QueryData q;
    if (!j.contains("query") || !j.at("query").is_string()) {
      throw Error(Errc::schema_violation, "datastream.query must be a string");
    }
    q.query_text = j.at("query").get<std::string>();
    q.store_ref = j.value("store", std::string{});
    if (!j.contains("mapping") || !j.at("mapping").is_object()) {
      throw Error(Errc::schema_violation, "datastream.mapping is required");
    }
    const auto& m = j.at("mapping");
    q.mapping.input_columns = names(m.value("inputs", json::array()), "inputs");
    q.mapping.target_columns = names(m.value("targets", json::array()), "targets");
    spec.source = std::move(q);
  } else {
    throw Error(Errc::schema_violation,
                "datastream.kind must be \"explicit\" or \"query\"");
  }
  return spec;
}

ordered_json to_json(const DatastreamSpec& spec) {
  ordered_json j;
  if (const auto* e = std::get_if<ExplicitData>(&spec.source)) {
    j["kind"] = "explicit";
    j["inputs"] = e->inputs;
    if (e->targets) j["targets"] = *e->targets;
  } else {
    const auto& q = std::get<QueryData>(spec.source);
    j["kind"] = "query";
    j["query"] = q.query_text;
    if (!q.store_ref.empty()) j["store"] = q.store_ref;
    j["mapping"] = {{"inputs", q.mapping.input_columns},
                    {"targets", q.mapping.target_columns}};
  }
  return j;
}

StoreCatalog::StoreCatalog() : fetcher_(fetch_remote_store) {}

void StoreCatalog::add_table(TableStore table) {
  table.check();
  std::unique_lock lock(mutex_);
  auto name = table.name;
  tables_.insert_or_assign(std::move(name), std::move(table));
}

void StoreCatalog::add_collection(DocumentStore collection) {
  collection.check();
  std::unique_lock lock(mutex_);
  auto name = collection.name;
  collections_.insert_or_assign(std::move(name), std::move(collection));
}

void StoreCatalog::load_directory(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  for (const auto& p : files) {
    if (p.extension() == ".csv") add_table(load_csv(p.string()));
    else if (p.extension() == ".jsonl") add_collection(load_jsonl(p.string()));
  }
}

void StoreCatalog::set_remote_fetcher(RemoteFetcher fetcher) {
  std::unique_lock lock(mutex_);
  fetcher_ = std::move(fetcher);
}

std::optional<TableStore> StoreCatalog::table(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = tables_.find(name);
  if (it == tables_.end()) return std::nullopt;
  return it->second;
}

std::optional<DocumentStore> StoreCatalog::collection(const std::string& name) const {
  std::shared_lock lock(mutex_);
  auto it = collections_.find(name);
  if (it == collections_.end()) return std::nullopt;
  return it->second;
}

DocumentStore StoreCatalog::fetch_remote(const std::string& endpoint) const {
  RemoteFetcher f;
  {
    std::shared_lock lock(mutex_);
    f = fetcher_;
  }
  return f(endpoint);
}

std::vector<std::string> StoreCatalog::names() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [k, v] : tables_) out.push_back(k);
  for (const auto& [k, v] : collections_) out.push_back(k);
  return out;
}

QueryResult execute_query(const StoreCatalog& catalog, const Query& q,
                          const std::string& store_ref) {
  if (const auto* tq = std::get_if<TabularQuery>(&q)) {
    if (is_remote(store_ref)) {
      throw Error(Errc::unsupported,
                  "remote stores serve documents; use a collection.find(...) query");
    }
    const auto& name = store_ref.empty() ? tq->source : store_ref;
    auto table = catalog.table(name);
    if (!table) {
      if (catalog.collection(name)) {
        throw Error(Errc::invalid_argument,
                    "store '" + name + "' is a document store; SQL needs a table");
      }
      throw Error(Errc::not_found, "unknown table '" + name + "'");
    }
    return execute_query(*table, *tq);
  }
  const auto& dq = std::get<DocumentQuery>(q);
  if (is_remote(store_ref)) {
    auto remote = catalog.fetch_remote(store_ref);
    remote.name = dq.collection;
    return execute_query(remote, dq);
  }
  const auto& name = store_ref.empty() ? dq.collection : store_ref;
  auto coll = catalog.collection(name);
  if (!coll) {
    if (catalog.table(name)) {
      throw Error(Errc::invalid_argument,
                  "store '" + name + "' is a table; document queries need a collection");
    }
    throw Error(Errc::not_found, "unknown collection '" + name + "'");
  }
  return execute_query(*coll, dq);
}

engine::PatternSet resolve_datastream(const DatastreamSpec& spec,
                                      const paradigm::IOSchema& schema,
                                      const StoreCatalog& catalog) {
  engine::PatternSet out;
  if (const auto* e = std::get_if<ExplicitData>(&spec.source)) {
    out.inputs = e->inputs;
    out.targets = e->targets;
    out.provenance = "explicit";
  } else {
    const auto& qd = std::get<QueryData>(spec.source);
    const auto& m = qd.mapping;
    if (m.input_columns.empty()) {
      throw Error(Errc::invalid_argument, "mapping.inputs must name at least one column");
    }
    std::set<std::string> seen(m.input_columns.begin(), m.input_columns.end());
    for (const auto& t : m.target_columns) {
      if (seen.count(t)) {
        throw Error(Errc::invalid_argument,
                    "column '" + t + "' is mapped as both input and target");
      }
    }
    const auto query = parse_query(qd.query_text);
    const auto result = execute_query(catalog, query, qd.store_ref);
    const ResultView view{result};
    view.require_columns(m.input_columns);
    view.require_columns(m.target_columns);
    const std::size_t n = view.size();
    out.inputs.reserve(n);
    for (std::size_t r = 0; r < n; ++r) {
      engine::Vector x;
      for (const auto& c : m.input_columns) x.push_back(view.number(r, c));
      out.inputs.push_back(std::move(x));
    }
    if (!m.target_columns.empty()) {
      std::vector<engine::Vector> ts;
      ts.reserve(n);
      for (std::size_t r = 0; r < n; ++r) {
        engine::Vector t;
        for (const auto& c : m.target_columns) t.push_back(view.number(r, c));
        ts.push_back(std::move(t));
      }
      out.targets = std::move(ts);
    }
    out.provenance = "query:" + (qd.store_ref.empty() ? std::string{} : qd.store_ref + ":") +
                     qd.query_text;
  }
  if (out.targets && out.targets->size() != out.inputs.size()) {
    throw Error(Errc::dimension_mismatch, "inputs and targets differ in length");
  }
  check_dims(out.inputs, schema.input_dim, "input");
  if (out.targets) check_dims(*out.targets, schema.output_dim, "target");
  return out;
}

}  // namespace n2sky::datastream
