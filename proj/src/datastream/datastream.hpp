#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "datastream/query.hpp"
#include "datastream/store.hpp"
#include "engine/network.hpp"
#include "paradigm/paradigm.hpp"

namespace n2sky::datastream {

struct ColumnMapping {
  std::vector<std::string> input_columns;
  std::vector<std::string> target_columns;  // may be empty
};

struct ExplicitData {
  std::vector<engine::Vector> inputs;
  std::optional<std::vector<engine::Vector>> targets;
};

struct QueryData {
  std::string query_text;
  // Local store name or http(s):// endpoint; empty means the query's own
  // table/collection name.
  std::string store_ref;
  ColumnMapping mapping;
};

struct DatastreamSpec {
  std::variant<ExplicitData, QueryData> source;
};

// Wire format:
//   {"kind":"explicit","inputs":[[..]],"targets":[[..]]}
//   {"kind":"query","query":"...","store":"...","mapping":{"inputs":[..],"targets":[..]}}
DatastreamSpec spec_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const DatastreamSpec& spec);

// Named local stores plus a fetcher for remote document stores. Stores are
// immutable snapshots once added; lookups are safe from any thread.
class StoreCatalog {
 public:
  using RemoteFetcher = std::function<DocumentStore(const std::string&)>;

  StoreCatalog();

  void add_table(TableStore table);
  void add_collection(DocumentStore collection);
  // Loads every *.csv and *.jsonl file in `dir` (name = file stem).
  void load_directory(const std::string& dir);
  void set_remote_fetcher(RemoteFetcher fetcher);

  std::optional<TableStore> table(const std::string& name) const;
  std::optional<DocumentStore> collection(const std::string& name) const;
  DocumentStore fetch_remote(const std::string& endpoint) const;
  std::vector<std::string> names() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, TableStore> tables_;
  std::map<std::string, DocumentStore> collections_;
  RemoteFetcher fetcher_;
};

QueryResult execute_query(const StoreCatalog& catalog, const Query& q,
                          const std::string& store_ref = {});

// Dimensions are checked against the schema's fixed dimensions. Errors name
// the offending column or store.
engine::PatternSet resolve_datastream(const DatastreamSpec& spec,
                                      const paradigm::IOSchema& schema,
                                      const StoreCatalog& catalog);

}  // namespace n2sky::datastream
