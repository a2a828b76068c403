#pragma once

#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace n2sky::datastream {

// Stores hold numbers and text only; there is no NULL.
using Value = std::variant<double, std::string>;

enum class ColumnKind { number, text };

inline ColumnKind kind_of(const Value& v) {
  return std::holds_alternative<double>(v) ? ColumnKind::number
                                           : ColumnKind::text;
}

std::string_view kind_name(ColumnKind k);

struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::number;
  bool operator==(const Column&) const = default;
};

using Row = std::vector<Value>;

struct TableStore {
  std::string name;
  std::vector<Column> columns;
  std::vector<Row> rows;

  // Index of `column`, or -1.
  int column_index(std::string_view column) const;
  // Throws Error(schema_violation) when a row breaks arity or kinds.
  void check() const;
  bool operator==(const TableStore&) const = default;
};

using Document = std::map<std::string, Value>;

struct DocumentStore {
  std::string name;
  std::vector<Document> documents;
  void check() const;
  bool operator==(const DocumentStore&) const = default;
};

// CSV with a header row. A column is numeric iff every value in it parses as
// a number.
TableStore parse_csv(std::string_view text, std::string name);
TableStore load_csv(const std::string& path, std::string name = {});

// One flat JSON object per line.
DocumentStore parse_jsonl(std::string_view text, std::string name);
DocumentStore load_jsonl(const std::string& path, std::string name = {});

// Documents from a JSON array of flat objects (the remote store wire format).
DocumentStore parse_document_array(std::string_view payload, std::string name);

// HTTP GET `endpoint` (http://host:port/path) and decode the JSON array it
// serves. Errors: unavailable on network failure, schema_violation on a
// malformed payload.
DocumentStore fetch_remote_store(const std::string& endpoint);

}  // namespace n2sky::datastream
