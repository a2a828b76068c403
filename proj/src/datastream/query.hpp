#pragma once

// Query language for datastreams: single-table SELECT and flat document
// filters. Grammar in docs/query-grammar.md.

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "datastream/store.hpp"

namespace n2sky::datastream {

enum class CmpOp { eq, ne, lt, le, gt, ge };

std::string_view op_symbol(CmpOp op);

struct ColumnRef {
  std::string name;
  bool operator==(const ColumnRef&) const = default;
};

using Operand = std::variant<ColumnRef, Value>;

struct Expr;
using ExprPtr = std::shared_ptr<const Expr>;

struct Comparison {
  Operand lhs;
  CmpOp op = CmpOp::eq;
  Operand rhs;
};
struct NotExpr {
  ExprPtr inner;
};
struct AndExpr {
  ExprPtr lhs, rhs;
};
struct OrExpr {
  ExprPtr lhs, rhs;
};

struct Expr {
  std::variant<Comparison, NotExpr, AndExpr, OrExpr> node;
};

struct TabularQuery {
  std::vector<std::string> projection;  // empty means '*'
  std::string source;
  ExprPtr predicate;  // null when there is no WHERE clause
  std::optional<std::uint64_t> limit;
};

struct FieldCondition {
  CmpOp op = CmpOp::eq;
  Value value;
};

struct DocumentQuery {
  std::string collection;
  // Every condition must hold (implicit AND).
  std::vector<std::pair<std::string, FieldCondition>> filter;
  std::optional<std::uint64_t> limit;
};

using Query = std::variant<TabularQuery, DocumentQuery>;

// Throws SyntaxError (with position) or Error(unsupported) for constructs
// outside the grammar such as JOIN or GROUP BY.
Query parse_query(std::string_view text);

struct TableResult {
  std::vector<std::string> columns;
  std::vector<Row> rows;
};

struct DocumentResult {
  std::vector<Document> documents;
};

using QueryResult = std::variant<TableResult, DocumentResult>;

// Filter, project, then truncate to LIMIT; rows keep store order. Throws
// Error(not_found) for unknown tables/columns and Error(invalid_argument)
// for comparisons between numbers and text.
TableResult execute_query(const TableStore& store, const TabularQuery& q);

// Documents lacking a filtered key, or holding a value of the other kind,
// fail every condition except $ne.
DocumentResult execute_query(const DocumentStore& store, const DocumentQuery& q);

}  // namespace n2sky::datastream
