#pragma once

// Reference implementations used to check the production code. They share
// no code with src/ beyond plain data types.

#include <cstdint>
#include <memory>
#include <tuple>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "engine/network.hpp"

namespace n2sky::oracle {

// ---- networks -------------------------------------------------------------

// Straightforward per-unit forward pass over the documented weight layout.
std::vector<double> forward(const engine::NetworkObject& n, const std::vector<double>& x);

// 0.5 * sum (out - t)^2 for one pattern.
double half_sse(const engine::NetworkObject& n, const std::vector<double>& x,
                const std::vector<double>& t);

// Central finite-difference gradient of half_sse with step eps.
std::vector<engine::Matrix> finite_difference(const engine::NetworkObject& n,
                                              const std::vector<double>& x,
                                              const std::vector<double>& t, double eps);

// Random small network: 2..4 layers of 1..5 units, weights in [-1, 1].
engine::NetworkObject random_network(std::mt19937_64& rng);

// ---- queries --------------------------------------------------------------

using Cell = std::variant<double, std::string>;

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<bool> numeric;  // per column
  std::vector<std::vector<Cell>> rows;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;
struct Node {
  enum class Kind { cmp, not_, and_, or_ } kind = Kind::cmp;
  // cmp: column <op> literal, or literal <op> column when flipped.
  std::string column;
  std::string op;  // "=", "!=", "<>", "<", "<=", ">", ">="
  Cell literal;
  bool flipped = false;
  NodePtr a, b;
};

struct SelectCase {
  std::vector<std::string> projection;  // empty: *
  NodePtr where;
  std::optional<std::uint64_t> limit;
};

Table random_table(std::mt19937_64& rng, std::size_t max_rows);
SelectCase random_select(std::mt19937_64& rng, const Table& t);
std::string render_sql(const SelectCase& q, const Table& t, std::mt19937_64& rng);
// Naive scan, filter, project, truncate.
std::vector<std::vector<Cell>> run_select(const SelectCase& q, const Table& t);

using Doc = std::vector<std::pair<std::string, Cell>>;
struct Collection {
  std::string name;
  std::vector<Doc> docs;
};
struct FindCase {
  std::vector<std::tuple<std::string, std::string, Cell>> filter;  // key, $op, value
  std::optional<std::uint64_t> limit;
};

Collection random_collection(std::mt19937_64& rng, std::size_t max_docs);
FindCase random_find(std::mt19937_64& rng, const Collection& c);
std::string render_find(const FindCase& q, const Collection& c);
std::vector<Doc> run_find(const FindCase& q, const Collection& c);

}  // namespace n2sky::oracle
