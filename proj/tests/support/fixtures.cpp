#include "support/fixtures.hpp"

#include <cstring>

#include "common/ids.hpp"

namespace n2sky::testing {

namespace fs = std::filesystem;

TempDir::TempDir() : path_(fs::temp_directory_path() / ("n2sky-test-" + random_hex(8))) {
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string backprop_descriptor_text() {
  return R"({
  "id": "backprop",
  "name": "backprop",
  "version": "1.0.0",
  "description": "Three layer, fully connected backpropagation network.",
  "topology": {"min_layers": 3, "max_layers": 3, "connectivity": "fully_connected"},
  "hyperparams": [
    {"name": "learning_rate", "kind": "real", "min": 0.0, "max": 1.0, "default": 0.5},
    {"name": "momentum", "kind": "real", "min": 0.0, "max": 0.99, "default": 0.9},
    {"name": "max_epochs", "kind": "integer", "min": 0, "max": 100000, "default": 20000},
    {"name": "activation", "kind": "enumeration", "values": ["sigmoid", "tanh"], "default": "sigmoid"}
  ],
  "io_schema": {"input_dim": "variable", "output_dim": "variable"},
  "engine_ref": "backprop"
})";
}

paradigm::ParadigmDescriptor backprop_descriptor(std::string id) {
  auto d = paradigm::parse_descriptor(backprop_descriptor_text());
  d.id = std::move(id);
  return d;
}

paradigm::ParadigmDescriptor delta_descriptor(std::string id) {
  paradigm::ParadigmDescriptor d;
  d.id = std::move(id);
  d.name = "delta-rule perceptron";
  d.version = "1.0.0";
  d.topology.min_layers = 2;
  d.topology.max_layers = 2;
  d.engine_ref = "delta-rule";
  return d;
}

engine::PatternSet xor_patterns() {
  engine::PatternSet p;
  p.inputs = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  p.targets = std::vector<engine::Vector>{{0}, {1}, {1}, {0}};
  p.provenance = "explicit";
  return p;
}

datastream::TableStore to_store(const oracle::Table& t) {
  datastream::TableStore s;
  s.name = t.name;
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    s.columns.push_back({t.columns[c], t.numeric[c] ? datastream::ColumnKind::number
                                                    : datastream::ColumnKind::text});
  }
  for (const auto& row : t.rows) {
    datastream::Row r;
    for (const auto& cell : row) {
      if (cell.index() == 0) r.emplace_back(std::get<double>(cell));
      else r.emplace_back(std::get<std::string>(cell));
    }
    s.rows.push_back(std::move(r));
  }
  return s;
}

datastream::DocumentStore to_store(const oracle::Collection& c) {
  datastream::DocumentStore s;
  s.name = c.name;
  for (const auto& d : c.docs) {
    datastream::Document doc;
    for (const auto& [k, v] : d) {
      if (v.index() == 0) doc[k] = std::get<double>(v);
      else doc[k] = std::get<std::string>(v);
    }
    s.documents.push_back(std::move(doc));
  }
  return s;
}

namespace {

bool same_cell(const datastream::Value& a, const oracle::Cell& b) {
  if (a.index() != b.index()) return false;
  if (a.index() == 0) return std::get<double>(a) == std::get<double>(b);
  return std::get<std::string>(a) == std::get<std::string>(b);
}

}  // namespace

bool same_rows(const std::vector<datastream::Row>& got,
               const std::vector<std::vector<oracle::Cell>>& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].size() != want[i].size()) return false;
    for (std::size_t j = 0; j < got[i].size(); ++j) {
      if (!same_cell(got[i][j], want[i][j])) return false;
    }
  }
  return true;
}

bool same_docs(const std::vector<datastream::Document>& got, const std::vector<oracle::Doc>& want) {
  if (got.size() != want.size()) return false;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (got[i].size() != want[i].size()) return false;
    for (const auto& [k, v] : want[i]) {
      auto it = got[i].find(k);
      if (it == got[i].end() || !same_cell(it->second, v)) return false;
    }
  }
  return true;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         (a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

bool bit_equal(const std::vector<engine::Matrix>& a, const std::vector<engine::Matrix>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows != b[i].rows || a[i].cols != b[i].cols || !bit_equal(a[i].data, b[i].data)) {
      return false;
    }
  }
  return true;
}

}  // namespace n2sky::testing
