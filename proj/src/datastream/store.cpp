#include "datastream/store.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "common/error.hpp"

namespace n2sky::datastream {

using nlohmann::json;

std::string_view kind_name(ColumnKind k) {
  return k == ColumnKind::number ? "number" : "text";
}

int TableStore::column_index(std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return static_cast<int>(i);
  }
  return -1;
}

void TableStore::check() const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != columns.size()) {
      throw Error(Errc::schema_violation,
                  "table '" + name + "' row " + std::to_string(r) +
                      " has wrong arity");
    }
    for (std::size_t c = 0; c < columns.size(); ++c) {
      if (kind_of(rows[r][c]) != columns[c].kind) {
        throw Error(Errc::schema_violation,
                    "table '" + name + "' row " + std::to_string(r) +
                        " column '" + columns[c].name + "' has wrong kind");
      }
    }
  }
}

void DocumentStore::check() const {
  for (const auto& d : documents) {
    for (const auto& [k, v] : d) {
      if (k.empty()) {
        throw Error(Errc::schema_violation,
                    "collection '" + name + "' has an empty key");
      }
    }
  }
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::not_found, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string stem_of(const std::string& path) {
  auto stem = std::filesystem::path(path).filename().string();
  return stem.substr(0, stem.find('.'));
}

bool parse_number(std::string_view s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

// RFC 4180-style record splitting: quoted fields, doubled quotes, CRLF.
std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += ch;
      }
      continue;
    }
    switch (ch) {
      case '"':
        quoted = true;
        field_started = true;
        break;
      case ',':
        record.push_back(std::move(field));
        field.clear();
        field_started = true;
        break;
      case '\r':
        break;
      case '\n':
        if (field_started || !field.empty() || !record.empty()) {
          record.push_back(std::move(field));
          records.push_back(std::move(record));
        }
        field.clear();
        record.clear();
        field_started = false;
        break;
      default:
        field += ch;
        field_started = true;
    }
  }
  if (quoted) throw Error(Errc::schema_violation, "unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) {
    record.push_back(std::move(field));
    records.push_back(std::move(record));
  }
  return records;
}

Value flat_value(const json& v, const std::string& context) {
  if (v.is_number()) return v.get<double>();
  if (v.is_string()) return v.get<std::string>();
  throw Error(Errc::schema_violation,
              "malformed payload: " + context +
                  " must be a number or a string");
}

Document flat_document(const json& j, const std::string& context) {
  if (!j.is_object()) {
    throw Error(Errc::schema_violation,
                "malformed payload: " + context + " is not an object");
  }
  Document d;
  for (const auto& [k, v] : j.items()) {
    if (k.empty()) {
      throw Error(Errc::schema_violation,
                  "malformed payload: empty key in " + context);
    }
    d.emplace(k, flat_value(v, context + "." + k));
  }
  return d;
}

}  // namespace

TableStore parse_csv(std::string_view text, std::string name) {
  auto records = split_csv(text);
  if (records.empty()) {
    throw Error(Errc::schema_violation, "CSV '" + name + "' has no header row");
  }
  TableStore t;
  t.name = std::move(name);
  for (auto& h : records.front()) {
    if (h.empty()) throw Error(Errc::schema_violation, "empty CSV column name");
    if (t.column_index(h) >= 0) {
      throw Error(Errc::schema_violation, "duplicate CSV column '" + h + "'");
    }
    t.columns.push_back({h, ColumnKind::number});
  }
  const std::size_t width = t.columns.size();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw Error(Errc::schema_violation,
                  "CSV row " + std::to_string(r) + " has " +
                      std::to_string(records[r].size()) + " fields, expected " +
                      std::to_string(width));
    }
  }
  for (std::size_t c = 0; c < width; ++c) {
    double scratch = 0;
    for (std::size_t r = 1; r < records.size(); ++r) {
      if (!parse_number(records[r][c], scratch)) {
        t.columns[c].kind = ColumnKind::text;
        break;
      }
    }
  }
  for (std::size_t r = 1; r < records.size(); ++r) {
    Row row;
    row.reserve(width);
    for (std::size_t c = 0; c < width; ++c) {
      if (t.columns[c].kind == ColumnKind::number) {
        double v = 0;
        parse_number(records[r][c], v);
        row.emplace_back(v);
      } else {
        row.emplace_back(std::move(records[r][c]));
      }
    }
    t.rows.push_back(std::move(row));
  }
  return t;
}

TableStore load_csv(const std::string& path, std::string name) {
  return parse_csv(read_file(path), name.empty() ? stem_of(path) : std::move(name));
}

DocumentStore parse_jsonl(std::string_view text, std::string name) {
  DocumentStore s;
  s.name = std::move(name);
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      json j;
      try {
        j = json::parse(line);
      } catch (const json::parse_error& e) {
        throw SyntaxError(start + (e.byte > 0 ? e.byte - 1 : 0), "malformed JSON-lines record on line " +
                                              std::to_string(line_no));
      }
      s.documents.push_back(flat_document(j, "line " + std::to_string(line_no)));
    }
    start = end + 1;
  }
  return s;
}

DocumentStore load_jsonl(const std::string& path, std::string name) {
  return parse_jsonl(read_file(path), name.empty() ? stem_of(path) : std::move(name));
}

DocumentStore parse_document_array(std::string_view payload, std::string name) {
  json j;
  try {
    j = json::parse(payload);
  } catch (const json::parse_error&) {
    throw Error(Errc::schema_violation, "malformed payload: not valid JSON");
  }
  if (!j.is_array()) {
    throw Error(Errc::schema_violation, "malformed payload: expected a JSON array");
  }
  DocumentStore s;
  s.name = std::move(name);
  for (std::size_t i = 0; i < j.size(); ++i) {
    s.documents.push_back(flat_document(j[i], "element " + std::to_string(i)));
  }
  return s;
}

DocumentStore fetch_remote_store(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(Errc::invalid_argument, "remote store '" + endpoint +
                                            "' is not an http:// URL");
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  const std::string origin = endpoint.substr(0, path_start);
  const std::string path =
      path_start == std::string::npos ? "/" : endpoint.substr(path_start);

  httplib::Client client(origin);
  client.set_connection_timeout(std::chrono::seconds(5));
  client.set_read_timeout(std::chrono::seconds(30));
  auto res = client.Get(path);
  if (!res) {
    throw Error(Errc::unavailable, "remote store '" + endpoint +
                                       "' unreachable: " +
                                       httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(Errc::unavailable, "remote store '" + endpoint +
                                       "' answered HTTP " +
                                       std::to_string(res->status));
  }
  auto name = path.substr(path.find_last_of('/') + 1);
  return parse_document_array(res->body, name.empty() ? origin : name);
}

}  // namespace n2sky::datastream
