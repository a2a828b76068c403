#pragma once

// Paradigm descriptors: the published, machine-readable description of a
// trainable neural-network paradigm. Stored as `.paradigm.json` documents.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace n2sky::paradigm {

enum class Connectivity { fully_connected };

struct LayerBounds {
  std::int64_t min_units = 1;
  std::int64_t max_units = 1;
  bool operator==(const LayerBounds&) const = default;
};

struct TopologySpec {
  std::int64_t min_layers = 2;
  std::int64_t max_layers = 2;
  Connectivity connectivity = Connectivity::fully_connected;
  // One entry per layer position (input first) when present; length equals
  // max_layers.
  std::optional<std::vector<LayerBounds>> layer_size_bounds;
  bool operator==(const TopologySpec&) const = default;
};

enum class HyperparamKind { real, integer, enumeration };

using HyperValue = std::variant<double, std::int64_t, std::string>;

struct HyperparamDecl {
  std::string name;
  HyperparamKind kind = HyperparamKind::real;
  // real/integer: inclusive range [min, max]. enumeration: allowed values.
  HyperValue min{0.0};
  HyperValue max{0.0};
  std::vector<std::string> allowed;
  HyperValue default_value{0.0};
  bool operator==(const HyperparamDecl&) const = default;
};

// A dimension is either fixed (>= 1) or "variable" (nullopt).
using Dim = std::optional<std::int64_t>;

struct IOSchema {
  Dim input_dim;
  Dim output_dim;
  bool operator==(const IOSchema&) const = default;
};

struct ParadigmDescriptor {
  std::string id;
  std::string name;
  std::string version;
  std::string description;
  TopologySpec topology;
  std::vector<HyperparamDecl> hyperparams;
  IOSchema io_schema;
  std::string engine_ref;
  bool operator==(const ParadigmDescriptor&) const = default;
};

struct Violation {
  std::string field;
  std::string message;
  bool operator==(const Violation&) const = default;
};

struct Summary {
  std::string name;
  std::string version;
  std::string engine_ref;
  std::string topology;
  struct Row {
    std::string name;
    std::string kind;
    std::string range;
    std::string default_value;
  };
  std::vector<Row> parameters;

  std::string to_text() const;
};

// Throws SyntaxError on malformed JSON and Error(schema_violation) naming the
// offending field when the document does not match the schema.
ParadigmDescriptor parse_descriptor(std::string_view text);

// Structural invariants only (no engine lookup).
std::vector<Violation> check_invariants(const ParadigmDescriptor& d);

// Full validation: invariants plus engine_ref membership in `known_engines`.
std::vector<Violation> validate_descriptor(
    const ParadigmDescriptor& d, const std::vector<std::string>& known_engines);

// Canonical text. Throws Error(schema_violation) for descriptors that break
// their structural invariants.
std::string render_descriptor(const ParadigmDescriptor& d);

Summary summarize_descriptor(const ParadigmDescriptor& d);

nlohmann::ordered_json to_json(const ParadigmDescriptor& d);
ParadigmDescriptor from_json(const nlohmann::json& j);

std::string_view kind_name(HyperparamKind kind);

}  // namespace n2sky::paradigm
