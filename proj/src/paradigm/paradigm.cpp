#include "paradigm/paradigm.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "common/error.hpp"

namespace n2sky::paradigm {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

[[noreturn]] void schema_error(const std::string& field,
                               const std::string& what) {
  throw Error(Errc::schema_violation, "field '" + field + "': " + what);
}

const json& require(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    schema_error(path.empty() ? key : path + "." + key,
                 "missing required field");
  }
  return *it;
}

std::string require_string(const json& obj, const char* key,
                           const std::string& path = {}) {
  const auto& v = require(obj, key, path);
  if (!v.is_string()) {
    schema_error(path.empty() ? key : path + "." + key, "expected a string");
  }
  return v.get<std::string>();
}

std::int64_t require_integer(const json& v, const std::string& field) {
  if (!v.is_number_integer()) schema_error(field, "expected an integer");
  return v.get<std::int64_t>();
}

Dim parse_dim(const json& v, const std::string& field) {
  if (v.is_string()) {
    if (v.get<std::string>() == "variable") return std::nullopt;
    schema_error(field, "expected a positive integer or \"variable\"");
  }
  auto n = require_integer(v, field);
  if (n < 1) schema_error(field, "fixed dimension must be >= 1");
  return n;
}

json render_dim(const Dim& d) {
  if (d) return *d;
  return "variable";
}

HyperparamKind parse_kind(const std::string& s, const std::string& field) {
  if (s == "real") return HyperparamKind::real;
  if (s == "integer") return HyperparamKind::integer;
  if (s == "enumeration") return HyperparamKind::enumeration;
  schema_error(field, "unknown kind '" + s + "'");
}

HyperValue parse_numeric(const json& v, HyperparamKind kind,
                         const std::string& field) {
  if (kind == HyperparamKind::integer) return require_integer(v, field);
  if (!v.is_number()) schema_error(field, "expected a number");
  return v.get<double>();
}

json render_value(const HyperValue& v) {
  return std::visit([](const auto& x) { return json(x); }, v);
}

std::string value_text(const HyperValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else {
          std::ostringstream os;
          os << x;
          return os.str();
        }
      },
      v);
}

double as_double(const HyperValue& v) {
  if (auto d = std::get_if<double>(&v)) return *d;
  if (auto i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return 0.0;
}

HyperparamDecl parse_hyperparam(const json& j, std::size_t index) {
  const std::string path = "hyperparams[" + std::to_string(index) + "]";
  if (!j.is_object()) schema_error(path, "expected an object");
  HyperparamDecl h;
  h.name = require_string(j, "name", path);
  h.kind = parse_kind(require_string(j, "kind", path), path + ".kind");
  const auto& def = require(j, "default", path);
  if (h.kind == HyperparamKind::enumeration) {
    const auto& values = require(j, "values", path);
    if (!values.is_array()) schema_error(path + ".values", "expected an array");
    for (const auto& v : values) {
      if (!v.is_string()) {
        schema_error(path + ".values", "expected string members");
      }
      h.allowed.push_back(v.get<std::string>());
    }
    if (!def.is_string()) schema_error(path + ".default", "expected a string");
    h.default_value = def.get<std::string>();
  } else {
    h.min = parse_numeric(require(j, "min", path), h.kind, path + ".min");
    h.max = parse_numeric(require(j, "max", path), h.kind, path + ".max");
    if (as_double(h.min) > as_double(h.max)) {
      schema_error(path, "bad range: min exceeds max");
    }
    h.default_value = parse_numeric(def, h.kind, path + ".default");
  }
  return h;
}

ordered_json render_hyperparam(const HyperparamDecl& h) {
  ordered_json j;
  j["name"] = h.name;
  j["kind"] = kind_name(h.kind);
  if (h.kind == HyperparamKind::enumeration) {
    j["values"] = h.allowed;
  } else {
    j["min"] = render_value(h.min);
    j["max"] = render_value(h.max);
  }
  j["default"] = render_value(h.default_value);
  return j;
}

}  // namespace

std::string_view kind_name(HyperparamKind kind) {
  switch (kind) {
    case HyperparamKind::real:
      return "real";
    case HyperparamKind::integer:
      return "integer";
    case HyperparamKind::enumeration:
      return "enumeration";
  }
  return "real";
}

ParadigmDescriptor from_json(const json& j) {
  if (!j.is_object()) schema_error("<document>", "expected a JSON object");
  ParadigmDescriptor d;
  d.id = require_string(j, "id");
  d.engine_ref = require_string(j, "engine_ref");
  d.name = require_string(j, "name");
  d.version = require_string(j, "version");
  d.description = j.contains("description") ? require_string(j, "description")
                                            : std::string{};

  const auto& topo = require(j, "topology", "");
  if (!topo.is_object()) schema_error("topology", "expected an object");
  d.topology.min_layers =
      require_integer(require(topo, "min_layers", "topology"),
                      "topology.min_layers");
  d.topology.max_layers =
      require_integer(require(topo, "max_layers", "topology"),
                      "topology.max_layers");
  if (d.topology.min_layers > d.topology.max_layers) {
    schema_error("topology", "bad range: min_layers exceeds max_layers");
  }
  const auto connectivity =
      require_string(topo, "connectivity", "topology");
  if (connectivity != "fully_connected") {
    schema_error("topology.connectivity",
                 "unsupported connectivity '" + connectivity + "'");
  }
  if (auto it = topo.find("layer_size_bounds"); it != topo.end()) {
    if (!it->is_array()) {
      schema_error("topology.layer_size_bounds", "expected an array");
    }
    std::vector<LayerBounds> bounds;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string path =
          "topology.layer_size_bounds[" + std::to_string(i) + "]";
      const auto& b = (*it)[i];
      if (!b.is_object()) schema_error(path, "expected an object");
      LayerBounds lb;
      lb.min_units = require_integer(require(b, "min", path), path + ".min");
      lb.max_units = require_integer(require(b, "max", path), path + ".max");
      if (lb.min_units > lb.max_units) {
        schema_error(path, "bad range: min exceeds max");
      }
      bounds.push_back(lb);
    }
    d.topology.layer_size_bounds = std::move(bounds);
  }

  const auto& hps = require(j, "hyperparams", "");
  if (!hps.is_array()) schema_error("hyperparams", "expected an array");
  for (std::size_t i = 0; i < hps.size(); ++i) {
    d.hyperparams.push_back(parse_hyperparam(hps[i], i));
  }

  const auto& io = require(j, "io_schema", "");
  if (!io.is_object()) schema_error("io_schema", "expected an object");
  d.io_schema.input_dim =
      parse_dim(require(io, "input_dim", "io_schema"), "io_schema.input_dim");
  d.io_schema.output_dim =
      parse_dim(require(io, "output_dim", "io_schema"), "io_schema.output_dim");
  return d;
}

ParadigmDescriptor parse_descriptor(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(e.byte > 0 ? e.byte - 1 : 0, "malformed paradigm document");
  }
  return from_json(j);
}

ordered_json to_json(const ParadigmDescriptor& d) {
  ordered_json j;
  j["id"] = d.id;
  j["name"] = d.name;
  j["version"] = d.version;
  j["description"] = d.description;
  ordered_json topo;
  topo["min_layers"] = d.topology.min_layers;
  topo["max_layers"] = d.topology.max_layers;
  topo["connectivity"] = "fully_connected";
  if (d.topology.layer_size_bounds) {
    ordered_json bounds = ordered_json::array();
    for (const auto& b : *d.topology.layer_size_bounds) {
      ordered_json jb;
      jb["min"] = b.min_units;
      jb["max"] = b.max_units;
      bounds.push_back(std::move(jb));
    }
    topo["layer_size_bounds"] = std::move(bounds);
  }
  j["topology"] = std::move(topo);
  ordered_json hps = ordered_json::array();
  for (const auto& h : d.hyperparams) hps.push_back(render_hyperparam(h));
  j["hyperparams"] = std::move(hps);
  ordered_json io;
  io["input_dim"] = render_dim(d.io_schema.input_dim);
  io["output_dim"] = render_dim(d.io_schema.output_dim);
  j["io_schema"] = std::move(io);
  j["engine_ref"] = d.engine_ref;
  return j;
}

std::vector<Violation> check_invariants(const ParadigmDescriptor& d) {
  std::vector<Violation> out;
  auto add = [&](std::string field, std::string msg) {
    out.push_back({std::move(field), std::move(msg)});
  };
  if (d.id.empty()) add("id", "must be non-empty");
  if (d.engine_ref.empty()) add("engine_ref", "must be non-empty");
  const auto& t = d.topology;
  if (t.min_layers < 2) add("topology.min_layers", "must be >= 2");
  if (t.max_layers < t.min_layers) {
    add("topology.max_layers", "must be >= min_layers");
  }
  if (t.layer_size_bounds) {
    if (static_cast<std::int64_t>(t.layer_size_bounds->size()) !=
        t.max_layers) {
      add("topology.layer_size_bounds", "needs one entry per layer");
    }
    for (std::size_t i = 0; i < t.layer_size_bounds->size(); ++i) {
      const auto& b = (*t.layer_size_bounds)[i];
      if (b.min_units < 1 || b.max_units < b.min_units) {
        add("topology.layer_size_bounds[" + std::to_string(i) + "]",
            "bounds must be positive with min <= max");
      }
    }
  }
  std::set<std::string> names;
  for (const auto& h : d.hyperparams) {
    const std::string field = "hyperparams." + h.name;
    if (h.name.empty()) add("hyperparams", "name must be non-empty");
    if (!names.insert(h.name).second) add(field, "duplicate name");
    switch (h.kind) {
      case HyperparamKind::enumeration: {
        const auto* def = std::get_if<std::string>(&h.default_value);
        if (!def) {
          add(field, "default must be one of the allowed values");
        } else if (std::find(h.allowed.begin(), h.allowed.end(), *def) ==
                   h.allowed.end()) {
          add(field, "range violation: default '" + *def +
                         "' is not an allowed value");
        }
        break;
      }
      case HyperparamKind::integer:
      case HyperparamKind::real: {
        const bool typed =
            h.kind == HyperparamKind::integer
                ? std::holds_alternative<std::int64_t>(h.min) &&
                      std::holds_alternative<std::int64_t>(h.max) &&
                      std::holds_alternative<std::int64_t>(h.default_value)
                : std::holds_alternative<double>(h.min) &&
                      std::holds_alternative<double>(h.max) &&
                      std::holds_alternative<double>(h.default_value);
        if (!typed) {
          add(field, "range and default must match the declared kind");
          break;
        }
        const double lo = as_double(h.min);
        const double hi = as_double(h.max);
        const double def = as_double(h.default_value);
        if (lo > hi) add(field, "range violation: min exceeds max");
        if (def < lo || def > hi) {
          add(field, "range violation: default " + value_text(h.default_value) +
                         " outside [" + value_text(h.min) + ", " +
                         value_text(h.max) + "]");
        }
        break;
      }
    }
  }
  if (d.io_schema.input_dim && *d.io_schema.input_dim < 1) {
    add("io_schema.input_dim", "fixed dimension must be >= 1");
  }
  if (d.io_schema.output_dim && *d.io_schema.output_dim < 1) {
    add("io_schema.output_dim", "fixed dimension must be >= 1");
  }
  return out;
}

std::vector<Violation> validate_descriptor(
    const ParadigmDescriptor& d,
    const std::vector<std::string>& known_engines) {
  auto out = check_invariants(d);
  if (!d.engine_ref.empty() &&
      std::find(known_engines.begin(), known_engines.end(), d.engine_ref) ==
          known_engines.end()) {
    out.push_back({"engine_ref", "unknown engine '" + d.engine_ref + "'"});
  }
  return out;
}

std::string render_descriptor(const ParadigmDescriptor& d) {
  if (auto v = check_invariants(d); !v.empty()) {
    throw Error(Errc::schema_violation,
                "cannot render invalid descriptor: " + v.front().field + ": " +
                    v.front().message);
  }
  return to_json(d).dump(2) + "\n";
}

Summary summarize_descriptor(const ParadigmDescriptor& d) {
  Summary s;
  s.name = d.name;
  s.version = d.version;
  s.engine_ref = d.engine_ref;
  const auto& t = d.topology;
  std::string layers = t.min_layers == t.max_layers
                           ? std::to_string(t.min_layers) + " layers"
                           : std::to_string(t.min_layers) + " to " +
                                 std::to_string(t.max_layers) + " layers";
  s.topology = layers + ", fully connected";
  for (const auto& h : d.hyperparams) {
    Summary::Row row;
    row.name = h.name;
    row.kind = std::string(kind_name(h.kind));
    if (h.kind == HyperparamKind::enumeration) {
      std::string values;
      for (const auto& a : h.allowed) {
        if (!values.empty()) values += ", ";
        values += a;
      }
      row.range = "{" + values + "}";
    } else {
      row.range = "[" + value_text(h.min) + ", " + value_text(h.max) + "]";
    }
    row.default_value = value_text(h.default_value);
    s.parameters.push_back(std::move(row));
  }
  return s;
}

std::string Summary::to_text() const {
  std::ostringstream os;
  os << name << " " << version << " (engine " << engine_ref << ")\n";
  os << "topology: " << topology << "\n";
  os << "parameters:\n";
  for (const auto& r : parameters) {
    os << "  " << r.name << "  " << r.kind << "  " << r.range << "  default "
       << r.default_value << "\n";
  }
  return os.str();
}

}  // namespace n2sky::paradigm
