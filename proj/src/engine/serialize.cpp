#include "engine/serialize.hpp"

#include "common/error.hpp"

namespace n2sky::engine {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json weights_json(const std::vector<Matrix>& ws) {
  ordered_json out = ordered_json::array();
  for (const auto& m : ws) {
    ordered_json rows = ordered_json::array();
    for (std::size_t r = 0; r < m.rows; ++r) {
      ordered_json row = ordered_json::array();
      for (std::size_t c = 0; c < m.cols; ++c) row.push_back(m(r, c));
      rows.push_back(std::move(row));
    }
    out.push_back(std::move(rows));
  }
  return out;
}

std::vector<Matrix> weights_from(const json& j) {
  std::vector<Matrix> out;
  for (const auto& rows : j) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows[0].size() : 0;
    Matrix m(r, c);
    for (std::size_t i = 0; i < r; ++i) {
      if (rows[i].size() != c) {
        throw Error(Errc::schema_violation, "ragged weight matrix");
      }
      for (std::size_t k = 0; k < c; ++k) m(i, k) = rows[i][k].get<double>();
    }
    out.push_back(std::move(m));
  }
  return out;
}

ordered_json vectors_json(const std::vector<Vector>& vs) {
  ordered_json out = ordered_json::array();
  for (const auto& v : vs) out.push_back(v);
  return out;
}

std::vector<Vector> vectors_from(const json& j) {
  if (!j.is_array()) throw Error(Errc::schema_violation, "expected an array of vectors");
  std::vector<Vector> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_array()) throw Error(Errc::schema_violation, "expected a numeric vector");
    Vector vec;
    vec.reserve(v.size());
    for (const auto& x : v) {
      if (!x.is_number()) throw Error(Errc::schema_violation, "expected a number");
      vec.push_back(x.get<double>());
    }
    out.push_back(std::move(vec));
  }
  return out;
}

// Wraps nlohmann type errors so callers see one error category.
template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation,
                std::string("malformed ") + what + ": " + e.what());
  }
}

}  // namespace

ordered_json to_json(const NetworkObject& n) {
  ordered_json j;
  j["id"] = n.id;
  j["paradigm_id"] = n.paradigm_id;
  j["layer_sizes"] = n.layer_sizes;
  j["activation"] = activation_name(n.activation);
  j["state"] = n.state == NetworkState::trained ? "trained" : "untrained";
  j["seed"] = n.seed;
  j["weights"] = weights_json(n.weights);
  return j;
}

NetworkObject network_from_json(const json& j) {
  return guarded("network object", [&] {
    NetworkObject n;
    n.id = j.at("id").get<std::string>();
    n.paradigm_id = j.at("paradigm_id").get<std::string>();
    n.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    n.activation = parse_activation(j.at("activation").get<std::string>());
    const auto state = j.at("state").get<std::string>();
    if (state != "trained" && state != "untrained") {
      throw Error(Errc::schema_violation, "unknown network state '" + state + "'");
    }
    n.state = state == "trained" ? NetworkState::trained : NetworkState::untrained;
    n.seed = j.at("seed").get<std::uint64_t>();
    n.weights = weights_from(j.at("weights"));
    if (n.layer_sizes.size() < 2 || n.weights.size() + 1 != n.layer_sizes.size()) {
      throw Error(Errc::schema_violation, "weights do not match layer_sizes");
    }
    for (std::size_t l = 0; l < n.weights.size(); ++l) {
      if (n.weights[l].rows != n.layer_sizes[l + 1] ||
          n.weights[l].cols != n.layer_sizes[l] + 1) {
        throw Error(Errc::schema_violation,
                    "weight matrix " + std::to_string(l) + " has the wrong shape");
      }
    }
    return n;
  });
}

ordered_json to_json(const TrainingResult& r) {
  ordered_json j;
  j["network_id"] = r.network_id;
  j["epochs_run"] = r.epochs_run;
  j["converged"] = r.converged;
  j["final_sse"] = r.error_series.empty() ? json(nullptr) : json(r.error_series.back());
  j["wall_time_ms"] = r.wall_time_ms;
  j["error_series"] = r.error_series;
  j["final_weights"] = weights_json(r.final_weights);
  return j;
}

TrainingResult training_result_from_json(const json& j) {
  return guarded("training result", [&] {
    TrainingResult r;
    r.network_id = j.at("network_id").get<std::string>();
    r.epochs_run = j.at("epochs_run").get<std::int64_t>();
    r.converged = j.at("converged").get<bool>();
    r.wall_time_ms = j.value("wall_time_ms", 0.0);
    r.error_series = j.at("error_series").get<std::vector<double>>();
    r.final_weights = weights_from(j.at("final_weights"));
    return r;
  });
}

ordered_json to_json(const EvaluationResult& r) {
  ordered_json j;
  j["network_id"] = r.network_id;
  j["created_from"] = r.created_from;
  j["outputs"] = vectors_json(r.outputs);
  if (r.per_pattern_error) j["per_pattern_error"] = *r.per_pattern_error;
  return j;
}

EvaluationResult evaluation_result_from_json(const json& j) {
  return guarded("evaluation result", [&] {
    EvaluationResult r;
    r.network_id = j.at("network_id").get<std::string>();
    r.created_from = j.value("created_from", std::string{});
    r.outputs = vectors_from(j.at("outputs"));
    if (j.contains("per_pattern_error")) {
      r.per_pattern_error = j.at("per_pattern_error").get<std::vector<double>>();
    }
    return r;
  });
}

ordered_json to_json(const PatternSet& p) {
  ordered_json j;
  j["inputs"] = vectors_json(p.inputs);
  if (p.targets) j["targets"] = vectors_json(*p.targets);
  j["provenance"] = p.provenance;
  return j;
}

PatternSet pattern_set_from_json(const json& j) {
  return guarded("pattern set", [&] {
    PatternSet p;
    p.inputs = vectors_from(j.at("inputs"));
    if (j.contains("targets") && !j.at("targets").is_null()) {
      p.targets = vectors_from(j.at("targets"));
    }
    p.provenance = j.value("provenance", std::string{});
    return p;
  });
}

ordered_json to_json(const TrainingParams& p) {
  ordered_json j;
  j["learning_rate"] = p.learning_rate;
  j["momentum"] = p.momentum;
  j["max_epochs"] = p.max_epochs;
  j["target_error"] = p.target_error;
  j["seed"] = p.seed;
  return j;
}

TrainingParams training_params_from_json(const json& j) {
  return guarded("training params", [&] {
    TrainingParams p;
    p.learning_rate = j.value("learning_rate", p.learning_rate);
    p.momentum = j.value("momentum", p.momentum);
    p.max_epochs = j.value("max_epochs", p.max_epochs);
    p.target_error = j.value("target_error", p.target_error);
    p.seed = j.value("seed", p.seed);
    return p;
  });
}

}  // namespace n2sky::engine
