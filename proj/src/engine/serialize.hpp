#pragma once

// JSON documents for engine objects. These are the archive payloads and the
// job wire format; doubles are written with round-trip precision.

#include <json.hpp>

#include "engine/network.hpp"

namespace n2sky::engine {

nlohmann::ordered_json to_json(const NetworkObject& n);
nlohmann::ordered_json to_json(const TrainingResult& r);
nlohmann::ordered_json to_json(const EvaluationResult& r);
nlohmann::ordered_json to_json(const PatternSet& p);
nlohmann::ordered_json to_json(const TrainingParams& p);

NetworkObject network_from_json(const nlohmann::json& j);
TrainingResult training_result_from_json(const nlohmann::json& j);
EvaluationResult evaluation_result_from_json(const nlohmann::json& j);
PatternSet pattern_set_from_json(const nlohmann::json& j);
TrainingParams training_params_from_json(const nlohmann::json& j);

}  // namespace n2sky::engine
