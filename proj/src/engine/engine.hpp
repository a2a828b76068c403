#pragma once

#include <memory>
#include <string>
#include <vector>

#include "engine/network.hpp"
#include "paradigm/paradigm.hpp"

namespace n2sky::engine {

// An executable paradigm implementation. Engines are stateless; all state
// lives in the NetworkObject passed to train().
class Engine {
 public:
  virtual ~Engine() = default;

  virtual std::string name() const = 0;

  // Throws Error(invalid_argument) when the engine cannot run this shape.
  virtual void check_topology(const std::vector<std::size_t>& layer_sizes) const;

  // Runs up to p.max_epochs epochs starting from n's current weights. Writes
  // the final weights back into n and marks it trained.
  virtual TrainingResult train(NetworkObject& n, const PatternSet& data,
                               const TrainingParams& p,
                               const ProgressSink& sink) const = 0;
};

// Batch gradient descent with momentum:
//   dw(t) = -learning_rate * grad E + momentum * dw(t-1)
class BackpropEngine final : public Engine {
 public:
  std::string name() const override { return "backprop"; }
  TrainingResult train(NetworkObject& n, const PatternSet& data,
                       const TrainingParams& p,
                       const ProgressSink& sink) const override;
};

// Single-layer perceptron trained pattern-by-pattern with the delta rule
// (w += lr * (t - y) * f'(net) * x, plus momentum).
class DeltaRuleEngine final : public Engine {
 public:
  std::string name() const override { return "delta-rule"; }
  void check_topology(const std::vector<std::size_t>& layer_sizes) const override;
  TrainingResult train(NetworkObject& n, const PatternSet& data,
                       const TrainingParams& p,
                       const ProgressSink& sink) const override;
};

std::vector<std::string> list_engines();

// Throws Error(not_found) for unknown names.
const Engine& find_engine(const std::string& name);

NetworkObject instantiate_network(const paradigm::ParadigmDescriptor& d,
                                  const std::vector<std::size_t>& layer_sizes,
                                  Activation activation, std::uint64_t seed,
                                  std::string id = {});

// Backprop training of an untrained or trained network.
TrainingResult train(NetworkObject& n, const PatternSet& data,
                     const TrainingParams& p, const ProgressSink& sink = {});

// Continue training a trained network; momentum history starts from zero.
TrainingResult retrain(NetworkObject& n, const PatternSet& data,
                       const TrainingParams& p, const ProgressSink& sink = {});

// Training dispatched through a named engine; retrain requires trained state.
TrainingResult run_training(const Engine& engine, NetworkObject& n,
                            const PatternSet& data, const TrainingParams& p,
                            const ProgressSink& sink, bool retrain);

EvaluationResult evaluate(const NetworkObject& n, const PatternSet& data,
                          std::string created_from = {});

}  // namespace n2sky::engine
