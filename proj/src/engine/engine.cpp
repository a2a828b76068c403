#include "engine/engine.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>
#include <random>

#include "common/error.hpp"
#include "common/ids.hpp"

namespace n2sky::engine {

namespace {

void check_params(const TrainingParams& p) {
  if (!(p.learning_rate > 0.0)) {
    throw Error(Errc::invalid_argument, "learning_rate must be > 0");
  }
  if (!(p.momentum >= 0.0 && p.momentum < 1.0)) {
    throw Error(Errc::invalid_argument, "momentum must lie in [0, 1)");
  }
  if (p.max_epochs < 0) {
    throw Error(Errc::invalid_argument, "max_epochs must be non-negative");
  }
  if (!(p.target_error >= 0.0)) {
    throw Error(Errc::invalid_argument, "target_error must be >= 0");
  }
}

std::vector<Matrix> zeros_like(const std::vector<Matrix>& ws) {
  std::vector<Matrix> out;
  out.reserve(ws.size());
  for (const auto& w : ws) out.emplace_back(w.rows, w.cols);
  return out;
}

class Stopwatch {
 public:
  double elapsed_ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

TrainingResult finish(NetworkObject& n, std::vector<double> series,
                      bool converged, const Stopwatch& clock) {
  n.state = NetworkState::trained;
  TrainingResult r;
  r.network_id = n.id;
  r.final_weights = n.weights;
  r.epochs_run = static_cast<std::int64_t>(series.size());
  r.error_series = std::move(series);
  r.converged = converged;
  r.wall_time_ms = clock.elapsed_ms();
  return r;
}

}  // namespace

void Engine::check_topology(const std::vector<std::size_t>& layer_sizes) const {
  if (layer_sizes.size() < 2) {
    throw Error(Errc::invalid_argument, "a network needs at least 2 layers");
  }
}

TrainingResult BackpropEngine::train(NetworkObject& n, const PatternSet& data,
                                     const TrainingParams& p,
                                     const ProgressSink& sink) const {
  check_params(p);
  check_training_data(n, data);
  Stopwatch clock;
  std::vector<double> series;
  if (p.max_epochs == 0) {
    return finish(n, {}, sum_squared_error(n, data) <= p.target_error, clock);
  }

  auto velocity = zeros_like(n.weights);
  bool converged = false;
  for (std::int64_t epoch = 0; epoch < p.max_epochs; ++epoch) {
    auto grad = zeros_like(n.weights);
    double sse = 0.0;
    for (std::size_t k = 0; k < data.inputs.size(); ++k) {
      const auto& x = data.inputs[k];
      const auto& t = (*data.targets)[k];
      const auto out = forward_pass(n, x);
      for (std::size_t j = 0; j < out.size(); ++j) {
        const double e = out[j] - t[j];
        sse += e * e;
      }
      const auto g = compute_gradients(n, x, t);
      for (std::size_t l = 0; l < g.size(); ++l) {
        for (std::size_t i = 0; i < g[l].data.size(); ++i) {
          grad[l].data[i] += g[l].data[i];
        }
      }
    }
    series.push_back(sse);
    if (sink) sink(epoch, sse);
    if (sse <= p.target_error) {
      converged = true;
      break;
    }
    for (std::size_t l = 0; l < n.weights.size(); ++l) {
      auto& w = n.weights[l].data;
      auto& v = velocity[l].data;
      const auto& g = grad[l].data;
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = -p.learning_rate * g[i] + p.momentum * v[i];
        w[i] += v[i];
      }
    }
  }
  return finish(n, std::move(series), converged, clock);
}

void DeltaRuleEngine::check_topology(
    const std::vector<std::size_t>& layer_sizes) const {
  if (layer_sizes.size() != 2) {
    throw Error(Errc::invalid_argument,
                "delta-rule networks have exactly 2 layers (input, output)");
  }
}

TrainingResult DeltaRuleEngine::train(NetworkObject& n, const PatternSet& data,
                                      const TrainingParams& p,
                                      const ProgressSink& sink) const {
  check_params(p);
  check_topology(n.layer_sizes);
  check_training_data(n, data);
  Stopwatch clock;
  std::vector<double> series;
  if (p.max_epochs == 0) {
    return finish(n, {}, sum_squared_error(n, data) <= p.target_error, clock);
  }
  Matrix& w = n.weights.front();
  Matrix velocity(w.rows, w.cols);
  // Presentation order is reshuffled every epoch from the params seed.
  std::mt19937_64 gen(p.seed);
  std::vector<std::size_t> order(data.inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  bool converged = false;
  for (std::int64_t epoch = 0; epoch < p.max_epochs; ++epoch) {
    const double sse = sum_squared_error(n, data);
    series.push_back(sse);
    if (sink) sink(epoch, sse);
    if (sse <= p.target_error) {
      converged = true;
      break;
    }
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[gen() % i]);
    }
    for (const std::size_t k : order) {
      const auto& x = data.inputs[k];
      const auto& t = (*data.targets)[k];
      const auto y = forward_pass(n, x);
      for (std::size_t r = 0; r < w.rows; ++r) {
        const double delta =
            (t[r] - y[r]) * activate_derivative(n.activation, y[r]);
        for (std::size_t c = 0; c < w.cols; ++c) {
          const double xin = c + 1 < w.cols ? x[c] : 1.0;
          double& v = velocity(r, c);
          v = p.learning_rate * delta * xin + p.momentum * v;
          w(r, c) += v;
        }
      }
    }
  }
  return finish(n, std::move(series), converged, clock);
}

std::vector<std::string> list_engines() { return {"backprop", "delta-rule"}; }

const Engine& find_engine(const std::string& name) {
  static const BackpropEngine backprop;
  static const DeltaRuleEngine delta;
  if (name == backprop.name()) return backprop;
  if (name == delta.name()) return delta;
  throw Error(Errc::not_found, "no engine named '" + name + "'");
}

NetworkObject instantiate_network(const paradigm::ParadigmDescriptor& d,
                                  const std::vector<std::size_t>& layer_sizes,
                                  Activation activation, std::uint64_t seed,
                                  std::string id) {
  const auto& topo = d.topology;
  const auto count = static_cast<std::int64_t>(layer_sizes.size());
  if (count < topo.min_layers || count > topo.max_layers) {
    throw Error(Errc::invalid_argument,
                "paradigm '" + d.id + "' allows " +
                    std::to_string(topo.min_layers) + " to " +
                    std::to_string(topo.max_layers) + " layers, got " +
                    std::to_string(count));
  }
  for (std::size_t i = 0; i < layer_sizes.size(); ++i) {
    const auto units = static_cast<std::int64_t>(layer_sizes[i]);
    if (units < 1) {
      throw Error(Errc::invalid_argument, "layer sizes must be positive");
    }
    if (topo.layer_size_bounds && i < topo.layer_size_bounds->size()) {
      const auto& b = (*topo.layer_size_bounds)[i];
      if (units < b.min_units || units > b.max_units) {
        throw Error(Errc::invalid_argument,
                    "layer " + std::to_string(i) + " size " +
                        std::to_string(units) + " outside [" +
                        std::to_string(b.min_units) + ", " +
                        std::to_string(b.max_units) + "]");
      }
    }
  }
  // A declared activation enumeration restricts the choice; none means any.
  for (const auto& h : d.hyperparams) {
    if (h.name != "activation" || h.kind != paradigm::HyperparamKind::enumeration) continue;
    const std::string name(activation_name(activation));
    if (std::find(h.allowed.begin(), h.allowed.end(), name) == h.allowed.end()) {
      throw Error(Errc::invalid_argument,
                  "paradigm '" + d.id + "' does not allow activation '" + name + "'");
    }
  }
  if (d.io_schema.input_dim &&
      *d.io_schema.input_dim != static_cast<std::int64_t>(layer_sizes.front())) {
    throw Error(Errc::invalid_argument,
                "input layer must have " + std::to_string(*d.io_schema.input_dim) +
                    " units");
  }
  if (d.io_schema.output_dim &&
      *d.io_schema.output_dim != static_cast<std::int64_t>(layer_sizes.back())) {
    throw Error(Errc::invalid_argument,
                "output layer must have " +
                    std::to_string(*d.io_schema.output_dim) + " units");
  }
  find_engine(d.engine_ref).check_topology(layer_sizes);

  NetworkObject n;
  n.id = id.empty() ? make_id("net") : std::move(id);
  n.paradigm_id = d.id;
  n.layer_sizes = layer_sizes;
  n.weights = initial_weights(layer_sizes, seed);
  n.activation = activation;
  n.state = NetworkState::untrained;
  n.seed = seed;
  return n;
}

TrainingResult run_training(const Engine& engine, NetworkObject& n,
                            const PatternSet& data, const TrainingParams& p,
                            const ProgressSink& sink, bool retrain) {
  if (retrain && n.state != NetworkState::trained) {
    throw Error(Errc::failed_precondition,
                "retrain requires a trained network; '" + n.id +
                    "' is untrained");
  }
  return engine.train(n, data, p, sink);
}

TrainingResult train(NetworkObject& n, const PatternSet& data,
                     const TrainingParams& p, const ProgressSink& sink) {
  return run_training(find_engine("backprop"), n, data, p, sink, false);
}

TrainingResult retrain(NetworkObject& n, const PatternSet& data,
                       const TrainingParams& p, const ProgressSink& sink) {
  return run_training(find_engine("backprop"), n, data, p, sink, true);
}

EvaluationResult evaluate(const NetworkObject& n, const PatternSet& data,
                          std::string created_from) {
  if (n.state != NetworkState::trained) {
    throw Error(Errc::failed_precondition,
                "cannot evaluate untrained network '" + n.id + "'");
  }
  if (data.targets && data.targets->size() != data.inputs.size()) {
    throw Error(Errc::dimension_mismatch,
                "inputs and targets differ in length");
  }
  EvaluationResult r;
  r.network_id = n.id;
  r.created_from = std::move(created_from);
  r.outputs.reserve(data.inputs.size());
  for (const auto& x : data.inputs) r.outputs.push_back(forward_pass(n, x));
  if (data.targets) {
    std::vector<double> errs;
    errs.reserve(r.outputs.size());
    for (std::size_t p = 0; p < r.outputs.size(); ++p) {
      const auto& t = (*data.targets)[p];
      if (t.size() != r.outputs[p].size()) {
        throw Error(Errc::dimension_mismatch,
                    "target " + std::to_string(p) + " has wrong dimension");
      }
      double e = 0.0;
      for (std::size_t j = 0; j < t.size(); ++j) {
        const double d = r.outputs[p][j] - t[j];
        e += d * d;
      }
      errs.push_back(e);
    }
    r.per_pattern_error = std::move(errs);
  }
  return r;
}

}  // namespace n2sky::engine
