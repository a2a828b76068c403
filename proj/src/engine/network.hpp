#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace n2sky::engine {

enum class Activation { sigmoid, tanh };

std::string_view activation_name(Activation a);
Activation parse_activation(std::string_view name);

using Vector = std::vector<double>;

// Dense row-major matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const {
    return data[r * cols + c];
  }
  bool operator==(const Matrix&) const = default;
};

enum class NetworkState { untrained, trained };

// A fully connected feed-forward network. weights[l] maps layer l to layer
// l+1 and has shape layer_sizes[l+1] x (layer_sizes[l] + 1); the last column
// multiplies the always-1 bias input.
struct NetworkObject {
  std::string id;
  std::string paradigm_id;
  std::vector<std::size_t> layer_sizes;
  std::vector<Matrix> weights;
  Activation activation = Activation::sigmoid;
  NetworkState state = NetworkState::untrained;
  std::uint64_t seed = 0;
  bool operator==(const NetworkObject&) const = default;
};

struct TrainingParams {
  double learning_rate = 0.5;
  double momentum = 0.9;
  std::int64_t max_epochs = 20000;
  double target_error = 0.01;  // SSE threshold
  std::uint64_t seed = 0;
  bool operator==(const TrainingParams&) const = default;
};

struct PatternSet {
  std::vector<Vector> inputs;
  std::optional<std::vector<Vector>> targets;
  std::string provenance;
  // Provenance records where the data came from and is not part of equality.
  bool operator==(const PatternSet& o) const {
    return inputs == o.inputs && targets == o.targets;
  }
};

struct TrainingResult {
  std::string network_id;
  std::vector<Matrix> final_weights;
  std::vector<double> error_series;  // SSE per epoch
  std::int64_t epochs_run = 0;
  bool converged = false;
  double wall_time_ms = 0.0;
};

struct EvaluationResult {
  std::string network_id;
  std::vector<Vector> outputs;
  std::optional<std::vector<double>> per_pattern_error;
  std::string created_from;  // training result reference
};

// Called once per epoch with (epoch index, SSE at the start of that epoch).
using ProgressSink = std::function<void(std::int64_t, double)>;

// Error series shared between one training producer and any number of
// readers polling for progress.
class ProgressLog {
 public:
  void append(double sse) {
    std::lock_guard lock(mutex_);
    series_.push_back(sse);
  }
  std::vector<double> snapshot(std::size_t from = 0) const {
    std::lock_guard lock(mutex_);
    if (from >= series_.size()) return {};
    return {series_.begin() + static_cast<std::ptrdiff_t>(from), series_.end()};
  }
  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return series_.size();
  }
  ProgressSink sink() {
    return [this](std::int64_t, double sse) { append(sse); };
  }

 private:
  mutable std::mutex mutex_;
  std::vector<double> series_;
};

double activate(Activation a, double x);
// Derivative expressed through the activation's output value.
double activate_derivative(Activation a, double y);

// Uniform [-0.5, 0.5] initialisation, deterministic in `seed`.
std::vector<Matrix> initial_weights(const std::vector<std::size_t>& layer_sizes,
                                    std::uint64_t seed);

Vector forward_pass(const NetworkObject& n, std::span<const double> input);

// Gradient of 0.5 * sum((out - target)^2) with respect to every weight.
std::vector<Matrix> compute_gradients(const NetworkObject& n,
                                      std::span<const double> input,
                                      std::span<const double> target);

// Plain SSE, sum over patterns and outputs of (out - target)^2.
double sum_squared_error(const NetworkObject& n, const PatternSet& data);

void check_training_data(const NetworkObject& n, const PatternSet& data);

}  // namespace n2sky::engine
