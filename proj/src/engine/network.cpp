#include "engine/network.hpp"

#include <cmath>
#include <random>

#include "common/error.hpp"

namespace n2sky::engine {

std::string_view activation_name(Activation a) {
  return a == Activation::sigmoid ? "sigmoid" : "tanh";
}

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "tanh") return Activation::tanh;
  throw Error(Errc::invalid_argument,
              "unknown activation '" + std::string(name) + "'");
}

double activate(Activation a, double x) {
  if (a == Activation::sigmoid) return 1.0 / (1.0 + std::exp(-x));
  return std::tanh(x);
}

double activate_derivative(Activation a, double y) {
  if (a == Activation::sigmoid) return y * (1.0 - y);
  return 1.0 - y * y;
}

std::vector<Matrix> initial_weights(const std::vector<std::size_t>& layer_sizes,
                                    std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::vector<Matrix> weights;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    Matrix m(layer_sizes[l + 1], layer_sizes[l] + 1);
    for (auto& w : m.data) {
      // 53 random mantissa bits mapped onto [0, 1); independent of the
      // standard library's distribution implementation.
      const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
      w = u - 0.5;
    }
    weights.push_back(std::move(m));
  }
  return weights;
}

namespace {

void check_input(const NetworkObject& n, std::span<const double> input) {
  if (n.layer_sizes.size() < 2 || n.weights.size() + 1 != n.layer_sizes.size()) {
    throw Error(Errc::invalid_argument, "network object is malformed");
  }
  if (input.size() != n.layer_sizes.front()) {
    throw Error(Errc::dimension_mismatch,
                "input has dimension " + std::to_string(input.size()) +
                    ", network expects " +
                    std::to_string(n.layer_sizes.front()));
  }
}

// Activations of every layer, input layer first.
std::vector<Vector> forward_all(const NetworkObject& n,
                                std::span<const double> input) {
  std::vector<Vector> acts;
  acts.reserve(n.layer_sizes.size());
  acts.emplace_back(input.begin(), input.end());
  for (const auto& w : n.weights) {
    const Vector& prev = acts.back();
    Vector next(w.rows);
    for (std::size_t r = 0; r < w.rows; ++r) {
      double net = w(r, w.cols - 1);
      for (std::size_t c = 0; c + 1 < w.cols; ++c) net += w(r, c) * prev[c];
      next[r] = activate(n.activation, net);
    }
    acts.push_back(std::move(next));
  }
  return acts;
}

}  // namespace

Vector forward_pass(const NetworkObject& n, std::span<const double> input) {
  check_input(n, input);
  return forward_all(n, input).back();
}

std::vector<Matrix> compute_gradients(const NetworkObject& n,
                                      std::span<const double> input,
                                      std::span<const double> target) {
  check_input(n, input);
  if (target.size() != n.layer_sizes.back()) {
    throw Error(Errc::dimension_mismatch,
                "target has dimension " + std::to_string(target.size()) +
                    ", network produces " +
                    std::to_string(n.layer_sizes.back()));
  }
  const auto acts = forward_all(n, input);
  std::vector<Matrix> grads;
  grads.reserve(n.weights.size());
  for (const auto& w : n.weights) grads.emplace_back(w.rows, w.cols);

  // delta[j] = dE/dnet_j for the layer being processed.
  const Vector& out = acts.back();
  Vector delta(out.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    delta[j] = (out[j] - target[j]) * activate_derivative(n.activation, out[j]);
  }
  for (std::size_t l = n.weights.size(); l-- > 0;) {
    const Matrix& w = n.weights[l];
    const Vector& below = acts[l];
    Matrix& g = grads[l];
    for (std::size_t r = 0; r < w.rows; ++r) {
      for (std::size_t c = 0; c + 1 < w.cols; ++c) g(r, c) = delta[r] * below[c];
      g(r, w.cols - 1) = delta[r];
    }
    if (l == 0) break;
    Vector next(below.size(), 0.0);
    for (std::size_t c = 0; c < below.size(); ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < w.rows; ++r) s += w(r, c) * delta[r];
      next[c] = s * activate_derivative(n.activation, below[c]);
    }
    delta = std::move(next);
  }
  return grads;
}

void check_training_data(const NetworkObject& n, const PatternSet& data) {
  if (data.inputs.empty()) {
    throw Error(Errc::invalid_argument, "empty pattern set");
  }
  if (!data.targets) {
    throw Error(Errc::invalid_argument, "training requires target patterns");
  }
  if (data.targets->size() != data.inputs.size()) {
    throw Error(Errc::dimension_mismatch,
                "pattern set has " + std::to_string(data.inputs.size()) +
                    " inputs but " + std::to_string(data.targets->size()) +
                    " targets");
  }
  for (std::size_t p = 0; p < data.inputs.size(); ++p) {
    if (data.inputs[p].size() != n.layer_sizes.front() ||
        (*data.targets)[p].size() != n.layer_sizes.back()) {
      throw Error(Errc::dimension_mismatch,
                  "pattern " + std::to_string(p) +
                      " does not match the network's input/output layers");
    }
  }
}

double sum_squared_error(const NetworkObject& n, const PatternSet& data) {
  check_training_data(n, data);
  double sse = 0.0;
  for (std::size_t p = 0; p < data.inputs.size(); ++p) {
    const auto out = forward_pass(n, data.inputs[p]);
    const auto& t = (*data.targets)[p];
    for (std::size_t j = 0; j < out.size(); ++j) {
      const double e = out[j] - t[j];
      sse += e * e;
    }
  }
  return sse;
}

}  // namespace n2sky::engine
