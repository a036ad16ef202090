#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pvm/image.hpp"

namespace pvm {

// Dense row-major matrix. Only what the unit math needs.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> values;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), values(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  std::span<const double> row(int r) const {
    return {values.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
  }

  bool operator==(const Matrix&) const = default;
};

struct UnitSpec {
  int unit_id = 0;
  int level = 0;  // 0 = input level
  int signal_dim = 0;
  int hidden_dim = 0;
  int context_dim = 0;
  std::optional<Rect> tile;  // input level only

  // Width of the concatenated [P; D; I; E; C] input.
  int input_dim() const { return 4 * signal_dim + context_dim; }

  bool operator==(const UnitSpec&) const = default;
};

struct UnitWeights {
  Matrix hidden_w;                // hidden_dim x input_dim
  std::vector<double> hidden_b;   // hidden_dim
  Matrix predict_w;               // signal_dim x hidden_dim
  std::vector<double> predict_b;  // signal_dim

  bool operator==(const UnitWeights&) const = default;
};

struct UnitState {
  std::vector<double> signal;       // P_t
  std::vector<double> signal_prev;  // P_{t-1}
  std::vector<double> integral;     // I_t
  std::vector<double> derivative;   // D_{t/t-1}
  std::vector<double> error;        // E_t
  std::vector<double> context;      // C_{t-1}
  std::vector<double> hidden;       // H_t
  std::vector<double> prediction;   // P*_{t+1}
  std::vector<double> input_prev;   // full MLP input that produced `prediction`
  bool primed = false;              // has seen at least one signal

  bool operator==(const UnitState&) const = default;
};

struct LearningConfig {
  double learning_rate = 0.01;
  double tau_integral = 0.99;
  std::uint64_t seed = 1;

  bool operator==(const LearningConfig&) const = default;
};

// Zero-valued state sized for `spec`. Hidden starts at 0.5 = sigmoid(0).
UnitState make_unit_state(const UnitSpec& spec);

// Shifts the signal history and recomputes the integral, derivative and
// previous-error features from the newly arrived signal. The very first call
// seeds P_prev, P* and I with the signal itself, so D = E = 0.5.
void precompute_features(UnitState& state, std::span<const double> new_signal, double tau);

// H = sigmoid(W_h [P; D; I; E; C] + b_h), P* = sigmoid(W_p H + b_p).
// Records the concatenated input in input_prev. Throws NumericFault on a
// non-finite activation.
void forward(const UnitSpec& spec, const UnitWeights& weights, UnitState& state);

// Gradient of 0.5 * |P*(input_prev) - target|^2 with respect to every
// weight, laid out like the weights themselves.
UnitWeights loss_gradient(const UnitSpec& spec, const UnitWeights& weights,
                          std::span<const double> input, std::span<const double> target);

// One online SGD step on the prediction made from state.input_prev.
void train_step(const UnitSpec& spec, UnitWeights& weights, const UnitState& state,
                std::span<const double> target, double learning_rate);

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer, drawn from a stream
// derived from (master_seed, unit_id).
UnitWeights init_weights(const UnitSpec& spec, std::uint64_t master_seed);

double sigmoid(double x);

}  // namespace pvm
