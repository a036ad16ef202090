#include "pvm/unit.hpp"

#include <cmath>
#include <random>
#include <string>

#include "pvm/errors.hpp"

namespace pvm {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

UnitState make_unit_state(const UnitSpec& spec) {
  const auto n = static_cast<std::size_t>(spec.signal_dim);
  UnitState s;
  s.signal.assign(n, 0.0);
  s.signal_prev.assign(n, 0.0);
  s.integral.assign(n, 0.0);
  s.derivative.assign(n, 0.5);
  s.error.assign(n, 0.5);
  s.context.assign(static_cast<std::size_t>(spec.context_dim), 0.5);
  s.hidden.assign(static_cast<std::size_t>(spec.hidden_dim), 0.5);
  s.prediction.assign(n, 0.0);
  return s;
}

void precompute_features(UnitState& state, std::span<const double> new_signal, double tau) {
  const std::size_t n = state.signal.size();
  if (new_signal.size() != n) {
    throw ConfigError("signal has " + std::to_string(new_signal.size()) +
                      " components, unit expects " + std::to_string(n));
  }
  if (!state.primed) {
    for (std::size_t i = 0; i < n; ++i) {
      state.signal[i] = new_signal[i];
      state.prediction[i] = new_signal[i];
      state.integral[i] = new_signal[i];
    }
    state.primed = true;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double p = new_signal[i];
    state.signal_prev[i] = state.signal[i];
    state.signal[i] = p;
    state.integral[i] = tau * state.integral[i] + (1.0 - tau) * p;
    state.derivative[i] = 0.5 + (p - state.signal_prev[i]) / 2.0;
    state.error[i] = 0.5 + (state.prediction[i] - p) / 2.0;
  }
}

namespace {

void check_finite(const std::vector<double>& v, int unit_id, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericFault(unit_id, std::string("non-finite ") + what);
  }
}

// Hidden and output activations for a given input.
void activate(const UnitWeights& w, std::span<const double> input, std::vector<double>& hidden,
              std::vector<double>& output) {
  const int nh = w.hidden_w.rows;
  const int ni = w.hidden_w.cols;
  hidden.resize(static_cast<std::size_t>(nh));
  for (int h = 0; h < nh; ++h) {
    const auto row = w.hidden_w.row(h);
    double z = w.hidden_b[h];
    for (int i = 0; i < ni; ++i) z += row[i] * input[i];
    hidden[h] = sigmoid(z);
  }
  const int no = w.predict_w.rows;
  output.resize(static_cast<std::size_t>(no));
  for (int o = 0; o < no; ++o) {
    const auto row = w.predict_w.row(o);
    double z = w.predict_b[o];
    for (int h = 0; h < nh; ++h) z += row[h] * hidden[h];
    output[o] = sigmoid(z);
  }
}

}  // namespace

void forward(const UnitSpec& spec, const UnitWeights& weights, UnitState& state) {
  auto& in = state.input_prev;
  in.clear();
  in.reserve(static_cast<std::size_t>(spec.input_dim()));
  in.insert(in.end(), state.signal.begin(), state.signal.end());
  in.insert(in.end(), state.derivative.begin(), state.derivative.end());
  in.insert(in.end(), state.integral.begin(), state.integral.end());
  in.insert(in.end(), state.error.begin(), state.error.end());
  in.insert(in.end(), state.context.begin(), state.context.end());
  if (static_cast<int>(in.size()) != weights.hidden_w.cols) {
    throw ConfigError("unit " + std::to_string(spec.unit_id) + ": input width " +
                      std::to_string(in.size()) + " does not match weights");
  }
  activate(weights, in, state.hidden, state.prediction);
  check_finite(state.hidden, spec.unit_id, "hidden activation");
  check_finite(state.prediction, spec.unit_id, "prediction");
}

UnitWeights loss_gradient(const UnitSpec& spec, const UnitWeights& weights,
                          std::span<const double> input, std::span<const double> target) {
  std::vector<double> hidden;
  std::vector<double> output;
  activate(weights, input, hidden, output);

  const int nh = weights.hidden_w.rows;
  const int ni = weights.hidden_w.cols;
  const int no = weights.predict_w.rows;
  if (static_cast<int>(target.size()) != no || static_cast<int>(input.size()) != ni) {
    throw ConfigError("unit " + std::to_string(spec.unit_id) + ": gradient shape mismatch");
  }

  UnitWeights g{Matrix(nh, ni), std::vector<double>(nh, 0.0), Matrix(no, nh),
                std::vector<double>(no, 0.0)};

  // Output layer delta: dL/dz_o = (y - t) * y * (1 - y).
  std::vector<double> delta_hidden(static_cast<std::size_t>(nh), 0.0);
  for (int o = 0; o < no; ++o) {
    const double y = output[o];
    const double d = (y - target[o]) * y * (1.0 - y);
    g.predict_b[o] = d;
    for (int h = 0; h < nh; ++h) {
      g.predict_w(o, h) = d * hidden[h];
      delta_hidden[h] += d * weights.predict_w(o, h);
    }
  }
  for (int h = 0; h < nh; ++h) {
    const double d = delta_hidden[h] * hidden[h] * (1.0 - hidden[h]);
    g.hidden_b[h] = d;
    for (int i = 0; i < ni; ++i) g.hidden_w(h, i) = d * input[i];
  }
  return g;
}

void train_step(const UnitSpec& spec, UnitWeights& weights, const UnitState& state,
                std::span<const double> target, double learning_rate) {
  if (learning_rate == 0.0) return;
  const UnitWeights g = loss_gradient(spec, weights, state.input_prev, target);
  auto descend = [learning_rate](std::vector<double>& w, const std::vector<double>& dw) {
    for (std::size_t i = 0; i < w.size(); ++i) w[i] -= learning_rate * dw[i];
  };
  descend(weights.hidden_w.values, g.hidden_w.values);
  descend(weights.hidden_b, g.hidden_b);
  descend(weights.predict_w.values, g.predict_w.values);
  descend(weights.predict_b, g.predict_b);
}

UnitWeights init_weights(const UnitSpec& spec, std::uint64_t master_seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                    static_cast<std::uint32_t>(master_seed >> 32),
                    static_cast<std::uint32_t>(spec.unit_id), 0x9e3779b9u};
  std::mt19937_64 rng(seq);

  UnitWeights w{Matrix(spec.hidden_dim, spec.input_dim()),
                std::vector<double>(static_cast<std::size_t>(spec.hidden_dim)),
                Matrix(spec.signal_dim, spec.hidden_dim),
                std::vector<double>(static_cast<std::size_t>(spec.signal_dim))};

  auto fill = [&rng](std::vector<double>& v, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& x : v) x = dist(rng);
  };
  fill(w.hidden_w.values, spec.input_dim());
  fill(w.hidden_b, spec.input_dim());
  fill(w.predict_w.values, spec.hidden_dim);
  fill(w.predict_b, spec.hidden_dim);
  return w;
}

}  // namespace pvm
