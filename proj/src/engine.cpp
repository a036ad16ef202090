#include "pvm/engine.hpp"

#include <exception>
#include <numeric>
#include <string>

#include "pvm/errors.hpp"

namespace pvm {

ModelState make_model(const ModelConfig& config, const LearningConfig& learning) {
  if (!(learning.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (!(learning.tau_integral >= 0.0 && learning.tau_integral <= 1.0)) {
    throw ConfigError("tau_integral must lie in [0, 1]");
  }
  ModelState m;
  m.config = config;
  m.learning = learning;
  m.topology = build_topology(config);
  m.weights.reserve(m.topology.units.size());
  m.states.reserve(m.topology.units.size());
  for (const UnitSpec& spec : m.topology.units) {
    m.weights.push_back(init_weights(spec, learning.seed));
    m.states.push_back(make_unit_state(spec));
  }
  return m;
}

Engine::Engine(unsigned threads) : pool_(threads) {}

StepOutput Engine::step(ModelState& model, const Image& subframe) {
  return run(model, subframe, {}, true);
}

StepOutput Engine::step_in_order(ModelState& model, const Image& subframe,
                                 std::span<const int> order) {
  std::vector<bool> seen(model.topology.units.size(), false);
  bool ok = order.size() == seen.size();
  for (std::size_t i = 0; ok && i < order.size(); ++i) {
    const int id = order[i];
    ok = id >= 0 && static_cast<std::size_t>(id) < seen.size() && !seen[id];
    if (ok) seen[id] = true;
  }
  if (!ok) throw ConfigError("execution order must list every unit exactly once");
  return run(model, subframe, order, false);
}

StepOutput Engine::run(ModelState& model, const Image& subframe, std::span<const int> order,
                       bool parallel) {
  const ModelConfig& cfg = model.config;
  if (subframe.width() != cfg.view_w || subframe.height() != cfg.view_h ||
      subframe.channels() != 3) {
    throw ConfigError("subframe is " + std::to_string(subframe.width()) + "x" +
                      std::to_string(subframe.height()) + "x" +
                      std::to_string(subframe.channels()) + ", model view is " +
                      std::to_string(cfg.view_w) + "x" + std::to_string(cfg.view_h) + "x3");
  }

  const HierarchyTopology& topo = model.topology;
  const std::size_t n = topo.units.size();
  const bool training = model.mode == Mode::training;
  const double tau = model.learning.tau_integral;
  const double lr = model.learning.learning_rate;

  std::vector<std::vector<double>> incoming(n);
  std::vector<std::vector<double>> sq_error(n);
  std::vector<std::exception_ptr> faults(n);

  StepOutput out;
  out.prediction_map = Image(cfg.view_w, cfg.view_h, 3);
  out.error_map = Image(cfg.view_w, cfg.view_h, 3);
  out.hidden_dim = cfg.hidden_dim;
  out.hidden.assign(n * static_cast<std::size_t>(cfg.hidden_dim), 0.0);

  auto unit_at = [&](std::size_t i) -> int {
    return order.empty() ? static_cast<int>(i) : order[i];
  };

  auto guarded = [&](int id, auto&& body) {
    if (faults[id]) return;
    try {
      body();
    } catch (...) {
      faults[id] = std::current_exception();
    }
  };

  // Phase 1: read the previous-step snapshot, update features.
  auto gather = [&](std::size_t i) {
    const int id = unit_at(i);
    guarded(id, [&] {
      const UnitSpec& spec = topo.units[id];
      UnitState& st = model.states[id];
      std::vector<double>& sig = incoming[id];
      sig.clear();
      sig.reserve(static_cast<std::size_t>(spec.signal_dim));
      if (spec.tile) {
        const Rect& r = *spec.tile;
        for (int y = r.y; y < r.y + r.h; ++y)
          for (int x = r.x; x < r.x + r.w; ++x)
            for (int c = 0; c < 3; ++c) sig.push_back(subframe.at(x, y, c));
      } else {
        for (int src : topo.inferior[id]) {
          const auto& h = model.states[src].hidden;
          sig.insert(sig.end(), h.begin(), h.end());
        }
      }
      std::size_t k = 0;
      for (int src : context_layout(topo, id)) {
        for (double v : model.states[src].hidden) st.context[k++] = v;
      }
      precompute_features(st, sig, tau);
      auto& err = sq_error[id];
      err.resize(st.signal.size());
      for (std::size_t j = 0; j < err.size(); ++j) {
        const double d = st.prediction[j] - st.signal[j];
        err[j] = d * d;
      }
    });
  };

  // Phase 2: learn from last step's prediction, then predict the next signal.
  auto predict = [&](std::size_t i) {
    const int id = unit_at(i);
    guarded(id, [&] {
      const UnitSpec& spec = topo.units[id];
      UnitState& st = model.states[id];
      if (training && !st.input_prev.empty()) {
        train_step(spec, model.weights[id], st, st.signal, lr);
      }
      forward(spec, model.weights[id], st);
    });
  };

  // Phase 3: publish hidden state and the input-level maps.
  auto publish = [&](std::size_t i) {
    const int id = unit_at(i);
    guarded(id, [&] {
      const UnitSpec& spec = topo.units[id];
      const UnitState& st = model.states[id];
      std::copy(st.hidden.begin(), st.hidden.end(),
                out.hidden.begin() + static_cast<std::ptrdiff_t>(id) * cfg.hidden_dim);
      if (!spec.tile) return;
      const Rect& r = *spec.tile;
      std::size_t k = 0;
      for (int y = r.y; y < r.y + r.h; ++y)
        for (int x = r.x; x < r.x + r.w; ++x)
          for (int c = 0; c < 3; ++c, ++k) {
            out.prediction_map.at(x, y, c) = st.prediction[k];
            out.error_map.at(x, y, c) = sq_error[id][k];
          }
    });
  };

  const LockstepPool::Phase phases[] = {gather, predict, publish};
  if (parallel) {
    pool_.run(n, phases);
  } else {
    for (const auto& phase : phases)
      for (std::size_t i = 0; i < n; ++i) phase(i);
  }

  for (const auto& f : faults) {
    if (f) std::rethrow_exception(f);
  }

  out.level_error.reserve(topo.levels.size());
  for (const LevelInfo& level : topo.levels) {
    double sum = 0.0;
    std::size_t count = 0;
    for (int id : level.unit_ids) {
      for (double e : sq_error[id]) sum += e;
      count += sq_error[id].size();
    }
    out.level_error.push_back(count ? sum / static_cast<double>(count) : 0.0);
  }
  ++model.frame_counter;
  return out;
}

}  // namespace pvm
