#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "pvm/image.hpp"
#include "pvm/lockstep.hpp"
#include "pvm/topology.hpp"
#include "pvm/unit.hpp"

namespace pvm {

enum class Mode : std::uint8_t { training = 0, frozen = 1 };

// Whole-hierarchy model. weights/states are indexed by unit_id.
struct ModelState {
  ModelConfig config;
  LearningConfig learning;
  HierarchyTopology topology;
  std::vector<UnitWeights> weights;
  std::vector<UnitState> states;
  std::uint64_t frame_counter = 0;
  Mode mode = Mode::training;

  bool operator==(const ModelState&) const = default;
};

// Builds the topology for `config` and draws fresh weights from learning.seed.
ModelState make_model(const ModelConfig& config, const LearningConfig& learning);

struct StepOutput {
  Image prediction_map;  // view_w x view_h x 3, next-frame prediction of the input units
  Image error_map;       // (P* - P)^2 of the input units painted onto their tiles
  int hidden_dim = 0;
  std::vector<double> hidden;       // concatenated H of every unit, unit_id order
  std::vector<double> level_error;  // mean (P* - P)^2 per level

  bool operator==(const StepOutput&) const = default;
};

// Advances a ModelState one frame at a time. Each step runs three phases
// separated by barriers:
//   1. every unit gathers its signal (tile pixels or inferiors' hidden) and
//      context from the previous-step hidden snapshot, then updates features;
//   2. in training mode every unit takes an SGD step on the prediction it made
//      last step, then runs forward;
//   3. every unit publishes its new hidden state into the snapshot.
// Cross-unit reads only touch the snapshot, so the result does not depend on
// thread count or on the order units are visited within a phase.
//
// Not safe for concurrent step() calls.
class Engine {
 public:
  explicit Engine(unsigned threads = default_thread_count());

  unsigned threads() const { return pool_.threads(); }

  StepOutput step(ModelState& model, const Image& subframe);

  // Single-threaded reference: runs the same phases visiting units in the
  // given order. `order` must be a permutation of the unit ids.
  StepOutput step_in_order(ModelState& model, const Image& subframe, std::span<const int> order);

 private:
  StepOutput run(ModelState& model, const Image& subframe, std::span<const int> order,
                 bool parallel);

  LockstepPool pool_;
};

}  // namespace pvm
