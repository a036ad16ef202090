#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <span>
#include <vector>

#include "pvm/engine.hpp"
#include "pvm/image.hpp"

namespace pvm {

struct SaccadeConfig {
  double omega_dt = 0.8;        // forcing toward the fixation point
  double gamma = 0.9;           // damping, underdamped near 1
  double tau_threshold = 0.05;  // EMA rate of the max-error threshold
  int jitter = 1;               // fixational noise amplitude l, pixels
  int window_w = 3;
  int window_h = 3;
  int view_w = 32;
  int view_h = 32;
  std::uint64_t seed = 1;
};

void validate(const SaccadeConfig& config);

// Legal range of the view origin inside a frame: [0, max_x] x [0, max_y].
struct ViewLimits {
  int max_x = 0;
  int max_y = 0;
};

ViewLimits view_limits(int frame_w, int frame_h, int view_w, int view_h);

struct ViewState {
  int x = 0;  // current origin, frame coordinates
  int y = 0;
  int x_prev = 0;
  int y_prev = 0;
  int x_fix = 0;  // origin the oscillator is pulled toward
  int y_fix = 0;
  double threshold = 0.0;

  bool operator==(const ViewState&) const = default;
};

// View at rest at (x, y): no history, fixation on itself, zero threshold.
ViewState view_at(int x, int y);

struct WindowMax {
  double value = 0.0;
  int x = 0;  // top-left of the winning window, view-local
  int y = 0;
};

// Largest window_w x window_h total of the error map (all channels), stride 1.
// Ties go to the smallest y, then the smallest x.
WindowMax window_error_map(const Image& error_map, int window_w, int window_h);

// Retargets the fixation when `best` beats the threshold, then folds
// best.value into the threshold average.
ViewState update_fixation(const ViewState& view, const WindowMax& best,
                          const SaccadeConfig& config, ViewLimits limits);

// Round half away from zero.
int round_nearest(double v);

// One step of the damped oscillator on each axis, plus uniform jitter in
// [-jitter, jitter], clamped to the limits.
ViewState oscillator_step(const ViewState& view, const SaccadeConfig& config, ViewLimits limits,
                          std::mt19937_64& rng);

struct TrialRow {
  int frame = 0;
  int x = 0;
  int y = 0;
  int x_fix = 0;
  int y_fix = 0;
  double max_err = 0.0;
  double threshold = 0.0;

  bool operator==(const TrialRow&) const = default;
};

using TrialRecord = std::vector<TrialRow>;

// Owns the view and jitter stream of one saccading run.
class SaccadeController {
 public:
  SaccadeController(const SaccadeConfig& config, int frame_w, int frame_h, ViewState start);

  const ViewState& view() const { return view_; }
  ViewLimits limits() const { return limits_; }

  // Crops the current view from `frame`, steps the model, moves the view.
  // The returned row records the origin used for this frame. `last` receives
  // the engine output when non-null.
  TrialRow advance(Engine& engine, ModelState& model, const Image& frame, int frame_index,
                   StepOutput* last = nullptr);

 private:
  SaccadeConfig config_;
  ViewLimits limits_;
  ViewState view_;
  std::mt19937_64 rng_;
  int frame_w_;
  int frame_h_;
};

// Runs the controller over every frame. An empty sequence gives an empty record.
TrialRecord run_saccade_loop(Engine& engine, ModelState& model, std::span<const Image> frames,
                             const SaccadeConfig& config, ViewState start);

// Uniformly random legal origin drawn from `seed`, used to start trials.
ViewState random_start(std::uint64_t seed, ViewLimits limits);

// CSV with header frame,x,y,x_fix,y_fix,max_err,threshold.
void write_trial_csv(std::ostream& os, const TrialRecord& record);

}  // namespace pvm
