#include "pvm/saccade.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>

#include "pvm/errors.hpp"
#include "pvm/vision_io.hpp"

namespace pvm {

void validate(const SaccadeConfig& c) {
  if (!(c.omega_dt > 0.0)) throw ConfigError("omega_dt must be > 0");
  if (!(c.gamma > 0.0)) throw ConfigError("gamma must be > 0");
  if (!(c.tau_threshold >= 0.0 && c.tau_threshold <= 1.0)) {
    throw ConfigError("tau_threshold must lie in [0, 1]");
  }
  if (c.jitter < 0) throw ConfigError("jitter must be >= 0");
  if (c.window_w < 1 || c.window_h < 1) throw ConfigError("window must be at least 1x1");
  if (c.window_w > c.view_w || c.window_h > c.view_h) {
    throw ConfigError("error window " + std::to_string(c.window_w) + "x" +
                      std::to_string(c.window_h) + " does not fit the view");
  }
}

ViewLimits view_limits(int frame_w, int frame_h, int view_w, int view_h) {
  if (frame_w < view_w || frame_h < view_h) {
    throw DataError("frame " + std::to_string(frame_w) + "x" + std::to_string(frame_h) +
                    " is smaller than the " + std::to_string(view_w) + "x" +
                    std::to_string(view_h) + " view");
  }
  return {frame_w - view_w, frame_h - view_h};
}

ViewState view_at(int x, int y) { return {x, y, x, y, x, y, 0.0}; }

WindowMax window_error_map(const Image& error_map, int window_w, int window_h) {
  const int w = error_map.width();
  const int h = error_map.height();
  if (window_w < 1 || window_h < 1 || window_w > w || window_h > h) {
    throw ConfigError("error window does not fit the error map");
  }
  // Channel totals per pixel, then a vertical and a horizontal box sum.
  std::vector<double> pixel(static_cast<std::size_t>(w) * h, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int c = 0; c < error_map.channels(); ++c) s += error_map.at(x, y, c);
      pixel[static_cast<std::size_t>(y) * w + x] = s;
    }
  const int rows = h - window_h + 1;
  const int cols = w - window_w + 1;
  std::vector<double> column(static_cast<std::size_t>(rows) * w, 0.0);
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int dy = 0; dy < window_h; ++dy) s += pixel[static_cast<std::size_t>(y + dy) * w + x];
      column[static_cast<std::size_t>(y) * w + x] = s;
    }
  WindowMax best{-1.0, 0, 0};
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      double s = 0.0;
      for (int dx = 0; dx < window_w; ++dx) s += column[static_cast<std::size_t>(y) * w + x + dx];
      if (s > best.value) best = {s, x, y};
    }
  return best;
}

ViewState update_fixation(const ViewState& view, const WindowMax& best,
                          const SaccadeConfig& config, ViewLimits limits) {
  ViewState next = view;
  if (best.value > view.threshold) {
    const int cx = best.x + config.window_w / 2;
    const int cy = best.y + config.window_h / 2;
    next.x_fix = std::clamp(view.x + cx - config.view_w / 2, 0, limits.max_x);
    next.y_fix = std::clamp(view.y + cy - config.view_h / 2, 0, limits.max_y);
  }
  next.threshold =
      (1.0 - config.tau_threshold) * view.threshold + config.tau_threshold * best.value;
  return next;
}

int round_nearest(double v) { return static_cast<int>(std::round(v)); }

ViewState oscillator_step(const ViewState& view, const SaccadeConfig& config, ViewLimits limits,
                          std::mt19937_64& rng) {
  const double a = config.omega_dt;
  const double denom = 1.0 + config.gamma * a;
  auto axis = [&](int now, int prev, int fix) {
    return round_nearest(((2.0 - a * a) * now + (config.gamma * a - 1.0) * prev + a * a * fix) /
                         denom);
  };
  std::uniform_int_distribution<int> jitter(-config.jitter, config.jitter);
  int x_new = axis(view.x, view.x_prev, view.x_fix);
  int y_new = axis(view.y, view.y_prev, view.y_fix);
  if (config.jitter > 0) {
    x_new += jitter(rng);
    y_new += jitter(rng);
  }
  ViewState next = view;
  next.x_prev = view.x;
  next.y_prev = view.y;
  next.x = std::clamp(x_new, 0, limits.max_x);
  next.y = std::clamp(y_new, 0, limits.max_y);
  return next;
}

SaccadeController::SaccadeController(const SaccadeConfig& config, int frame_w, int frame_h,
                                     ViewState start)
    : config_(config),
      limits_(view_limits(frame_w, frame_h, config.view_w, config.view_h)),
      view_(start),
      rng_(config.seed),
      frame_w_(frame_w),
      frame_h_(frame_h) {
  validate(config_);
  const auto inside = [this](int x, int y) {
    return x >= 0 && y >= 0 && x <= limits_.max_x && y <= limits_.max_y;
  };
  if (!inside(view_.x, view_.y) || !inside(view_.x_prev, view_.y_prev) ||
      !inside(view_.x_fix, view_.y_fix)) {
    throw ConfigError("initial view lies outside the frame");
  }
}

TrialRow SaccadeController::advance(Engine& engine, ModelState& model, const Image& frame,
                                    int frame_index, StepOutput* last) {
  if (frame.width() != frame_w_ || frame.height() != frame_h_) {
    throw DataError("frame " + std::to_string(frame_index) + " changes size mid-sequence");
  }
  const Image sub = crop(frame, view_.x, view_.y, config_.view_w, config_.view_h);
  StepOutput out = engine.step(model, sub);
  const WindowMax best = window_error_map(out.error_map, config_.window_w, config_.window_h);

  TrialRow row{frame_index, view_.x, view_.y, 0, 0, best.value, 0.0};
  view_ = update_fixation(view_, best, config_, limits_);
  row.x_fix = view_.x_fix;
  row.y_fix = view_.y_fix;
  row.threshold = view_.threshold;
  view_ = oscillator_step(view_, config_, limits_, rng_);
  if (last) *last = std::move(out);
  return row;
}

TrialRecord run_saccade_loop(Engine& engine, ModelState& model, std::span<const Image> frames,
                             const SaccadeConfig& config, ViewState start) {
  TrialRecord record;
  if (frames.empty()) return record;
  SaccadeController controller(config, frames[0].width(), frames[0].height(), start);
  record.reserve(frames.size());
  for (std::size_t i = 0; i < frames.size(); ++i) {
    record.push_back(controller.advance(engine, model, frames[i], static_cast<int>(i)));
  }
  return record;
}

ViewState random_start(std::uint64_t seed, ViewLimits limits) {
  std::mt19937_64 rng(seed ^ 0x5deece66dULL);
  std::uniform_int_distribution<int> ux(0, limits.max_x);
  std::uniform_int_distribution<int> uy(0, limits.max_y);
  const int x = ux(rng);
  const int y = uy(rng);
  return view_at(x, y);
}

void write_trial_csv(std::ostream& os, const TrialRecord& record) {
  os << "frame,x,y,x_fix,y_fix,max_err,threshold\n";
  for (const TrialRow& r : record) {
    fmt::print(os, "{},{},{},{},{},{},{}\n", r.frame, r.x, r.y, r.x_fix, r.y_fix, r.max_err,
               r.threshold);
  }
}

}  // namespace pvm
