#include "pvm/cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "pvm/analysis.hpp"
#include "pvm/checkpoint.hpp"
#include "pvm/engine.hpp"
#include "pvm/errors.hpp"
#include "pvm/run_config.hpp"
#include "pvm/saccade.hpp"
#include "pvm/vision_io.hpp"

namespace fs = std::filesystem;

namespace pvm::cli {

namespace {

struct Options {
  std::string config;
  std::string model;
  std::string frames;
  std::vector<std::string> checkpoints;
  std::string out;
  std::optional<int> n_frames;
  std::optional<int> n_trials;
  std::optional<std::uint64_t> seed;
  bool trace = false;
  bool overlays = false;
  bool static_view = false;
  bool dump_topology = false;
  bool step_trace = false;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
  if (!o.model.empty()) {
    switch (parse_model_tag(o.model)) {
      case ModelTag::base: c.model.fovea = FoveaKind::none; break;
      case ModelTag::foveated: c.model.fovea = FoveaKind::central; break;
      case ModelTag::uhr: c.model.fovea = FoveaKind::full; break;
    }
  }
  if (!o.frames.empty()) c.io.frames = o.frames;
  if (!o.out.empty()) c.io.out = o.out;
  if (o.checkpoints.size() == 1) c.io.checkpoint = o.checkpoints.front();
  if (o.n_trials) c.experiment.n_trials = *o.n_trials;
  if (o.seed) {
    c.experiment.seed = *o.seed;
    c.learning.seed = *o.seed;
  }
  finalize(c);
  return c;
}

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  return os;
}

FrameSequence frames_for(const RunConfig& c) {
  if (c.io.frames.empty()) {
    FrameSequence seq = synth_video(c.experiment.scenario, c.experiment.seed);
    if (seq.empty()) throw ConfigError("the configured scenario has no frames");
    return seq;
  }
  if (!fs::exists(c.io.frames)) throw ConfigError("frames not found: " + c.io.frames);
  FrameSequence seq = load_sequence(c.io.frames);
  if (seq.empty()) throw DataError("no frames in " + c.io.frames);
  return seq;
}

ModelState checkpoint_for(const std::string& path) {
  if (path.empty()) throw ConfigError("--checkpoint is required");
  if (!fs::exists(path)) throw ConfigError("checkpoint not found: " + path);
  return load_checkpoint(path);
}

// Saccade settings from the run config, with the view taken from the model.
SaccadeConfig saccade_for(const RunConfig& c, const ModelState& m, std::uint64_t seed) {
  SaccadeConfig s = c.saccade;
  s.view_w = m.config.view_w;
  s.view_h = m.config.view_h;
  s.seed = seed;
  validate(s);
  return s;
}

void write_step_trace_header(std::ostream& os, std::size_t levels) {
  os << "frame";
  for (std::size_t l = 0; l < levels; ++l) os << ",level_" << l;
  os << '\n';
}

void write_step_trace_row(std::ostream& os, int frame, const StepOutput& s) {
  os << frame;
  for (double e : s.level_error) fmt::print(os, ",{}", e);
  os << '\n';
}

int cmd_build(const Options& o, std::ostream& out) {
  const RunConfig c = resolve(o);
  const ModelState m = make_model(c.model, c.learning);
  const fs::path dest = c.io.checkpoint.empty() ? fs::path(c.io.out) / "model.pvms"
                                                : fs::path(c.io.checkpoint);
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  save_checkpoint(m, dest);
  if (o.dump_topology) {
    auto os = open_output(fs::path(c.io.out) / "topology.txt");
    os << describe(m.topology);
  }
  fmt::print(out, "{} model: {} input units, {} units in {} levels -> {}\n",
             to_string(model_tag(c.model.fovea)), m.topology.input_unit_count(),
             m.topology.unit_count(), m.topology.levels.size(), dest.string());
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  const RunConfig c = resolve(o);
  ModelState m = checkpoint_for(c.io.checkpoint);
  const FrameSequence seq = frames_for(c);
  const int n_frames = o.n_frames.value_or(c.experiment.train_frames);
  if (n_frames < 0) throw ConfigError("--n-frames must be >= 0");
  const SaccadeConfig sc = saccade_for(c, m, c.experiment.seed);
  const ViewLimits limits = view_limits(seq.width(), seq.height(), sc.view_w, sc.view_h);

  m.mode = Mode::training;
  Engine engine;
  SaccadeController controller(sc, seq.width(), seq.height(),
                               random_start(c.experiment.seed, limits));
  const int fixed_x = limits.max_x / 2;
  const int fixed_y = limits.max_y / 2;

  const fs::path dir(c.io.out);
  auto progress = open_output(dir / "progress.csv");
  progress << "frame,mean_error\n";
  std::optional<std::ofstream> steps;
  if (o.step_trace) {
    steps = open_output(dir / "steps.csv");
    write_step_trace_header(*steps, m.topology.levels.size());
  }

  double window_sum = 0.0;
  int window_count = 0;
  StepOutput s;
  for (int f = 0; f < n_frames; ++f) {
    const Image& frame = seq.frames[static_cast<std::size_t>(f) % seq.size()];
    if (o.static_view) {
      s = engine.step(m, crop(frame, fixed_x, fixed_y, sc.view_w, sc.view_h));
    } else {
      controller.advance(engine, m, frame, f, &s);
    }
    if (steps) write_step_trace_row(*steps, f, s);
    window_sum += s.level_error.front();
    ++window_count;
    if (window_count == c.experiment.progress_every || f + 1 == n_frames) {
      fmt::print(progress, "{},{}\n", f + 1, window_sum / window_count);
      window_sum = 0.0;
      window_count = 0;
    }
  }

  const fs::path dest = dir / "trained.pvms";
  save_checkpoint(m, dest);
  fmt::print(out, "trained {} frames -> {}\n", n_frames, dest.string());
  return kOk;
}

void write_overlays(const fs::path& dir, std::span<const Image> frames, const TrialRecord& rec,
                    int view_w, int view_h) {
  fs::create_directories(dir);
  const double red[3] = {1.0, 0.0, 0.0};
  for (const TrialRow& r : rec) {
    const Image img = draw_rect(frames[static_cast<std::size_t>(r.frame)],
                                Rect{r.x, r.y, view_w, view_h}, red);
    write_png(img, dir / fmt::format("frame_{:05d}.png", r.frame));
  }
}

// Trajectory of view centres drawn over the frame.
Image draw_trajectory(const Image& frame, const TrialRecord& rec, int view_w, int view_h) {
  Image img = frame;
  auto plot = [&img](int x, int y) {
    if (x < 0 || y < 0 || x >= img.width() || y >= img.height()) return;
    img.at(x, y, 0) = 1.0;
    img.at(x, y, 1) = 0.0;
    img.at(x, y, 2) = 0.0;
  };
  for (std::size_t i = 1; i < rec.size(); ++i) {
    int x0 = rec[i - 1].x + view_w / 2, y0 = rec[i - 1].y + view_h / 2;
    const int x1 = rec[i].x + view_w / 2, y1 = rec[i].y + view_h / 2;
    // Bresenham
    const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int e = dx + dy;
    for (;;) {
      plot(x0, y0);
      if (x0 == x1 && y0 == y1) break;
      const int e2 = 2 * e;
      if (e2 >= dy) {
        e += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        e += dx;
        y0 += sy;
      }
    }
  }
  if (!rec.empty()) plot(rec.front().x + view_w / 2, rec.front().y + view_h / 2);
  return img;
}

int cmd_run(const Options& o, std::ostream& out) {
  const RunConfig c = resolve(o);
  ModelState m = checkpoint_for(c.io.checkpoint);
  m.mode = Mode::frozen;
  FrameSequence seq = frames_for(c);
  const SaccadeConfig sc = saccade_for(c, m, c.experiment.seed);
  const ViewLimits limits = view_limits(seq.width(), seq.height(), sc.view_w, sc.view_h);

  std::vector<Image> frames;
  ViewState start;
  if (o.trace) {
    const int n = o.n_frames.value_or(100);
    if (n < 0) throw ConfigError("--n-frames must be >= 0");
    frames.assign(static_cast<std::size_t>(n), seq.frames.front());
    start = view_at(limits.max_x / 2, limits.max_y / 2);
  } else {
    const std::size_t n = std::min<std::size_t>(
        seq.size(), o.n_frames ? static_cast<std::size_t>(std::max(0, *o.n_frames)) : seq.size());
    frames.assign(seq.frames.begin(), seq.frames.begin() + static_cast<std::ptrdiff_t>(n));
    start = random_start(c.experiment.seed, limits);
  }

  const fs::path dir(c.io.out);
  Engine engine;
  TrialRecord rec;
  std::optional<std::ofstream> steps;
  if (o.step_trace) {
    steps = open_output(dir / "steps.csv");
    write_step_trace_header(*steps, m.topology.levels.size());
  }
  if (!frames.empty()) {
    SaccadeController controller(sc, seq.width(), seq.height(), start);
    StepOutput s;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      rec.push_back(controller.advance(engine, m, frames[i], static_cast<int>(i), &s));
      if (steps) write_step_trace_row(*steps, static_cast<int>(i), s);
    }
  }

  {
    auto os = open_output(dir / (o.trace ? "trace.csv" : "trial.csv"));
    write_trial_csv(os, rec);
  }
  if (o.trace) {
    auto os = open_output(dir / "trajectory.csv");
    os << "frame,center_x,center_y\n";
    for (const TrialRow& r : rec) {
      fmt::print(os, "{},{},{}\n", r.frame, r.x + sc.view_w / 2, r.y + sc.view_h / 2);
    }
    write_png(draw_trajectory(seq.frames.front(), rec, sc.view_w, sc.view_h),
              dir / "trajectory.png");
  }
  if (o.overlays) write_overlays(dir / "overlays", frames, rec, sc.view_w, sc.view_h);
  fmt::print(out, "{} {} frames -> {}\n", o.trace ? "traced" : "ran", rec.size(), dir.string());
  return kOk;
}

int cmd_compare(const Options& o, std::ostream& out) {
  const RunConfig c = resolve(o);
  if (o.checkpoints.empty()) throw ConfigError("compare needs --checkpoint for each model");
  std::vector<ModelState> models;
  for (const auto& p : o.checkpoints) models.push_back(checkpoint_for(p));
  for (const ModelState& m : models) {
    if (m.config.view_w != models.front().config.view_w ||
        m.config.view_h != models.front().config.view_h) {
      throw ConfigError("checkpoints disagree on the view size");
    }
  }
  const FrameSequence seq = frames_for(c);
  const std::size_t n_frames =
      o.n_frames ? std::min<std::size_t>(seq.size(), static_cast<std::size_t>(std::max(0, *o.n_frames)))
                 : seq.size();
  const std::span<const Image> frames(seq.frames.data(), n_frames);

  std::vector<Image> entropy(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) entropy[i] = local_entropy_map(frames[i]);

  ComparisonOptions opts;
  opts.saccade = saccade_for(c, models.front(), c.experiment.seed);
  for (int i = 0; i < c.experiment.n_trials; ++i) opts.seeds.push_back(c.experiment.seed + i);
  opts.threads = default_thread_count();
  const ComparisonResult r = run_comparison(models, frames, entropy, opts);

  const fs::path dir(c.io.out);
  {
    auto os = open_output(dir / "trials.csv");
    write_trials_csv(os, r);
  }
  {
    auto os = open_output(dir / "density.csv");
    write_density_csv(os, r);
  }
  {
    auto os = open_output(dir / "summary.csv");
    write_summary_csv(os, r);
  }
  for (const DistributionStats& s : r.stats) {
    fmt::print(out, "{:9} mean {:.4f} median {:.4f} iqr [{:.4f}, {:.4f}] n {}\n",
               to_string(s.model), s.mean, s.median, s.q1, s.q3, s.n);
  }
  return kOk;
}

int cmd_synth(const Options& o, std::ostream& out) {
  RunConfig c = resolve(o);
  if (o.n_frames) c.experiment.scenario.n_frames = *o.n_frames;
  const FrameSequence seq = synth_video(c.experiment.scenario, c.experiment.seed);
  const fs::path dest = o.out.empty() ? fs::path("frames.rgb8") : fs::path(o.out);
  if (dest.has_parent_path()) fs::create_directories(dest.parent_path());
  write_rgb8(seq, dest);
  fmt::print(out, "{}: {} frames {}x{} -> {}\n", to_string(c.experiment.scenario.kind), seq.size(),
             seq.width(), seq.height(), dest.string());
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Predictive vision hierarchy with error-driven saccades"};
  app.require_subcommand(1);
  Options o;

  auto common = [&o](CLI::App* sub, const char* out_help = "output directory") {
    sub->add_option("--config", o.config, "INI run configuration")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, out_help);
    sub->add_option("--seed", o.seed, "experiment and weight seed");
  };
  auto frames_opt = [&o](CLI::App* sub) {
    sub->add_option("--frames", o.frames, "frame directory or RGB8 file");
  };

  auto* build = app.add_subcommand("build", "construct a model and write a fresh checkpoint");
  common(build);
  build->add_option("--model", o.model, "base, foveated or uhr");
  build->add_option("--checkpoint", o.checkpoints, "output checkpoint path");
  build->add_flag("--dump-topology", o.dump_topology, "write topology.txt to --out");

  auto* train = app.add_subcommand("train", "train a checkpoint on frames while saccading");
  common(train);
  frames_opt(train);
  train->add_option("--checkpoint", o.checkpoints, "input checkpoint");
  train->add_option("--n-frames", o.n_frames, "training frames (sequence is looped)");
  train->add_flag("--static-view", o.static_view, "train on a fixed central window");
  train->add_flag("--step-trace", o.step_trace, "write per-frame level errors to steps.csv");

  auto* runc = app.add_subcommand("run", "frozen saccade run, writes trial.csv");
  common(runc);
  frames_opt(runc);
  runc->add_option("--checkpoint", o.checkpoints, "model checkpoint");
  runc->add_option("--n-frames", o.n_frames, "frame limit, or trace length (default 100)");
  runc->add_flag("--trace", o.trace, "repeat the first frame and record the view trajectory");
  runc->add_flag("--overlays", o.overlays, "write frames with the view rectangle drawn");
  runc->add_flag("--step-trace", o.step_trace, "write per-frame level errors to steps.csv");

  auto* compare = app.add_subcommand("compare", "entropy comparison across checkpoints");
  common(compare);
  frames_opt(compare);
  compare->add_option("--checkpoint", o.checkpoints, "one per model")->required();
  compare->add_option("--n-trials", o.n_trials, "trials per model");
  compare->add_option("--n-frames", o.n_frames, "frame limit");

  auto* synth = app.add_subcommand("synth", "write the configured scenario as an RGB8 file");
  common(synth, "output RGB8 file (default frames.rgb8)");
  synth->add_option("--n-frames", o.n_frames, "frame count");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*build) return cmd_build(o, out);
    if (*train) return cmd_train(o, out);
    if (*runc) return cmd_run(o, out);
    if (*compare) return cmd_compare(o, out);
    if (*synth) return cmd_synth(o, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const NumericFault& e) {
    err << "numeric fault: " << e.what() << '\n';
    return kNumericFault;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const std::out_of_range& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsage;
}

}  // namespace pvm::cli
