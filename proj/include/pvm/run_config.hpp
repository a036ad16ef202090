#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "pvm/saccade.hpp"
#include "pvm/topology.hpp"
#include "pvm/unit.hpp"
#include "pvm/vision_io.hpp"

namespace pvm {

struct IoConfig {
  std::string frames;      // directory or RGB8 file; empty = synthesize the scenario
  std::string out = "out";
  std::string checkpoint;
};

struct ExperimentConfig {
  int n_trials = 100;
  std::uint64_t seed = 1;
  int train_frames = 1000;
  int progress_every = 100;
  Scenario scenario;
};

// Everything a CLI command can be configured with. Loaded from a flat INI
// file with [model], [learning], [saccade], [io] and [experiment] sections.
struct RunConfig {
  ModelConfig model;
  LearningConfig learning;
  SaccadeConfig saccade;
  IoConfig io;
  ExperimentConfig experiment;
};

// Parses the file on top of the defaults. Unknown sections or keys and
// malformed values throw ConfigError.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

// Range checks for every section; copies the view size into the saccade
// section. Paths are checked by the commands that use them.
void finalize(RunConfig& config);

}  // namespace pvm
