#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "pvm/engine.hpp"
#include "pvm/image.hpp"
#include "pvm/saccade.hpp"
#include "pvm/topology.hpp"

namespace pvm {

struct EntropyConfig {
  int disk_radius = 5;
  static constexpr int kBins = 256;
};

// Pixel offsets (dx, dy) with dx^2 + dy^2 <= radius^2, row-major.
std::vector<Point> disk_offsets(int radius);

// Per-pixel Shannon entropy (bits) of the 256-level histogram over a disk
// neighbourhood, summed over channels. The disk is clipped at the frame
// border and the histogram normalized over the pixels present.
// Returns a single-channel image.
Image local_entropy_map(const Image& frame, const EntropyConfig& config = {});

// Mean of the entropy map over the view rectangle.
double view_entropy(const Image& entropy_map, int x, int y, int view_w, int view_h);

// Time-average of view_entropy along a trial, one entropy map per frame.
double mean_view_entropy(std::span<const Image> entropy_maps, const TrialRecord& record,
                         int view_w, int view_h);

struct TrialSummary {
  ModelTag model = ModelTag::base;
  std::uint64_t seed = 0;
  double mean_view_entropy = 0.0;
};

struct DistributionStats {
  ModelTag model = ModelTag::base;
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct DensityBin {
  ModelTag model = ModelTag::base;
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

struct ComparisonResult {
  std::vector<TrialSummary> trials;  // grouped by model, in seed order
  std::vector<DistributionStats> stats;
  std::vector<DensityBin> density;
};

// Linear-interpolation quantile of a sample, q in [0, 1].
double quantile(std::vector<double> values, double q);

DistributionStats summarize(ModelTag model, std::span<const double> values);

struct ComparisonOptions {
  SaccadeConfig saccade;  // seed field is replaced per trial
  std::vector<std::uint64_t> seeds;
  int density_bins = 20;
  unsigned threads = 1;  // trials run concurrently, each with its own model copy
};

// Runs every model through the saccade loop once per seed in frozen mode and
// scores the time-averaged view entropy. Models must share the saccade view
// size. Output is independent of `threads`.
ComparisonResult run_comparison(std::span<const ModelState> models,
                                std::span<const Image> frames,
                                std::span<const Image> entropy_maps,
                                const ComparisonOptions& options);

// trials.csv: model,seed,mean_view_entropy
void write_trials_csv(std::ostream& os, const ComparisonResult& r);
// density.csv: model,bin_lo,bin_hi,count
void write_density_csv(std::ostream& os, const ComparisonResult& r);
// summary.csv: model,mean,median,q1,q3,n
void write_summary_csv(std::ostream& os, const ComparisonResult& r);

}  // namespace pvm
