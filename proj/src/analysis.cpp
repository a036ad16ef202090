#include "pvm/analysis.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <ostream>
#include <thread>

#include "pvm/errors.hpp"
#include "pvm/vision_io.hpp"

namespace pvm {

std::vector<Point> disk_offsets(int radius) {
  std::vector<Point> out;
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx)
      if (dx * dx + dy * dy <= radius * radius) out.push_back({dx, dy});
  return out;
}

namespace {

double histogram_entropy(const std::vector<int>& hist, int total) {
  double s = 0.0;
  for (int count : hist) {
    if (count == 0) continue;
    const double p = static_cast<double>(count) / total;
    s -= p * std::log2(p);
  }
  return s;
}

}  // namespace

Image local_entropy_map(const Image& frame, const EntropyConfig& config) {
  const int r = config.disk_radius;
  if (r < 1) throw ConfigError("disk_radius must be >= 1");
  const int w = frame.width();
  const int h = frame.height();

  // Half-width of the disk on each row offset dy.
  std::vector<int> span(static_cast<std::size_t>(2 * r + 1));
  for (int dy = -r; dy <= r; ++dy) {
    span[dy + r] = static_cast<int>(std::floor(std::sqrt(static_cast<double>(r * r - dy * dy))));
  }

  std::vector<std::uint8_t> levels(frame.data().size());
  std::transform(frame.data().begin(), frame.data().end(), levels.begin(), to_byte);
  const int nc = frame.channels();
  auto level = [&](int x, int y, int c) {
    return levels[(static_cast<std::size_t>(y) * w + x) * nc + c];
  };

  std::vector<std::vector<double>> per_channel(
      static_cast<std::size_t>(nc), std::vector<double>(static_cast<std::size_t>(w) * h, 0.0));
  std::vector<int> hist(EntropyConfig::kBins);

  // Sliding histogram along each row: moving right drops the left rim of the
  // disk and adds the right rim.
  for (int c = 0; c < nc; ++c) {
    for (int y = 0; y < h; ++y) {
      std::fill(hist.begin(), hist.end(), 0);
      int total = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= h) continue;
        for (int xx = std::max(0, -span[dy + r]); xx <= std::min(w - 1, span[dy + r]); ++xx) {
          ++hist[level(xx, yy, c)];
          ++total;
        }
      }
      per_channel[c][static_cast<std::size_t>(y) * w] = histogram_entropy(hist, total);
      for (int x = 1; x < w; ++x) {
        for (int dy = -r; dy <= r; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= h) continue;
          const int out_x = x - 1 - span[dy + r];
          const int in_x = x + span[dy + r];
          if (out_x >= 0) {
            --hist[level(out_x, yy, c)];
            --total;
          }
          if (in_x < w) {
            ++hist[level(in_x, yy, c)];
            ++total;
          }
        }
        per_channel[c][static_cast<std::size_t>(y) * w + x] = histogram_entropy(hist, total);
      }
    }
  }

  Image out(w, h, 1);
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    double s = 0.0;
    for (int c = 0; c < nc; ++c) s += per_channel[c][i];
    out.data()[i] = s;
  }
  return out;
}

double view_entropy(const Image& entropy_map, int x, int y, int view_w, int view_h) {
  if (x < 0 || y < 0 || view_w < 1 || view_h < 1 || x + view_w > entropy_map.width() ||
      y + view_h > entropy_map.height()) {
    throw std::out_of_range("view rectangle leaves the entropy map");
  }
  double s = 0.0;
  for (int r = y; r < y + view_h; ++r)
    for (int c = x; c < x + view_w; ++c) s += entropy_map.at(c, r);
  return s / (static_cast<double>(view_w) * view_h);
}

double mean_view_entropy(std::span<const Image> entropy_maps, const TrialRecord& record,
                         int view_w, int view_h) {
  if (record.empty()) return 0.0;
  double s = 0.0;
  for (const TrialRow& row : record) {
    s += view_entropy(entropy_maps[static_cast<std::size_t>(row.frame)], row.x, row.y, view_w,
                      view_h);
  }
  return s / static_cast<double>(record.size());
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

DistributionStats summarize(ModelTag model, std::span<const double> values) {
  DistributionStats s;
  s.model = model;
  s.n = values.size();
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(s.n);
  const std::vector<double> v(values.begin(), values.end());
  s.median = quantile(v, 0.5);
  s.q1 = quantile(v, 0.25);
  s.q3 = quantile(v, 0.75);
  return s;
}

ComparisonResult run_comparison(std::span<const ModelState> models,
                                std::span<const Image> frames,
                                std::span<const Image> entropy_maps,
                                const ComparisonOptions& options) {
  ComparisonResult result;
  const SaccadeConfig& sc = options.saccade;
  for (const ModelState& m : models) {
    if (m.config.view_w != sc.view_w || m.config.view_h != sc.view_h) {
      throw ConfigError("model view " + std::to_string(m.config.view_w) + "x" +
                        std::to_string(m.config.view_h) + " differs from the configured view " +
                        std::to_string(sc.view_w) + "x" + std::to_string(sc.view_h));
    }
  }
  if (entropy_maps.size() != frames.size()) {
    throw ConfigError("need one entropy map per frame");
  }
  const std::size_t n_seeds = options.seeds.size();
  if (n_seeds == 0 || models.empty()) return result;

  const ViewLimits limits = view_limits(frames.empty() ? 0 : frames[0].width(),
                                        frames.empty() ? 0 : frames[0].height(), sc.view_w,
                                        sc.view_h);

  const std::size_t n_tasks = models.size() * n_seeds;
  result.trials.resize(n_tasks);
  std::vector<std::exception_ptr> faults(n_tasks);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    Engine engine(1);
    for (std::size_t t; (t = next.fetch_add(1)) < n_tasks;) {
      try {
        const ModelState& proto = models[t / n_seeds];
        const std::uint64_t seed = options.seeds[t % n_seeds];
        ModelState model = proto;
        model.mode = Mode::frozen;
        SaccadeConfig cfg = sc;
        cfg.seed = seed;
        const TrialRecord rec =
            run_saccade_loop(engine, model, frames, cfg, random_start(seed, limits));
        result.trials[t] = {model_tag(proto.config.fovea), seed,
                            mean_view_entropy(entropy_maps, rec, sc.view_w, sc.view_h)};
      } catch (...) {
        faults[t] = std::current_exception();
      }
    }
  };
  {
    const unsigned n_threads =
        std::max(1u, std::min<unsigned>(options.threads, static_cast<unsigned>(n_tasks)));
    std::vector<std::jthread> pool;
    for (unsigned i = 1; i < n_threads; ++i) pool.emplace_back(worker);
    worker();
  }
  for (const auto& f : faults)
    if (f) std::rethrow_exception(f);

  double lo = result.trials.front().mean_view_entropy;
  double hi = lo;
  for (const TrialSummary& t : result.trials) {
    lo = std::min(lo, t.mean_view_entropy);
    hi = std::max(hi, t.mean_view_entropy);
  }
  if (hi == lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  const int bins = std::max(1, options.density_bins);
  const double width = (hi - lo) / bins;

  for (std::size_t m = 0; m < models.size(); ++m) {
    const ModelTag tag = model_tag(models[m].config.fovea);
    std::vector<double> values;
    std::vector<std::size_t> counts(static_cast<std::size_t>(bins), 0);
    for (std::size_t s = 0; s < n_seeds; ++s) {
      const double v = result.trials[m * n_seeds + s].mean_view_entropy;
      values.push_back(v);
      const int b = std::clamp(static_cast<int>((v - lo) / width), 0, bins - 1);
      ++counts[b];
    }
    result.stats.push_back(summarize(tag, values));
    for (int b = 0; b < bins; ++b) {
      result.density.push_back({tag, lo + b * width, b + 1 == bins ? hi : lo + (b + 1) * width,
                                counts[b]});
    }
  }
  return result;
}

void write_trials_csv(std::ostream& os, const ComparisonResult& r) {
  os << "model,seed,mean_view_entropy\n";
  for (const TrialSummary& t : r.trials) {
    fmt::print(os, "{},{},{}\n", to_string(t.model), t.seed, t.mean_view_entropy);
  }
}

void write_density_csv(std::ostream& os, const ComparisonResult& r) {
  os << "model,bin_lo,bin_hi,count\n";
  for (const DensityBin& d : r.density) {
    fmt::print(os, "{},{},{},{}\n", to_string(d.model), d.lo, d.hi, d.count);
  }
}

void write_summary_csv(std::ostream& os, const ComparisonResult& r) {
  os << "model,mean,median,q1,q3,n\n";
  for (const DistributionStats& s : r.stats) {
    fmt::print(os, "{},{},{},{},{},{}\n", to_string(s.model), s.mean, s.median, s.q1, s.q3, s.n);
  }
}

}  // namespace pvm
