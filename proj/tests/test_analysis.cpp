#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "pvm/analysis.hpp"
#include "pvm/errors.hpp"
#include "pvm/vision_io.hpp"

using namespace pvm;

namespace {

Image byte_noise(std::mt19937_64& rng, int w, int h, int levels = 256) {
  Image img(w, h);
  std::uniform_int_distribution<int> b(0, levels - 1);
  for (double& v : img.data()) v = b(rng) * (255 / (levels - 1)) / 255.0;
  return img;
}

// Per-pixel histogram over the clipped disk, recomputed from scratch.
Image naive_entropy(const Image& f, int radius) {
  Image out(f.width(), f.height(), 1);
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x) {
      double total_bits = 0.0;
      for (int c = 0; c < f.channels(); ++c) {
        std::vector<int> hist(256, 0);
        int n = 0;
        for (int dy = -radius; dy <= radius; ++dy)
          for (int dx = -radius; dx <= radius; ++dx) {
            if (dx * dx + dy * dy > radius * radius) continue;
            const int xx = x + dx;
            const int yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= f.width() || yy >= f.height()) continue;
            ++hist[static_cast<int>(std::lround(f.at(xx, yy, c) * 255))];
            ++n;
          }
        double s = 0.0;
        for (int count : hist) {
          if (count == 0) continue;
          const double p = static_cast<double>(count) / n;
          s -= p * std::log2(p);
        }
        total_bits += s;
      }
      out.at(x, y) = total_bits;
    }
  return out;
}

ModelConfig toy_model(FoveaKind fovea) {
  ModelConfig c;
  c.view_w = 8;
  c.view_h = 8;
  c.level_grids = {4, 2, 1};
  c.fovea = fovea;
  c.fovea_k = 2;
  c.hidden_dim = 3;
  return c;
}

struct ComparisonFixture {
  std::vector<ModelState> models;
  std::vector<Image> frames;
  std::vector<Image> maps;
  ComparisonOptions options;

  ComparisonFixture() {
    for (auto k : {FoveaKind::none, FoveaKind::central, FoveaKind::full})
      models.push_back(make_model(toy_model(k), LearningConfig{}));
    Scenario s;
    s.kind = ScenarioKind::moving_texture;
    s.frame_w = 24;
    s.frame_h = 18;
    s.object_w = 6;
    s.object_h = 5;
    s.n_frames = 15;
    frames = synth_video(s, 4).frames;
    for (const auto& f : frames) maps.push_back(local_entropy_map(f));
    options.saccade.view_w = 8;
    options.saccade.view_h = 8;
    options.seeds = {1, 2, 3, 4, 5};
    options.density_bins = 4;
  }
};

std::string csv_bytes(const ComparisonResult& r) {
  std::ostringstream os;
  write_trials_csv(os, r);
  write_density_csv(os, r);
  write_summary_csv(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("disk offsets of radius 5 cover 81 pixels") {
  const auto d = disk_offsets(5);
  CHECK(d.size() == 81);
  for (const auto& p : d) CHECK(p.x * p.x + p.y * p.y <= 25);
  CHECK(disk_offsets(1).size() == 5);
}

TEST_CASE("entropy of a uniform frame is zero everywhere") {
  const Image f(20, 20, 3, 0.3);
  const Image map = local_entropy_map(f);
  for (double v : map.data()) CHECK(v == 0.0);
  CHECK(view_entropy(map, 3, 4, 10, 10) == 0.0);
}

TEST_CASE("two equally frequent intensities give exactly one bit") {
  // 2x1 frame, radius 1: each disk holds both pixels.
  Image f(2, 1, 3, 0.0);
  f.at(1, 0, 0) = 1.0;
  const Image map = local_entropy_map(f, EntropyConfig{1});
  CHECK(map.at(0, 0) == 1.0);
  CHECK(map.at(1, 0) == 1.0);

  Image g(4, 4, 3, 0.5);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) g.at(x, y, 2) = (y < 2) ? 0.2 : 0.8;
  // Radius 5 covers the whole 4x4 frame: 8 of each value in channel 2.
  const Image gmap = local_entropy_map(g);
  for (double v : gmap.data()) CHECK(v == 1.0);
}

TEST_CASE("entropy map matches the naive histogram oracle exactly") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 12; ++trial) {
    const Image f = byte_noise(rng, 16, 16, trial % 3 == 0 ? 4 : 256);
    for (int r : {1, 3, 5}) {
      const Image got = local_entropy_map(f, EntropyConfig{r});
      const Image want = naive_entropy(f, r);
      REQUIRE(got.data() == want.data());
    }
  }
  // Non-square frame exercises both borders.
  const Image f = byte_noise(rng, 23, 9);
  CHECK(local_entropy_map(f).data() == naive_entropy(f, 5).data());
}

TEST_CASE("entropy bounds on noise frames") {
  std::mt19937_64 rng(3);
  const Image f = byte_noise(rng, 40, 40);
  const Image map = local_entropy_map(f);
  const double per_channel = std::log2(81.0);
  for (double v : map.data()) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 3 * per_channel + 1e-12);
  }
  // Interior pixels of 8-bit noise sit close to the bound.
  CHECK(map.at(20, 20) > 3 * (per_channel - 0.7));
}

TEST_CASE("entropy is invariant under permuting a neighbourhood's values") {
  std::mt19937_64 rng(6);
  // Radius 5 on a 5x5 frame: every disk covers the whole frame.
  Image f = byte_noise(rng, 5, 5);
  const double before = local_entropy_map(f).at(2, 2);
  for (int c = 0; c < 3; ++c) {
    std::vector<double> vals;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x) vals.push_back(f.at(x, y, c));
    std::shuffle(vals.begin(), vals.end(), rng);
    for (int i = 0; i < 25; ++i) f.at(i % 5, i / 5, c) = vals[static_cast<std::size_t>(i)];
  }
  CHECK(local_entropy_map(f).at(2, 2) == doctest::Approx(before).epsilon(1e-12));
}

TEST_CASE("view entropy is the mean of the map over the view") {
  std::mt19937_64 rng(2);
  const Image map = local_entropy_map(byte_noise(rng, 20, 12));
  const double whole = std::accumulate(map.data().begin(), map.data().end(), 0.0) / (20 * 12);
  CHECK(view_entropy(map, 0, 0, 20, 12) == doctest::Approx(whole).epsilon(1e-12));
  CHECK(view_entropy(map, 4, 5, 1, 1) == map.at(4, 5));
  CHECK_THROWS_AS(view_entropy(map, 15, 0, 6, 6), std::out_of_range);
}

TEST_CASE("a view on texture scores above a view on flat background") {
  std::mt19937_64 rng(5);
  Image f(40, 20, 3, 0.5);
  const Image noise = byte_noise(rng, 20, 20);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x)
      for (int c = 0; c < 3; ++c) f.at(x + 20, y, c) = noise.at(x, y, c);
  const Image map = local_entropy_map(f);
  CHECK(view_entropy(map, 28, 6, 8, 8) > view_entropy(map, 2, 6, 8, 8));
}

TEST_CASE("mean view entropy averages over the trial rows") {
  std::vector<Image> maps{Image(4, 4, 1, 1.0), Image(4, 4, 1, 3.0)};
  TrialRecord rec{{0, 0, 0, 0, 0, 0, 0}, {1, 1, 1, 0, 0, 0, 0}};
  CHECK(mean_view_entropy(maps, rec, 2, 2) == 2.0);
  CHECK(mean_view_entropy(maps, {}, 2, 2) == 0.0);
}

TEST_CASE("quantiles interpolate linearly") {
  const std::vector<double> v{4, 1, 3, 2};
  CHECK(quantile(v, 0.0) == 1.0);
  CHECK(quantile(v, 1.0) == 4.0);
  CHECK(quantile(v, 0.5) == 2.5);
  CHECK(quantile(v, 0.25) == doctest::Approx(1.75));
  const std::vector<double> one{7};
  const auto s = summarize(ModelTag::uhr, one);
  CHECK(s.mean == 7.0);
  CHECK(s.q1 == 7.0);
  CHECK(s.n == 1);
}

TEST_CASE("comparison with zero trials is empty") {
  ComparisonFixture fx;
  fx.options.seeds.clear();
  const auto r = run_comparison(fx.models, fx.frames, fx.maps, fx.options);
  CHECK(r.trials.empty());
  CHECK(r.stats.empty());
  CHECK(r.density.empty());
}

TEST_CASE("comparison output shape, density totals and entropy sign") {
  ComparisonFixture fx;
  const auto r = run_comparison(fx.models, fx.frames, fx.maps, fx.options);
  REQUIRE(r.trials.size() == 15);
  REQUIRE(r.stats.size() == 3);
  CHECK(r.stats[0].model == ModelTag::base);
  CHECK(r.stats[1].model == ModelTag::foveated);
  CHECK(r.stats[2].model == ModelTag::uhr);
  for (const auto& t : r.trials) CHECK(t.mean_view_entropy >= 0.0);
  for (auto tag : {ModelTag::base, ModelTag::foveated, ModelTag::uhr}) {
    std::size_t total = 0;
    for (const auto& d : r.density)
      if (d.model == tag) total += d.count;
    CHECK(total == 5);
  }
  CHECK(r.density.size() == 12);
}

TEST_CASE("comparison is deterministic and independent of thread count") {
  ComparisonFixture fx;
  const auto a = csv_bytes(run_comparison(fx.models, fx.frames, fx.maps, fx.options));
  fx.options.threads = 4;
  const auto b = csv_bytes(run_comparison(fx.models, fx.frames, fx.maps, fx.options));
  CHECK(a == b);
}

TEST_CASE("comparison does not mutate the input models") {
  ComparisonFixture fx;
  const auto before = fx.models;
  run_comparison(fx.models, fx.frames, fx.maps, fx.options);
  CHECK(fx.models == before);
}

TEST_CASE("comparison rejects a model whose view differs") {
  ComparisonFixture fx;
  fx.options.saccade.view_w = 16;
  fx.options.saccade.view_h = 16;
  CHECK_THROWS_AS(run_comparison(fx.models, fx.frames, fx.maps, fx.options), ConfigError);
}

TEST_CASE("CSV headers") {
  ComparisonFixture fx;
  fx.options.seeds = {9};
  const auto r = run_comparison(fx.models, fx.frames, fx.maps, fx.options);
  std::ostringstream t, d, s;
  write_trials_csv(t, r);
  write_density_csv(d, r);
  write_summary_csv(s, r);
  CHECK(t.str().rfind("model,seed,mean_view_entropy\nbase,9,", 0) == 0);
  CHECK(d.str().rfind("model,bin_lo,bin_hi,count\n", 0) == 0);
  CHECK(s.str().rfind("model,mean,median,q1,q3,n\n", 0) == 0);
}
