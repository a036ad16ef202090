#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "pvm/errors.hpp"
#include "pvm/saccade.hpp"

using namespace pvm;

namespace {

// Brute-force window scan, row-major visiting order gives the tie-break.
WindowMax naive_window_max(const Image& m, int ww, int wh) {
  WindowMax best{-1.0, 0, 0};
  for (int y = 0; y + wh <= m.height(); ++y)
    for (int x = 0; x + ww <= m.width(); ++x) {
      double s = 0.0;
      for (int dy = 0; dy < wh; ++dy)
        for (int dx = 0; dx < ww; ++dx)
          for (int c = 0; c < m.channels(); ++c) s += m.at(x + dx, y + dy, c);
      if (s > best.value) best = {s, x, y};
    }
  return best;
}

SaccadeConfig quiet_config() {
  SaccadeConfig c;
  c.jitter = 0;
  return c;
}

}  // namespace

TEST_CASE("window: all-zero map gives max 0 at the origin") {
  const auto best = window_error_map(Image(32, 32), 3, 3);
  CHECK(best.value == 0.0);
  CHECK(best.x == 0);
  CHECK(best.y == 0);
}

TEST_CASE("window: a single hot pixel is claimed by the top-left covering window") {
  Image m(32, 32);
  const double v = 0.7;
  m.at(10, 10, 1) = v * v;
  const auto best = window_error_map(m, 3, 3);
  CHECK(best.value == v * v);
  CHECK(best.x == 8);
  CHECK(best.y == 8);
}

TEST_CASE("window: uniform map gives nine times the pixel total everywhere") {
  Image m(32, 32);
  const double e = 0.3;
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x) m.at(x, y, 0) = e * e;
  const auto best = window_error_map(m, 3, 3);
  CHECK(best.value == doctest::Approx(9 * e * e).epsilon(1e-14));
  CHECK(best.x == 0);
  CHECK(best.y == 0);
}

TEST_CASE("window: window larger than the map is a configuration error") {
  CHECK_THROWS_AS(window_error_map(Image(4, 4), 5, 3), ConfigError);
}

TEST_CASE("window: matches the naive scan on random maps") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> dim(1, 20);
  for (int trial = 0; trial < 200; ++trial) {
    Image m(dim(rng) + 4, dim(rng) + 4);
    const bool dyadic = trial % 2 == 0;
    for (double& v : m.data()) {
      // Multiples of 1/8 sum exactly in any order, so ties are real ties.
      v = dyadic ? std::floor(u(rng) * 3) / 8 : u(rng) * u(rng);
    }
    const int ww = std::uniform_int_distribution<int>(1, m.width())(rng);
    const int wh = std::uniform_int_distribution<int>(1, m.height())(rng);
    const auto got = window_error_map(m, ww, wh);
    const auto want = naive_window_max(m, ww, wh);
    REQUIRE(got.value == doctest::Approx(want.value).epsilon(1e-12));
    REQUIRE(got.x == want.x);
    REQUIRE(got.y == want.y);
  }
}

TEST_CASE("fixation: zero error with zero threshold keeps the fixation") {
  const auto cfg = quiet_config();
  const ViewState v = view_at(5, 6);
  const auto next = update_fixation(v, {0.0, 20, 3}, cfg, {100, 100});
  CHECK(next.x_fix == 5);
  CHECK(next.y_fix == 6);
  CHECK(next.threshold == 0.0);
}

TEST_CASE("fixation: a centred winning window is a no-op pull") {
  const auto cfg = quiet_config();
  const ViewState v = view_at(7, 9);
  // 3x3 window at (15,15) has its centre at (16,16), the middle of a 32 view.
  const auto next = update_fixation(v, {1.0, 15, 15}, cfg, {100, 100});
  CHECK(next.x_fix == 7);
  CHECK(next.y_fix == 9);
}

TEST_CASE("fixation: off-centre window retargets to the centring origin, clamped") {
  const auto cfg = quiet_config();
  const ViewState v = view_at(10, 10);
  const auto next = update_fixation(v, {1.0, 25, 2}, cfg, {100, 100});
  CHECK(next.x_fix == 10 + 26 - 16);
  CHECK(next.y_fix == 0);  // 10 + 3 - 16 < 0
  const auto clamped = update_fixation(v, {1.0, 29, 29}, cfg, {12, 12});
  CHECK(clamped.x_fix == 12);
  CHECK(clamped.y_fix == 12);
}

TEST_CASE("fixation: threshold follows the EMA closed form and rises monotonically") {
  SaccadeConfig cfg = quiet_config();
  cfg.tau_threshold = 0.05;
  ViewState v = view_at(0, 0);
  const double m = 2.5;
  double prev = v.threshold;
  for (int k = 1; k <= 200; ++k) {
    v = update_fixation(v, {m, 0, 0}, cfg, {0, 0});
    REQUIRE(v.threshold == doctest::Approx(m * (1.0 - std::pow(0.95, k))).epsilon(1e-12));
    REQUIRE(v.threshold > prev);
    REQUIRE(v.threshold <= m);
    prev = v.threshold;
  }
}

TEST_CASE("fixation: threshold updates even when no saccade triggers") {
  const auto cfg = quiet_config();
  ViewState v = view_at(0, 0);
  v.threshold = 1.0;
  const auto next = update_fixation(v, {0.5, 20, 20}, cfg, {50, 50});
  CHECK(next.x_fix == 0);
  CHECK(next.threshold == doctest::Approx(0.975));
}

TEST_CASE("rounding is half away from zero") {
  CHECK(round_nearest(13.72) == 14);
  CHECK(round_nearest(2.5) == 3);
  CHECK(round_nearest(-2.5) == -3);
  CHECK(round_nearest(2.4999) == 2);
}

TEST_CASE("oscillator: worked value from rest at 10 toward 20") {
  const auto cfg = quiet_config();
  ViewState v = view_at(10, 10);
  v.x_fix = 20;
  std::mt19937_64 rng(1);
  const auto next = oscillator_step(v, cfg, {100, 100}, rng);
  CHECK(next.x == 14);
  CHECK(next.x_prev == 10);
  CHECK(next.y == 10);
}

TEST_CASE("oscillator: the fixation point is an exact fixed point") {
  const auto cfg = quiet_config();
  std::mt19937_64 rng(1);
  for (int x = 0; x <= 200; ++x) {
    ViewState v = view_at(x, 200 - x);
    const auto next = oscillator_step(v, cfg, {200, 200}, rng);
    REQUIRE(next.x == x);
    REQUIRE(next.y == 200 - x);
  }
}

TEST_CASE("oscillator: rounding leaves a spurious rest point one pixel off the fixation") {
  // 1.72 X + 1.08 over 1.72 is X + 0.628, which rounds back up to X + 1.
  const auto cfg = quiet_config();
  ViewState v = view_at(21, 21);
  v.x_fix = 20;
  v.y_fix = 20;
  std::mt19937_64 rng(1);
  for (int t = 0; t < 50; ++t) v = oscillator_step(v, cfg, {100, 100}, rng);
  CHECK(v.x == 21);
  CHECK(v.y == 21);
}

TEST_CASE("oscillator: the real-valued recurrence converges to the fixation") {
  const double a = 0.8;
  const double g = 0.9;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    double now = u(rng);
    double prev = u(rng);
    const double fix = u(rng);
    for (int t = 0; t < 400; ++t) {
      const double next = ((2 - a * a) * now + (g * a - 1) * prev + a * a * fix) / (1 + g * a);
      prev = now;
      now = next;
    }
    REQUIRE(std::abs(now - fix) < 1e-9);
  }
}

TEST_CASE("oscillator: integer orbits settle within one pixel of the fixation") {
  const auto cfg = quiet_config();
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> pos(0, 200);
  for (int trial = 0; trial < 500; ++trial) {
    ViewState v{pos(rng), pos(rng), pos(rng), pos(rng), pos(rng), pos(rng), 0.0};
    for (int t = 0; t < 200; ++t) v = oscillator_step(v, cfg, {200, 200}, rng);
    const auto settled = v;
    v = oscillator_step(v, cfg, {200, 200}, rng);
    REQUIRE(v.x == settled.x);
    REQUIRE(v.y == settled.y);
    REQUIRE(std::abs(v.x - v.x_fix) <= 1);
    REQUIRE(std::abs(v.y - v.y_fix) <= 1);
  }
}

TEST_CASE("oscillator: origin always stays within the legal range") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    SaccadeConfig cfg;
    cfg.omega_dt = std::uniform_real_distribution<double>(0.1, 1.9)(rng);
    cfg.gamma = std::uniform_real_distribution<double>(0.1, 1.5)(rng);
    cfg.jitter = std::uniform_int_distribution<int>(0, 5)(rng);
    const ViewLimits lim{std::uniform_int_distribution<int>(0, 40)(rng),
                         std::uniform_int_distribution<int>(0, 40)(rng)};
    std::uniform_int_distribution<int> px(0, lim.max_x);
    std::uniform_int_distribution<int> py(0, lim.max_y);
    ViewState v = view_at(px(rng), py(rng));
    for (int t = 0; t < 100; ++t) {
      if (t % 7 == 0) {
        v.x_fix = px(rng);
        v.y_fix = py(rng);
      }
      v = oscillator_step(v, cfg, lim, rng);
      REQUIRE(v.x >= 0);
      REQUIRE(v.x <= lim.max_x);
      REQUIRE(v.y >= 0);
      REQUIRE(v.y <= lim.max_y);
    }
  }
}

TEST_CASE("view limits reject frames smaller than the view") {
  const auto lim = view_limits(176, 99, 32, 32);
  CHECK(lim.max_x == 144);
  CHECK(lim.max_y == 67);
  CHECK_THROWS_AS(view_limits(31, 40, 32, 32), DataError);
}

TEST_CASE("random starts are legal and reproducible") {
  const ViewLimits lim{16, 9};
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto v = random_start(s, lim);
    REQUIRE(v == random_start(s, lim));
    REQUIRE(v.x >= 0);
    REQUIRE(v.x <= 16);
    REQUIRE(v.y <= 9);
    REQUIRE(v.x_prev == v.x);
    REQUIRE(v.x_fix == v.x);
  }
}

namespace {

ModelConfig toy_model() {
  ModelConfig c;
  c.view_w = 8;
  c.view_h = 8;
  c.level_grids = {4, 2, 1};
  c.hidden_dim = 4;
  return c;
}

SaccadeConfig toy_saccade() {
  SaccadeConfig s;
  s.view_w = 8;
  s.view_h = 8;
  s.jitter = 0;
  return s;
}

}  // namespace

TEST_CASE("loop: empty sequence gives an empty record") {
  auto m = make_model(toy_model(), LearningConfig{});
  Engine engine(1);
  const auto rec = run_saccade_loop(engine, m, {}, toy_saccade(), view_at(0, 0));
  CHECK(rec.empty());
  CHECK(m.frame_counter == 0);
}

TEST_CASE("loop: frames smaller than the view are an input error") {
  auto m = make_model(toy_model(), LearningConfig{});
  Engine engine(1);
  const std::vector<Image> frames{Image(6, 20)};
  CHECK_THROWS_AS(run_saccade_loop(engine, m, frames, toy_saccade(), view_at(0, 0)), DataError);
}

TEST_CASE("loop: static gray with no jitter settles to a constant origin") {
  auto m = make_model(toy_model(), LearningConfig{});
  Engine engine(1);
  const Image gray(16, 16, 3, 0.5);
  const std::vector<Image> train(300, gray);
  run_saccade_loop(engine, m, train, toy_saccade(), view_at(4, 4));

  m.mode = Mode::frozen;
  const std::vector<Image> frames(60, gray);
  const auto rec = run_saccade_loop(engine, m, frames, toy_saccade(), view_at(3, 5));
  REQUIRE(rec.size() == 60);
  for (std::size_t i = 30; i < rec.size(); ++i) {
    CHECK(rec[i].x == rec[29].x);
    CHECK(rec[i].y == rec[29].y);
  }
  for (const auto& r : rec) CHECK(r.frame == static_cast<int>(&r - rec.data()));
}

TEST_CASE("loop: identical seeds give identical records") {
  std::mt19937_64 rng(2);
  std::vector<Image> frames;
  for (int t = 0; t < 40; ++t) {
    Image f(20, 14);
    for (double& v : f.data()) v = std::uniform_real_distribution<double>(0, 1)(rng);
    frames.push_back(f);
  }
  SaccadeConfig cfg = toy_saccade();
  cfg.jitter = 2;
  cfg.seed = 77;
  const auto base = make_model(toy_model(), LearningConfig{});
  Engine engine(1);
  auto a = base;
  auto b = base;
  const auto ra = run_saccade_loop(engine, a, frames, cfg, view_at(2, 3));
  const auto rb = run_saccade_loop(engine, b, frames, cfg, view_at(2, 3));
  CHECK(ra == rb);
  CHECK(a == b);
}

TEST_CASE("trial CSV has the documented header and one row per frame") {
  TrialRecord rec{{0, 1, 2, 3, 4, 0.5, 0.25}, {1, 2, 3, 4, 5, 0.125, 0.0}};
  std::ostringstream os;
  write_trial_csv(os, rec);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "frame,x,y,x_fix,y_fix,max_err,threshold");
  std::getline(is, line);
  CHECK(line == "0,1,2,3,4,0.5,0.25");
  std::getline(is, line);
  CHECK(line == "1,2,3,4,5,0.125,0");
}

TEST_CASE("invalid saccade settings are rejected") {
  SaccadeConfig c;
  c.omega_dt = 0.0;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SaccadeConfig{};
  c.window_w = 40;
  CHECK_THROWS_AS(validate(c), ConfigError);
  c = SaccadeConfig{};
  c.tau_threshold = 1.2;
  CHECK_THROWS_AS(validate(c), ConfigError);
}
