#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "pvm/image.hpp"

namespace pvm {

struct FrameSequence {
  std::vector<Image> frames;  // same size, 3 channels, values in [0, 1]
  double fps = 25.0;          // informational only

  bool empty() const { return frames.empty(); }
  std::size_t size() const { return frames.size(); }
  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }

  bool operator==(const FrameSequence&) const = default;
};

// Loads either a directory of numbered .png / .ppm files (lexicographic
// order) or a single RGB8 container. Throws DataError naming the offending
// file.
FrameSequence load_sequence(const std::filesystem::path& path);

Image read_ppm(const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);
void write_ppm(const Image& image, const std::filesystem::path& path);
void write_png(const Image& image, const std::filesystem::path& path);

// RGB8 container: "RGB8" | u32 w | u32 h | u32 n | n*w*h*3 bytes, row-major RGB.
FrameSequence read_rgb8(const std::filesystem::path& path);
void write_rgb8(const FrameSequence& seq, const std::filesystem::path& path);

// [0,1] -> u8 with rounding; values outside are clamped.
std::uint8_t to_byte(double v);

// Exact copy of the rectangle. Throws std::out_of_range if it leaves the frame.
Image crop(const Image& frame, int x, int y, int w, int h);

// Frame with a 1-pixel rectangle outline painted in `rgb`.
Image draw_rect(const Image& frame, const Rect& r, const double (&rgb)[3]);

enum class ScenarioKind { uniform_gray, flicker_patch, moving_texture, two_frame_alternator };

ScenarioKind parse_scenario_kind(const std::string& name);
const char* to_string(ScenarioKind kind);

struct Scenario {
  ScenarioKind kind = ScenarioKind::uniform_gray;
  int frame_w = 64;
  int frame_h = 48;
  int n_frames = 100;
  // flicker_patch: top-left corner, edge, and frames per full black/white cycle.
  Point patch{8, 8};
  int patch_size = 8;
  int period = 2;
  // moving_texture: path of the object's top-left corner (looped). When
  // empty, four random waypoints are drawn from the seed.
  std::vector<Point> waypoints;
  int object_w = 12;
  int object_h = 8;
  double speed = 1.0;  // pixels per frame along the path
};

// Deterministic in (scenario, seed).
FrameSequence synth_video(const Scenario& scenario, std::uint64_t seed);

}  // namespace pvm
