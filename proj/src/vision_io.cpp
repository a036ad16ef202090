#include "pvm/vision_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "pvm/errors.hpp"

namespace fs = std::filesystem;

namespace pvm {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

namespace {

Image from_bytes(const std::uint8_t* rgb, int w, int h) {
  Image img(w, h, 3);
  auto& d = img.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = rgb[i] / 255.0;
  return img;
}

std::vector<std::uint8_t> to_bytes(const Image& img) {
  if (img.channels() != 3) throw std::invalid_argument("expected a 3-channel image");
  std::vector<std::uint8_t> out(img.data().size());
  std::transform(img.data().begin(), img.data().end(), out.begin(), to_byte);
  return out;
}

std::string lower_ext(const fs::path& p) {
  std::string e = p.extension().string();
  std::transform(e.begin(), e.end(), e.begin(), [](unsigned char c) { return std::tolower(c); });
  return e;
}

// Next whitespace-separated PNM header token, skipping # comments.
std::string pnm_token(std::istream& is) {
  std::string tok;
  int ch;
  while ((ch = is.get()) != EOF) {
    if (ch == '#') {
      while ((ch = is.get()) != EOF && ch != '\n') {
      }
      continue;
    }
    if (std::isspace(ch)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(ch));
  }
  return tok;
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  os.write(b, 4);
}

}  // namespace

Image read_ppm(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  if (pnm_token(is) != "P6") throw DataError(path.string() + ": not a binary PPM (P6)");
  int w = 0, h = 0, maxval = 0;
  try {
    w = std::stoi(pnm_token(is));
    h = std::stoi(pnm_token(is));
    maxval = std::stoi(pnm_token(is));
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PPM header");
  }
  if (w < 1 || h < 1 || maxval != 255) {
    throw DataError(path.string() + ": unsupported PPM (need positive size and maxval 255)");
  }
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(w) * h * 3);
  is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (is.gcount() != static_cast<std::streamsize>(buf.size())) {
    throw DataError(path.string() + ": truncated pixel data");
  }
  return from_bytes(buf.data(), w, h);
}

void write_ppm(const Image& image, const fs::path& path) {
  const auto bytes = to_bytes(image);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os << "P6\n" << image.width() << ' ' << image.height() << "\n255\n";
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Image read_png(const fs::path& path) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.string().c_str())) {
    throw DataError(path.string() + ": " + img.message);
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, buf.data(), 0, nullptr)) {
    const std::string msg = img.message;
    png_image_free(&img);
    throw DataError(path.string() + ": " + msg);
  }
  return from_bytes(buf.data(), static_cast<int>(img.width), static_cast<int>(img.height));
}

void write_png(const Image& image, const fs::path& path) {
  const auto bytes = to_bytes(image);
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(image.width());
  img.height = static_cast<png_uint_32>(image.height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.string().c_str(), 0, bytes.data(), 0, nullptr)) {
    throw DataError("cannot write " + path.string() + ": " + img.message);
  }
}

FrameSequence read_rgb8(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open " + path.string());
  std::uint8_t head[16];
  is.read(reinterpret_cast<char*>(head), sizeof head);
  if (is.gcount() != sizeof head || !std::equal(head, head + 4, "RGB8")) {
    throw DataError(path.string() + ": not an RGB8 container");
  }
  const std::uint32_t w = get_u32(head + 4);
  const std::uint32_t h = get_u32(head + 8);
  const std::uint32_t n = get_u32(head + 12);
  if (w == 0 || h == 0) throw DataError(path.string() + ": zero frame size");
  const std::size_t frame_bytes = static_cast<std::size_t>(w) * h * 3;
  FrameSequence seq;
  std::vector<std::uint8_t> buf(frame_bytes);
  for (std::uint32_t i = 0; i < n; ++i) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(frame_bytes));
    if (is.gcount() != static_cast<std::streamsize>(frame_bytes)) {
      throw DataError(path.string() + ": truncated at frame " + std::to_string(i));
    }
    seq.frames.push_back(from_bytes(buf.data(), static_cast<int>(w), static_cast<int>(h)));
  }
  return seq;
}

void write_rgb8(const FrameSequence& seq, const fs::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write " + path.string());
  os.write("RGB8", 4);
  put_u32(os, static_cast<std::uint32_t>(seq.width()));
  put_u32(os, static_cast<std::uint32_t>(seq.height()));
  put_u32(os, static_cast<std::uint32_t>(seq.size()));
  for (const Image& f : seq.frames) {
    if (f.width() != seq.width() || f.height() != seq.height()) {
      throw DataError("RGB8 frames must share one size");
    }
    const auto bytes = to_bytes(f);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
  }
}

FrameSequence load_sequence(const fs::path& path) {
  std::error_code ec;
  if (fs::is_regular_file(path, ec)) return read_rgb8(path);
  if (!fs::is_directory(path, ec)) throw DataError("no such frame source: " + path.string());

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(path)) {
    const std::string e = lower_ext(entry.path());
    if (entry.is_regular_file() && (e == ".png" || e == ".ppm")) files.push_back(entry.path());
  }
  if (files.empty()) throw DataError(path.string() + ": no .png or .ppm frames found");
  std::sort(files.begin(), files.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });

  FrameSequence seq;
  for (const fs::path& f : files) {
    Image img = lower_ext(f) == ".png" ? read_png(f) : read_ppm(f);
    if (!seq.frames.empty() && !img.same_shape(seq.frames.front())) {
      throw DataError(f.string() + ": frame size " + std::to_string(img.width()) + "x" +
                      std::to_string(img.height()) + " differs from " +
                      std::to_string(seq.width()) + "x" + std::to_string(seq.height()));
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

Image crop(const Image& frame, int x, int y, int w, int h) {
  if (x < 0 || y < 0 || w < 0 || h < 0 || x + w > frame.width() || y + h > frame.height()) {
    throw std::out_of_range("crop " + std::to_string(w) + "x" + std::to_string(h) + " at (" +
                            std::to_string(x) + "," + std::to_string(y) + ") leaves the " +
                            std::to_string(frame.width()) + "x" +
                            std::to_string(frame.height()) + " frame");
  }
  Image out(w, h, frame.channels());
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c)
      for (int k = 0; k < frame.channels(); ++k) out.at(c, r, k) = frame.at(x + c, y + r, k);
  return out;
}

Image draw_rect(const Image& frame, const Rect& r, const double (&rgb)[3]) {
  Image out = frame;
  auto paint = [&](int x, int y) {
    if (x < 0 || y < 0 || x >= out.width() || y >= out.height()) return;
    for (int c = 0; c < std::min(3, out.channels()); ++c) out.at(x, y, c) = rgb[c];
  };
  for (int x = r.x; x < r.x + r.w; ++x) {
    paint(x, r.y);
    paint(x, r.y + r.h - 1);
  }
  for (int y = r.y; y < r.y + r.h; ++y) {
    paint(r.x, y);
    paint(r.x + r.w - 1, y);
  }
  return out;
}

ScenarioKind parse_scenario_kind(const std::string& name) {
  if (name == "uniform_gray") return ScenarioKind::uniform_gray;
  if (name == "flicker_patch") return ScenarioKind::flicker_patch;
  if (name == "moving_texture") return ScenarioKind::moving_texture;
  if (name == "two_frame_alternator") return ScenarioKind::two_frame_alternator;
  throw ConfigError("unknown scenario '" + name + "'");
}

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::uniform_gray: return "uniform_gray";
    case ScenarioKind::flicker_patch: return "flicker_patch";
    case ScenarioKind::moving_texture: return "moving_texture";
    case ScenarioKind::two_frame_alternator: return "two_frame_alternator";
  }
  return "?";
}

namespace {

double random_byte_value(std::mt19937_64& rng) {
  return static_cast<double>(std::uniform_int_distribution<int>(0, 255)(rng)) / 255.0;
}

// Point at arc length `dist` along the closed polyline through `pts`.
std::pair<double, double> along_loop(const std::vector<Point>& pts, double dist) {
  std::vector<double> seg;
  double total = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point& a = pts[i];
    const Point& b = pts[(i + 1) % pts.size()];
    seg.push_back(std::hypot(b.x - a.x, b.y - a.y));
    total += seg.back();
  }
  if (total == 0.0) return {pts[0].x, pts[0].y};
  dist = std::fmod(dist, total);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (dist <= seg[i] && seg[i] > 0.0) {
      const Point& a = pts[i];
      const Point& b = pts[(i + 1) % pts.size()];
      const double t = dist / seg[i];
      return {a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)};
    }
    dist -= seg[i];
  }
  return {pts[0].x, pts[0].y};
}

}  // namespace

FrameSequence synth_video(const Scenario& s, std::uint64_t seed) {
  if (s.frame_w < 1 || s.frame_h < 1 || s.n_frames < 0) {
    throw ConfigError("scenario needs a positive frame size and n_frames >= 0");
  }
  FrameSequence seq;
  seq.frames.reserve(static_cast<std::size_t>(s.n_frames));
  std::mt19937_64 rng(seed);

  switch (s.kind) {
    case ScenarioKind::uniform_gray:
      for (int f = 0; f < s.n_frames; ++f) seq.frames.emplace_back(s.frame_w, s.frame_h, 3, 0.5);
      break;

    case ScenarioKind::flicker_patch: {
      if (s.patch_size < 1 || s.period < 2 || s.patch.x < 0 || s.patch.y < 0 ||
          s.patch.x + s.patch_size > s.frame_w || s.patch.y + s.patch_size > s.frame_h) {
        throw ConfigError("flicker patch must lie inside the frame with period >= 2");
      }
      const int half = s.period / 2;
      for (int f = 0; f < s.n_frames; ++f) {
        Image img(s.frame_w, s.frame_h, 3, 0.5);
        const int phase = (f / half) % 2;
        for (int y = 0; y < s.patch_size; ++y)
          for (int x = 0; x < s.patch_size; ++x) {
            const double v = ((x + y + phase) % 2 == 0) ? 0.0 : 1.0;
            for (int c = 0; c < 3; ++c) img.at(s.patch.x + x, s.patch.y + y, c) = v;
          }
        seq.frames.push_back(std::move(img));
      }
      break;
    }

    case ScenarioKind::moving_texture: {
      if (s.object_w < 1 || s.object_h < 1 || s.object_w > s.frame_w || s.object_h > s.frame_h) {
        throw ConfigError("moving object does not fit the frame");
      }
      const int max_x = s.frame_w - s.object_w;
      const int max_y = s.frame_h - s.object_h;
      std::vector<Point> path = s.waypoints;
      for (const Point& p : path) {
        if (p.x < 0 || p.y < 0 || p.x > max_x || p.y > max_y) {
          throw ConfigError("waypoint places the object outside the frame");
        }
      }
      if (path.empty()) {
        std::uniform_int_distribution<int> ux(0, max_x);
        std::uniform_int_distribution<int> uy(0, max_y);
        for (int i = 0; i < 4; ++i) {
          const int x = ux(rng);
          path.push_back({x, uy(rng)});
        }
      }
      std::vector<double> texture(static_cast<std::size_t>(s.object_w) * s.object_h * 3);
      for (double& v : texture) v = random_byte_value(rng);
      const double background[3] = {0.55, 0.5, 0.45};
      for (int f = 0; f < s.n_frames; ++f) {
        Image img(s.frame_w, s.frame_h, 3);
        for (int y = 0; y < s.frame_h; ++y)
          for (int x = 0; x < s.frame_w; ++x)
            for (int c = 0; c < 3; ++c) img.at(x, y, c) = background[c];
        const auto [px, py] = along_loop(path, f * s.speed);
        const int ox = std::clamp(static_cast<int>(std::lround(px)), 0, max_x);
        const int oy = std::clamp(static_cast<int>(std::lround(py)), 0, max_y);
        std::size_t k = 0;
        for (int y = 0; y < s.object_h; ++y)
          for (int x = 0; x < s.object_w; ++x)
            for (int c = 0; c < 3; ++c) img.at(ox + x, oy + y, c) = texture[k++];
        seq.frames.push_back(std::move(img));
      }
      break;
    }

    case ScenarioKind::two_frame_alternator: {
      Image a(s.frame_w, s.frame_h, 3);
      Image b(s.frame_w, s.frame_h, 3);
      for (double& v : a.data()) v = random_byte_value(rng);
      for (double& v : b.data()) v = random_byte_value(rng);
      for (int f = 0; f < s.n_frames; ++f) seq.frames.push_back(f % 2 == 0 ? a : b);
      break;
    }
  }
  return seq;
}

}  // namespace pvm
