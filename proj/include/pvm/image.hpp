#pragma once

#include <cstddef>
#include <vector>

namespace pvm {

struct Point {
  int x = 0;
  int y = 0;

  bool operator==(const Point&) const = default;
};

// Pixel rectangle. Coordinates are relative to whatever image it is applied to.
struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int area() const { return w * h; }
  bool operator==(const Rect&) const = default;
};

// Row-major, channel-interleaved image of doubles, origin top-left.
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 3, double fill = 0.0)
      : width_(width),
        height_(height),
        channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  bool empty() const { return data_.empty(); }

  double& at(int x, int y, int c = 0) { return data_[index(x, y, c)]; }
  double at(int x, int y, int c = 0) const { return data_[index(x, y, c)]; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool same_shape(const Image& o) const {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  bool operator==(const Image&) const = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

}  // namespace pvm
