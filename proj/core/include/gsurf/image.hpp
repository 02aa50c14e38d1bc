#pragma once

#include "gsurf/types.hpp"

#include <string>
#include <vector>

namespace gsurf {

// Row-major float image, values nominally in [0, 1] for color/alpha.
// channels is 1 (gray) or 3 (RGB).
struct Image {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<double> data;  // height * width * channels

  Image() = default;
  Image(int w, int h, int c, double fill = 0.0)
      : width(w), height(h), channels(c),
        data(static_cast<std::size_t>(w) * h * c, fill) {}

  double& at(int x, int y, int c) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int x, int y, int c) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return data.size(); }
  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }
};

// 8-bit PNG. Color images are written as RGB with an sRGB chunk, gray images
// as plain grayscale (linear). Values are clamped to [0,1] then quantized.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);  // returns 1 or 3 channels, values in [0,1]

// PFM, little-endian (negative scale), bottom-to-top rows per convention.
// 1 channel -> "Pf", 3 channels -> "PF".
void write_pfm(const std::string& path, const Image& img);
Image read_pfm(const std::string& path);

}  // namespace gsurf
