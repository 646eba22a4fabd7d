#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace pipeforge {

// Dense pixel grid, intensities in [0,1], row-major, channel-interleaved.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 1;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c),
        pixels(static_cast<std::size_t>(h) * w * c, fill) {
    if (h <= 0 || w <= 0 || (c != 1 && c != 3))
      throw std::invalid_argument("Image: bad dimensions");
  }

  double& at(int y, int x, int c = 0) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c = 0) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::size_t size() const { return pixels.size(); }
};

inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Symmetric reflection at the border (edge pixel included once).
inline int reflect_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

inline bool image_valid(const Image& img) {
  if (img.pixels.size() !=
      static_cast<std::size_t>(img.height) * img.width * img.channels)
    return false;
  for (double p : img.pixels)
    if (!(p >= 0.0 && p <= 1.0)) return false;
  return true;
}

// Per-channel mean when channels == 3, identity otherwise.
inline Image to_grayscale(const Image& img) {
  if (img.channels == 1) return img;
  Image out(img.height, img.width, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      out.at(y, x) = (img.at(y, x, 0) + img.at(y, x, 1) + img.at(y, x, 2)) / 3.0;
  return out;
}

}  // namespace pipeforge
