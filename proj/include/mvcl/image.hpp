#pragma once

#include <filesystem>
#include <vector>

namespace mvcl {

// Single-channel image, row-major, intensities in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w, 0.0) {}

  double& at(int y, int x) { return pixels[static_cast<size_t>(y) * width + x]; }
  double at(int y, int x) const { return pixels[static_cast<size_t>(y) * width + x]; }
  bool operator==(const Image& o) const = default;
};

// Reads an 8- or 16-bit grayscale PNG, rescaling intensities to [0,1].
// Throws DataError for missing files, decode failures, or unsupported
// color formats.
Image read_png_gray(const std::filesystem::path& path);

// Writes a 16-bit grayscale PNG; values are clamped to [0,1] and quantized
// to the 16-bit grid.
void write_png_gray16(const std::filesystem::path& path, const Image& img);

} // namespace mvcl
