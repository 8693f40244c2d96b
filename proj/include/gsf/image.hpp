#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace gsf {

// H x W x 3 image, row-major with interleaved channels, values nominally in [0, 1].
// Pixel (x, y) has x to the right and y down; (0, 0) is the top-left pixel.
struct RasterImage {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;

  RasterImage() = default;
  RasterImage(int w, int h, double fill = 0.0);

  double& at(int x, int y, int c) { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  double at(int x, int y, int c) const { return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

  bool operator==(const RasterImage&) const = default;
};

// H x W {0,1} mask sharing the image coordinate convention.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h, std::uint8_t fill = 0);

  std::uint8_t& at(int x, int y) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t count() const;

  bool operator==(const BinaryMask&) const = default;
};

// Binary PPM (P6, maxval 255). Values are clamped to [0,1] and rounded to 8 bits.
void write_ppm(const std::string& path, const RasterImage& image);
RasterImage read_ppm(const std::string& path);

// Binary PGM (P5), 0/255.
void write_pgm(const std::string& path, const BinaryMask& mask);
BinaryMask read_pgm_mask(const std::string& path);
// Grayscale preview of a scalar field; non-finite entries are written as 0,
// finite ones are mapped linearly from [lo, hi] onto [255, 1].
void write_pgm_field(const std::string& path, int width, int height, const std::vector<double>& values);

// Quantizes to the 8-bit grid used by PPM files.
RasterImage quantize8(const RasterImage& image);

}  // namespace gsf
