#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gsf/image.hpp"

namespace gsf::metrics {

using Points2d = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

struct MetricReport {
  double psnr = 0.0;  // dB; +inf when every frame is identical
  double ssim = 0.0;
  double lmd = 0.0;   // pixels
  std::size_t frames = 0;

  std::string to_json() const;
};

double mse(std::span<const double> a, std::span<const double> b);
// 10 log10(max^2 / MSE); +inf for identical inputs.
double psnr(std::span<const double> a, std::span<const double> b, double max_value);
double psnr(const RasterImage& a, const RasterImage& b, double max_value = 1.0);

// Single-scale SSIM of one plane with 8x8 uniform windows at stride 1,
// C1 = (0.01 L)^2, C2 = (0.03 L)^2, averaged over all windows.
double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height, double dynamic_range);
// Channel-averaged SSIM of two RGB images.
double ssim(const RasterImage& a, const RasterImage& b, double dynamic_range = 1.0);

// Mean Euclidean distance between corresponding points.
double lmd(const Points2d& pred, const Points2d& gt);
// Per-frame lmd averaged over frames.
double lmd(const std::vector<Points2d>& pred, const std::vector<Points2d>& gt);

}  // namespace gsf::metrics
