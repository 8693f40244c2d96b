#include "gsf/metrics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace gsf::metrics {

std::string MetricReport::to_json() const {
  nlohmann::json j;
  // JSON has no infinity; identical frames are reported as the string "inf".
  if (std::isinf(psnr))
    j["psnr"] = "inf";
  else
    j["psnr"] = psnr;
  j["ssim"] = ssim;
  j["lmd"] = lmd;
  j["frames"] = frames;
  return j.dump();
}

double mse(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.empty()) throw std::invalid_argument("mse: inputs must be non-empty and equal length");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
  return acc / static_cast<double>(a.size());
}

double psnr(std::span<const double> a, std::span<const double> b, double max_value) {
  const double e = mse(a, b);
  if (e == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / e);
}

double psnr(const RasterImage& a, const RasterImage& b, double max_value) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("psnr: image sizes differ");
  return psnr(a.rgb, b.rgb, max_value);
}

double ssim_plane(std::span<const double> a, std::span<const double> b, int width, int height, double dynamic_range) {
  constexpr int kWin = 8;
  if (a.size() != b.size() || a.size() != static_cast<std::size_t>(width) * height)
    throw std::invalid_argument("ssim: plane size mismatch");
  if (width < kWin || height < kWin) throw std::invalid_argument("ssim: image smaller than the 8x8 window");
  const double c1 = (0.01 * dynamic_range) * (0.01 * dynamic_range);
  const double c2 = (0.03 * dynamic_range) * (0.03 * dynamic_range);
  const int rows = height - kWin + 1, cols = width - kWin + 1;
  const double n = kWin * kWin;
  std::vector<double> row_sums(static_cast<std::size_t>(rows), 0.0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < rows; ++y) {
    double acc = 0.0;
    for (int x = 0; x < cols; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = 0; dy < kWin; ++dy)
        for (int dx = 0; dx < kWin; ++dx) {
          const std::size_t i = static_cast<std::size_t>(y + dy) * width + (x + dx);
          sa += a[i];
          sb += b[i];
          saa += a[i] * a[i];
          sbb += b[i] * b[i];
          sab += a[i] * b[i];
        }
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    row_sums[static_cast<std::size_t>(y)] = acc;
  }
  double total = 0.0;
  for (double s : row_sums) total += s;
  return total / static_cast<double>(rows * cols);
}

double ssim(const RasterImage& a, const RasterImage& b, double dynamic_range) {
  if (a.width != b.width || a.height != b.height) throw std::invalid_argument("ssim: image sizes differ");
  double acc = 0.0;
  std::vector<double> pa(a.pixel_count()), pb(a.pixel_count());
  for (int c = 0; c < 3; ++c) {
    for (std::size_t p = 0; p < a.pixel_count(); ++p) {
      pa[p] = a.rgb[p * 3 + c];
      pb[p] = b.rgb[p * 3 + c];
    }
    acc += ssim_plane(pa, pb, a.width, a.height, dynamic_range);
  }
  return acc / 3.0;
}

double lmd(const Points2d& pred, const Points2d& gt) {
  if (pred.rows() != gt.rows() || pred.rows() == 0) throw std::invalid_argument("lmd: point sets must be non-empty and equal size");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < pred.rows(); ++i) acc += (pred.row(i) - gt.row(i)).norm();
  return acc / static_cast<double>(pred.rows());
}

double lmd(const std::vector<Points2d>& pred, const std::vector<Points2d>& gt) {
  if (pred.size() != gt.size() || pred.empty()) throw std::invalid_argument("lmd: frame counts differ or are zero");
  double acc = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) acc += lmd(pred[t], gt[t]);
  return acc / static_cast<double>(pred.size());
}

}  // namespace gsf::metrics
