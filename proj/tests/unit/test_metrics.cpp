#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "gsf/metrics.hpp"
#include "json.hpp"
#include "test_support.hpp"

using namespace gsf;
using namespace gsf::testing;

namespace {

double oracle_ssim_plane(const std::vector<double>& a, const std::vector<double>& b, int w, int h, double l) {
  const double c1 = (0.01 * l) * (0.01 * l), c2 = (0.03 * l) * (0.03 * l);
  double total = 0.0;
  int windows = 0;
  for (int y0 = 0; y0 + 8 <= h; ++y0)
    for (int x0 = 0; x0 + 8 <= w; ++x0) {
      double ma = 0, mb = 0;
      for (int y = y0; y < y0 + 8; ++y)
        for (int x = x0; x < x0 + 8; ++x) {
          ma += a[y * w + x];
          mb += b[y * w + x];
        }
      ma /= 64;
      mb /= 64;
      double va = 0, vb = 0, cov = 0;
      for (int y = y0; y < y0 + 8; ++y)
        for (int x = x0; x < x0 + 8; ++x) {
          const double da = a[y * w + x] - ma, db = b[y * w + x] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      va /= 64;
      vb /= 64;
      cov /= 64;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++windows;
    }
  return total / windows;
}

metrics::Points2d random_points(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-50, 50);
  metrics::Points2d p(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) p.row(i) << u(rng), u(rng);
  return p;
}

}  // namespace

TEST_SUITE("metrics") {
  TEST_CASE("psnr with unit squared error at 8-bit range") {
    const std::vector<double> a{10, 20, 30, 40}, b{11, 19, 31, 39};
    CHECK(metrics::psnr(a, b, 255.0) == doctest::Approx(48.1308).epsilon(1e-5));
    CHECK(std::abs(metrics::psnr(a, b, 255.0) - 48.1308) < 1e-3);
  }

  TEST_CASE("psnr of identical inputs is infinite") {
    std::mt19937_64 rng(60);
    const RasterImage img = random_image(9, 9, rng);
    const double v = metrics::psnr(img, img);
    CHECK(std::isinf(v));
    CHECK(v > 0);
  }

  TEST_CASE("psnr is symmetric and matches the closed form") {
    std::mt19937_64 rng(61);
    const RasterImage a = random_image(12, 10, rng), b = random_image(12, 10, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) acc += (a.rgb[i] - b.rgb[i]) * (a.rgb[i] - b.rgb[i]);
    const double expected = 10.0 * std::log10(1.0 / (acc / static_cast<double>(a.rgb.size())));
    CHECK(metrics::psnr(a, b) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(metrics::psnr(a, b) == metrics::psnr(b, a));
    CHECK_THROWS_AS(metrics::psnr(a, random_image(10, 12, rng)), std::invalid_argument);
    CHECK_THROWS_AS(metrics::mse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  }

  TEST_CASE("ssim of identical images is exactly one") {
    std::mt19937_64 rng(62);
    for (int trial = 0; trial < 5; ++trial) {
      const RasterImage img = random_image(8 + trial * 5, 8 + trial * 3, rng);
      CHECK(metrics::ssim(img, img) == 1.0);
    }
    const RasterImage flat(16, 16, 0.4);
    CHECK(metrics::ssim(flat, flat) == 1.0);
  }

  TEST_CASE("ssim matches a direct windowed oracle") {
    std::mt19937_64 rng(63);
    const RasterImage a = random_image(16, 16, rng);
    RasterImage b = a;
    std::normal_distribution<double> noise(0.0, 0.1);
    for (auto& v : b.rgb) v += noise(rng);
    double expected = 0.0;
    for (int c = 0; c < 3; ++c) {
      std::vector<double> pa(256), pb(256);
      for (int p = 0; p < 256; ++p) {
        pa[p] = a.rgb[p * 3 + c];
        pb[p] = b.rgb[p * 3 + c];
      }
      expected += oracle_ssim_plane(pa, pb, 16, 16, 1.0) / 3.0;
    }
    CHECK(metrics::ssim(a, b) == doctest::Approx(expected).epsilon(1e-10));
    CHECK(metrics::ssim(a, b) == doctest::Approx(metrics::ssim(b, a)).epsilon(1e-14));
  }

  TEST_CASE("ssim stays within [-1, 1]") {
    std::mt19937_64 rng(64);
    for (int trial = 0; trial < 20; ++trial) {
      const RasterImage a = random_image(12, 12, rng), b = random_image(12, 12, rng);
      const double s = metrics::ssim(a, b);
      CHECK(s <= 1.0);
      CHECK(s >= -1.0);
    }
    RasterImage inv(12, 12);
    const RasterImage a = random_image(12, 12, rng);
    for (std::size_t i = 0; i < a.rgb.size(); ++i) inv.rgb[i] = 1.0 - a.rgb[i];
    CHECK(metrics::ssim(a, inv) < 0.0);
  }

  TEST_CASE("ssim rejects images smaller than the window") {
    const RasterImage a(7, 20);
    CHECK_THROWS_AS(metrics::ssim(a, a), std::invalid_argument);
    CHECK_THROWS_AS(metrics::ssim(RasterImage(8, 8), RasterImage(9, 8)), std::invalid_argument);
  }

  TEST_CASE("lmd of a (3, 4) shift is 5") {
    std::mt19937_64 rng(65);
    const metrics::Points2d gt = random_points(20, rng);
    metrics::Points2d pred = gt;
    pred.col(0).array() += 3.0;
    pred.col(1).array() += 4.0;
    CHECK(std::abs(metrics::lmd(pred, gt) - 5.0) < 1e-9);
  }

  TEST_CASE("lmd matches a per-point oracle and is translation equivariant") {
    std::mt19937_64 rng(66);
    const metrics::Points2d a = random_points(15, rng), b = random_points(15, rng);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < 15; ++i) acc += std::hypot(a(i, 0) - b(i, 0), a(i, 1) - b(i, 1));
    CHECK(metrics::lmd(a, b) == doctest::Approx(acc / 15.0).epsilon(1e-13));
    metrics::Points2d as = a, bs = b;
    as.col(0).array() += 17.5;
    bs.col(0).array() += 17.5;
    as.col(1).array() -= 3.25;
    bs.col(1).array() -= 3.25;
    CHECK(metrics::lmd(as, bs) == doctest::Approx(metrics::lmd(a, b)).epsilon(1e-12));
    CHECK(metrics::lmd(std::vector<metrics::Points2d>{a, a}, std::vector<metrics::Points2d>{b, a}) ==
          doctest::Approx(acc / 30.0).epsilon(1e-13));
    CHECK_THROWS_AS(metrics::lmd(a, random_points(3, rng)), std::invalid_argument);
    CHECK_THROWS_AS(metrics::lmd(std::vector<metrics::Points2d>{}, std::vector<metrics::Points2d>{}),
                    std::invalid_argument);
  }

  TEST_CASE("report serializes infinite psnr as a string") {
    metrics::MetricReport r;
    r.psnr = std::numeric_limits<double>::infinity();
    r.ssim = 1.0;
    r.lmd = 0.0;
    r.frames = 4;
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j["psnr"] == "inf");
    CHECK(j["ssim"] == 1.0);
    CHECK(j["frames"] == 4);
    r.psnr = 31.5;
    CHECK(nlohmann::json::parse(r.to_json())["psnr"] == 31.5);
  }
}
