#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "doctest.h"
#include "gsf/taft.hpp"
#include "test_support.hpp"

using namespace gsf;
using namespace gsf::testing;

namespace {

ad::Var image_var(const RasterImage& img) { return ad::constant(taft::image_to_tensor(img)); }

taft::GeneratorConfig small_config(std::size_t width, std::size_t depth, bool skips = true) {
  taft::GeneratorConfig c;
  c.base_width = width;
  c.depth = depth;
  c.skip_connections = skips;
  return c;
}

std::vector<taft::TaftSample> random_samples(std::size_t n, int size, std::mt19937_64& rng) {
  std::vector<taft::TaftSample> out;
  for (std::size_t i = 0; i < n; ++i)
    out.push_back({random_image(size, size, rng), random_image(size, size, rng), random_image(size, size, rng)});
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  REQUIRE(a.shape() == b.shape());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_SUITE("taft") {
  TEST_CASE("image tensor conversion round trips") {
    std::mt19937_64 rng(40);
    const RasterImage img = random_image(7, 5, rng);
    const Tensor t = taft::image_to_tensor(img);
    CHECK(t.shape() == Shape{3, 5, 7});
    CHECK(t.at(2, 4, 6) == img.at(6, 4, 2));
    CHECK(taft::tensor_to_image(t) == img);
    CHECK_THROWS_AS(taft::tensor_to_image(Tensor({4, 2, 2})), std::invalid_argument);
  }

  TEST_CASE("photometric loss") {
    std::mt19937_64 rng(41);
    const RasterImage a = random_image(6, 4, rng);
    CHECK(taft::photometric_loss(image_var(a), image_var(a)).item() == 0.0);
    RasterImage b = a;
    for (auto& v : b.rgb) v += 0.5;
    CHECK(taft::photometric_loss(image_var(a), image_var(b)).item() == doctest::Approx(0.5).epsilon(1e-14));
    const RasterImage c = random_image(6, 4, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < a.rgb.size(); ++i) acc += std::abs(a.rgb[i] - c.rgb[i]);
    CHECK(taft::photometric_loss(image_var(a), image_var(c)).item() ==
          doctest::Approx(acc / static_cast<double>(a.rgb.size())).epsilon(1e-13));
    CHECK_THROWS_AS(taft::photometric_loss(image_var(a), image_var(random_image(4, 6, rng))), std::invalid_argument);
  }

  TEST_CASE("pyramid of a constant image stays constant") {
    const auto levels = taft::pyramid_downsample(image_var(RasterImage(16, 8, 0.3)), 3);
    REQUIRE(levels.size() == 3);
    CHECK(levels[1].shape() == Shape{3, 4, 8});
    CHECK(levels[2].shape() == Shape{3, 2, 4});
    for (const auto& l : levels)
      for (double v : l.value().data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));
    CHECK_THROWS_AS(taft::pyramid_downsample(image_var(RasterImage(4, 4)), 0), std::invalid_argument);
  }

  TEST_CASE("pyramid averages 2x2 blocks") {
    RasterImage checker(2, 2);
    for (int c = 0; c < 3; ++c) {
      checker.at(1, 0, c) = 1.0;
      checker.at(0, 1, c) = 1.0;
    }
    const auto levels = taft::pyramid_downsample(image_var(checker), 2);
    CHECK(levels[1].value() == Tensor({3, 1, 1}, 0.5));

    std::mt19937_64 rng(42);
    const RasterImage img = random_image(8, 8, rng);
    const auto p = taft::pyramid_downsample(image_var(img), 3);
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
          const double expected =
              (img.at(2 * x, 2 * y, c) + img.at(2 * x + 1, 2 * y, c) + img.at(2 * x, 2 * y + 1, c) +
               img.at(2 * x + 1, 2 * y + 1, c)) / 4.0;
          CHECK(p[1].value().at(c, y, x) == doctest::Approx(expected).epsilon(1e-14));
        }
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 2; ++y)
        for (int x = 0; x < 2; ++x) {
          double acc = 0.0;
          for (int dy = 0; dy < 4; ++dy)
            for (int dx = 0; dx < 4; ++dx) acc += img.at(4 * x + dx, 4 * y + dy, c);
          CHECK(p[2].value().at(c, y, x) == doctest::Approx(acc / 16.0).epsilon(1e-13));
        }
  }

  TEST_CASE("perceptual loss is zero on identical images and symmetric") {
    const taft::FeatureStack stack(7);
    std::mt19937_64 rng(43);
    const RasterImage a = random_image(32, 32, rng), b = random_image(32, 32, rng);
    CHECK(taft::perceptual_loss(image_var(a), image_var(a), stack).item() == 0.0);
    const double ab = taft::perceptual_loss(image_var(a), image_var(b), stack).item();
    const double ba = taft::perceptual_loss(image_var(b), image_var(a), stack).item();
    CHECK(ab > 0.0);
    CHECK(ab == doctest::Approx(ba).epsilon(1e-14));
  }

  TEST_CASE("feature stack is deterministic per seed") {
    std::mt19937_64 rng(44);
    const ad::Var img = image_var(random_image(16, 16, rng));
    const auto f1 = taft::FeatureStack(7).features(img);
    const auto f2 = taft::FeatureStack(7).features(img);
    const auto f3 = taft::FeatureStack(8).features(img);
    REQUIRE(f1.size() == 3);
    CHECK(f1[0].shape() == Shape{8, 8, 8});
    CHECK(f1[2].shape() == Shape{32, 2, 2});
    for (std::size_t k = 0; k < 3; ++k) CHECK(f1[k].value() == f2[k].value());
    CHECK(f1[0].value() != f3[0].value());
  }

  TEST_CASE("gram matrix hand example") {
    const Tensor f({2, 2, 2}, {1, 2, 3, 4, 0, 1, 0, 1});
    const Tensor g = taft::gram_matrix(ad::constant(f)).value();
    CHECK(g.at(0, 0) == doctest::Approx(30.0 / 8.0).epsilon(1e-15));
    CHECK(g.at(0, 1) == doctest::Approx(6.0 / 8.0).epsilon(1e-15));
    CHECK(g.at(1, 0) == doctest::Approx(6.0 / 8.0).epsilon(1e-15));
    CHECK(g.at(1, 1) == doctest::Approx(2.0 / 8.0).epsilon(1e-15));
    CHECK_THROWS_AS(taft::gram_matrix(ad::constant(Tensor({2, 2}))), std::invalid_argument);
  }

  TEST_CASE("gram matrix of channels with disjoint support is diagonal") {
    Tensor f({3, 4, 4});
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t i = 0; i < 4; ++i) f.at(c, c, i) = 1.0 + static_cast<double>(i);
    const Tensor g = taft::gram_matrix(ad::constant(f)).value();
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j)
        if (i != j) CHECK(g.at(i, j) == 0.0);
    CHECK(g.at(1, 1) == doctest::Approx(30.0 / 48.0).epsilon(1e-15));
  }

  TEST_CASE("gram matrix is symmetric positive semidefinite") {
    std::mt19937_64 rng(45);
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor g = taft::gram_matrix(ad::constant(random_tensor({5, 3, 4}, rng))).value();
      Eigen::MatrixXd m(5, 5);
      for (std::size_t i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < 5; ++j) m(i, j) = g.at(i, j);
      CHECK((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-15);
      CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(m).eigenvalues().minCoeff() > -1e-12);
    }
  }

  TEST_CASE("style loss is zero on identical images and symmetric") {
    const taft::FeatureStack stack(7);
    std::mt19937_64 rng(46);
    const RasterImage a = random_image(16, 16, rng), b = random_image(16, 16, rng);
    CHECK(taft::style_loss(image_var(a), image_var(a), stack).item() == 0.0);
    const double ab = taft::style_loss(image_var(a), image_var(b), stack).item();
    CHECK(ab > 0.0);
    CHECK(ab == doctest::Approx(taft::style_loss(image_var(b), image_var(a), stack).item()).epsilon(1e-14));
  }

  TEST_CASE("total loss is the weighted sum of its terms") {
    const taft::FeatureStack stack(7);
    std::mt19937_64 rng(47);
    const ad::Var a = image_var(random_image(16, 16, rng)), b = image_var(random_image(16, 16, rng));
    CHECK(taft::total_loss(a, a, {}, stack).item() == 0.0);
    const double photo = taft::photometric_loss(a, b).item();
    const double perc = taft::perceptual_loss(a, b, stack).item();
    const double style = taft::style_loss(a, b, stack).item();
    CHECK(taft::total_loss(a, b, {1.0, 0.0, 0.0}, stack).item() == doctest::Approx(photo).epsilon(1e-14));
    CHECK(taft::total_loss(a, b, {}, stack).item() ==
          doctest::Approx(1.0 * photo + 4.0 * perc + 1000.0 * style).epsilon(1e-13));
    CHECK(taft::total_loss(a, b, {0.5, 2.0, 3.0}, stack).item() ==
          doctest::Approx(0.5 * photo + 2.0 * perc + 3.0 * style).epsilon(1e-13));
    CHECK_THROWS_AS(taft::total_loss(a, b, {-1.0, 0.0, 0.0}, stack), std::invalid_argument);
  }

  TEST_CASE("generator output shape and range") {
    std::mt19937_64 rng(48);
    const taft::Generator g(taft::GeneratorConfig{}, 1);
    for (int size : {32, 64}) {
      const Tensor out = g.forward(taft::concat_inputs(random_image(size, size, rng), random_image(size, size, rng))).value();
      CHECK(out.shape() == Shape{3, static_cast<std::size_t>(size), static_cast<std::size_t>(size)});
      for (double v : out.data()) CHECK_UNARY(v > 0.0 && v < 1.0);
    }
    const RasterImage r = g.run(random_image(32, 16, rng), random_image(32, 16, rng));
    CHECK(r.width == 32);
    CHECK(r.height == 16);
  }

  TEST_CASE("generator rejects indivisible sizes and wrong channel counts") {
    std::mt19937_64 rng(49);
    const taft::Generator g(taft::GeneratorConfig{}, 1);
    CHECK_THROWS_AS(g.run(random_image(36, 32, rng), random_image(36, 32, rng)), std::invalid_argument);
    CHECK_THROWS_AS(g.forward(ad::constant(Tensor({3, 32, 32}))), std::invalid_argument);
    CHECK_THROWS_AS(g.run(random_image(32, 32, rng), random_image(16, 16, rng)), std::invalid_argument);
  }

  TEST_CASE("generator initialization is seeded") {
    const taft::Generator a(taft::GeneratorConfig{}, 3), b(taft::GeneratorConfig{}, 3), c(taft::GeneratorConfig{}, 4);
    const auto sa = a.state(), sb = b.state(), sc = c.state();
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].value == sb[i].value);
    CHECK(sa[0].value != sc[0].value);
  }

  TEST_CASE("skip connections widen the decoder inputs") {
    const taft::Generator with(small_config(4, 2, true), 0), without(small_config(4, 2, false), 0);
    auto find = [](const taft::Generator& g, const std::string& name) {
      for (const auto& t : g.state())
        if (t.name == name) return t.value.shape();
      return Shape{};
    };
    CHECK(find(with, "dec0.w") == Shape{4, 12, 3, 3});
    CHECK(find(without, "dec0.w") == Shape{4, 8, 3, 3});
    CHECK(find(with, "dec1.w") == Shape{8, 24, 3, 3});
  }

  TEST_CASE("shifting the input shifts the interior of the output") {
    std::mt19937_64 rng(50);
    const taft::Generator g(small_config(4, 1), 2);
    const RasterImage a = random_image(48, 48, rng), b = random_image(48, 48, rng);
    RasterImage as(48, 48), bs(48, 48);
    constexpr int kShift = 2;
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x)
        for (int c = 0; c < 3; ++c) {
          as.at(x, y, c) = a.at((x + kShift) % 48, y, c);
          bs.at(x, y, c) = b.at((x + kShift) % 48, y, c);
        }
    const Tensor out = g.forward(taft::concat_inputs(a, b)).value();
    const Tensor shifted = g.forward(taft::concat_inputs(as, bs)).value();
    double worst = 0.0;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t y = 12; y < 36; ++y)
        for (std::size_t x = 12; x < 34; ++x)
          worst = std::max(worst, std::abs(shifted.at(c, y, x) - out.at(c, y, x + kShift)));
    CHECK(worst < 1e-12);
  }

  TEST_CASE("gradient of the total loss with respect to generator weights") {
    std::mt19937_64 rng(51);
    const taft::Generator g(small_config(2, 2), 3);
    const taft::FeatureStack stack(7, {4, 4});
    const RasterImage blended = random_image(16, 16, rng), reference = random_image(16, 16, rng);
    const ad::Var target = image_var(random_image(16, 16, rng));
    const auto result = gradcheck(
        [&] { return taft::total_loss(g.forward(taft::concat_inputs(blended, reference)), target, {1.0, 4.0, 1000.0}, stack, 2); },
        g.parameters());
    INFO("worst " << result.worst << " kinks " << result.skipped_kinks);
    CHECK(result.checked > 300);
    CHECK(result.max_rel_error < 1e-4);
  }

  TEST_CASE("training is bit-reproducible and logs evaluation checkpoints") {
    std::mt19937_64 rng(52);
    const auto data = random_samples(3, 16, rng);
    taft::TaftTrainOptions opt;
    opt.steps = 7;
    opt.eval_every = 3;
    opt.seed = 9;
    taft::Generator a(small_config(4, 2), 5), b(small_config(4, 2), 5);
    const auto ra = taft::train_taft(a, data, opt);
    const auto rb = taft::train_taft(b, data, opt);
    CHECK(ra.step_loss == rb.step_loss);
    CHECK(ra.eval_loss == rb.eval_loss);
    REQUIRE(ra.eval_loss.size() == 4);
    CHECK(ra.eval_loss[0].first == 0);
    CHECK(ra.eval_loss[1].first == 3);
    CHECK(ra.eval_loss[3].first == 7);
    const auto sa = a.state(), sb = b.state();
    for (std::size_t i = 0; i < sa.size(); ++i) CHECK(sa[i].value == sb[i].value);
    CHECK(ra.eval_loss[0].second ==
          doctest::Approx(taft::dataset_loss(taft::Generator(small_config(4, 2), 5), data, taft::FeatureStack(7), {}, 3)));
  }

  TEST_CASE("batched updates average the per-sample gradients") {
    std::mt19937_64 rng(53);
    const auto data = random_samples(2, 16, rng);
    taft::TaftTrainOptions opt;
    opt.steps = 1;
    opt.batch_size = 2;
    taft::Generator g(small_config(4, 2), 6);
    const auto r = taft::train_taft(g, data, opt);
    CHECK(r.step_loss[0] == doctest::Approx(r.eval_loss[0].second).epsilon(1e-12));
  }

  TEST_CASE("training rejects an empty dataset") {
    taft::Generator g(small_config(4, 2), 0);
    CHECK_THROWS_AS(taft::train_taft(g, {}, {}), std::invalid_argument);
  }

  TEST_CASE("generator checkpoint round trip") {
    std::mt19937_64 rng(54);
    const taft::Generator g(small_config(4, 2, false), 8);
    const auto path = scratch_dir("taft_ckpt") / "gen.gswt";
    taft::save_generator(path.string(), g);
    const taft::Generator loaded = taft::load_generator(path.string());
    CHECK(loaded.config().base_width == 4);
    CHECK(loaded.config().depth == 2);
    CHECK_FALSE(loaded.config().skip_connections);
    const ad::Var in = taft::concat_inputs(random_image(16, 16, rng), random_image(16, 16, rng));
    CHECK(max_abs_diff(g.forward(in).value(), loaded.forward(in).value()) < 1e-5);
  }
}
