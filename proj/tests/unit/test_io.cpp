#include <fstream>
#include <random>

#include "doctest.h"
#include "gsf/image.hpp"
#include "gsf/io.hpp"
#include "test_support.hpp"

using namespace gsf;
using namespace gsf::testing;

namespace {

template <typename M>
M f32(M m) {
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
  return m;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

face::CoeffSet random_coeffs(std::mt19937_64& rng, std::size_t k_exp) {
  face::CoeffSet c;
  c.beta = random_vector(static_cast<Eigen::Index>(k_exp), rng);
  c.alpha = random_vector(4, rng);
  c.delta = random_vector(3, rng);
  c.rotation = Eigen::Vector3d(0.1, -0.2, 0.05);
  c.translation = Eigen::Vector3d(0.01, 0.0, -0.3);
  return c;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("basis round trip at f32 precision") {
    std::mt19937_64 rng(70);
    face::FaceBasis b = random_basis(12, 3, 5, 2, rng);
    b.triangles = {{0, 1, 2}, {2, 3, 11}};
    const auto path = scratch_dir("io_basis") / "basis.fb3d";
    io::save_basis(path.string(), b);
    const face::FaceBasis r = io::load_basis(path.string());
    CHECK(r.n_vertices == 12);
    CHECK(r.mean_shape == f32(b.mean_shape));
    CHECK(r.mean_texture == f32(b.mean_texture));
    CHECK(r.basis_id == f32(b.basis_id));
    CHECK(r.basis_exp == f32(b.basis_exp));
    CHECK(r.basis_tex == f32(b.basis_tex));
    CHECK(r.triangles == b.triangles);
    const std::string bytes = slurp(path);
    CHECK(bytes.substr(0, 4) == "FB3D");
    CHECK(bytes.size() == 4 + 2 + 5 * 4 + 4 * 36 * (2 + 3 + 5 + 2) + 4 * 6);
  }

  TEST_CASE("truncated basis names expected and actual lengths") {
    std::mt19937_64 rng(71);
    const face::FaceBasis b = random_basis(6, 2, 2, 2, rng);
    const auto path = scratch_dir("io_basis_trunc") / "basis.fb3d";
    io::save_basis(path.string(), b);
    std::string bytes = slurp(path);
    const std::size_t full = bytes.size();
    bytes.resize(full - 10);
    spit(path, bytes);
    const std::string msg = error_of([&] { io::load_basis(path.string()); });
    CHECK(msg.find("expected " + std::to_string(full)) != std::string::npos);
    CHECK(msg.find("actual length " + std::to_string(full - 10)) != std::string::npos);
  }

  TEST_CASE("basis header errors") {
    const auto dir = scratch_dir("io_basis_bad");
    spit(dir / "magic.fb3d", std::string("XXXX\x01\x00", 6));
    CHECK(error_of([&] { io::load_basis((dir / "magic.fb3d").string()); }).find("bad magic") != std::string::npos);
    spit(dir / "version.fb3d", std::string("FB3D\x07\x00", 6));
    CHECK(error_of([&] { io::load_basis((dir / "version.fb3d").string()); }).find("unsupported version 7") !=
          std::string::npos);
    spit(dir / "short.fb3d", std::string("FB3D\x01\x00\x02", 7));
    CHECK(error_of([&] { io::load_basis((dir / "short.fb3d").string()); }).find("truncated") != std::string::npos);
    CHECK_THROWS_AS(io::load_basis((dir / "missing.fb3d").string()), std::runtime_error);
  }

  TEST_CASE("out of range triangle index is rejected") {
    std::mt19937_64 rng(72);
    face::FaceBasis b = random_basis(4, 1, 1, 1, rng);
    b.triangles = {{0, 1, 3}};
    const auto path = scratch_dir("io_basis_tri") / "basis.fb3d";
    io::save_basis(path.string(), b);
    std::string bytes = slurp(path);
    bytes[bytes.size() - 4] = 4;
    spit(path, bytes);
    CHECK(error_of([&] { io::load_basis(path.string()); }).find("triangle index 4") != std::string::npos);
  }

  TEST_CASE("coefficient round trip") {
    std::mt19937_64 rng(73);
    std::vector<face::CoeffSet> frames;
    for (int i = 0; i < 4; ++i) frames.push_back(random_coeffs(rng, 6));
    const auto path = scratch_dir("io_coeffs") / "coeffs.jsonl";
    io::save_coeffs(path.string(), frames);
    const auto loaded = io::load_coeffs(path.string(), 6);
    REQUIRE(loaded.size() == 4);
    for (int i = 0; i < 4; ++i) {
      CHECK(loaded[i].beta == frames[i].beta);
      CHECK(loaded[i].alpha == frames[i].alpha);
      CHECK(loaded[i].delta == frames[i].delta);
      CHECK(loaded[i].rotation == frames[i].rotation);
      CHECK(loaded[i].translation == frames[i].translation);
    }
  }

  TEST_CASE("beta-only lines are accepted") {
    const auto path = scratch_dir("io_coeffs_min") / "coeffs.jsonl";
    spit(path, "{\"beta\": [1, 2]}\n\n{\"beta\": [3, 4.5]}\n");
    const auto loaded = io::load_coeffs(path.string(), 2);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[1].beta(1) == 4.5);
  }

  TEST_CASE("wrong beta length names the frame") {
    const auto path = scratch_dir("io_coeffs_len") / "coeffs.jsonl";
    std::string text;
    for (int f = 0; f < 3; ++f) {
      text += "{\"beta\": [";
      const int n = f == 2 ? 63 : 64;
      for (int i = 0; i < n; ++i) text += (i ? ",0" : "0");
      text += "]}\n";
    }
    spit(path, text);
    const std::string msg = error_of([&] { io::load_coeffs(path.string(), 64); });
    CHECK(msg.find("frame 2") != std::string::npos);
    CHECK(msg.find("63 entries, expected 64") != std::string::npos);
  }

  TEST_CASE("malformed coefficient lines") {
    const auto dir = scratch_dir("io_coeffs_bad");
    spit(dir / "json.jsonl", "{\"beta\": [1, 2]\n");
    CHECK(error_of([&] { io::load_coeffs((dir / "json.jsonl").string(), 2); }).find("invalid JSON") != std::string::npos);
    spit(dir / "nobeta.jsonl", "{\"alpha\": [1]}\n");
    CHECK(error_of([&] { io::load_coeffs((dir / "nobeta.jsonl").string(), 2); }).find("missing") != std::string::npos);
    spit(dir / "rot.jsonl", "{\"beta\": [1, 2], \"rotation\": [1, 2]}\n");
    CHECK(error_of([&] { io::load_coeffs((dir / "rot.jsonl").string(), 2); }).find("rotation") != std::string::npos);
  }

  TEST_CASE("config parsing") {
    const io::Config c = io::Config::parse("# comment\n steps = 40 \nlr=1e-4 # trailing\n\nname = toy run\n");
    CHECK(c.get("steps", std::size_t{0}) == 40);
    CHECK(c.get("lr", 0.0) == 1e-4);
    CHECK(c.get("name", std::string("x")) == "toy run");
    CHECK(c.get("absent", 2.5) == 2.5);
    CHECK_FALSE(c.has("absent"));
    CHECK_THROWS_AS(io::Config::parse("novalue\n"), std::runtime_error);
    const io::Config bad = io::Config::parse("steps = many\nneg = -3\n");
    CHECK_THROWS_AS(bad.get("steps", 0.0), std::runtime_error);
    CHECK_THROWS_AS(bad.get("neg", std::size_t{0}), std::runtime_error);
    const auto path = scratch_dir("io_config") / "run.cfg";
    spit(path, "seed = 9\n");
    CHECK(io::Config::load(path.string()).get("seed", std::size_t{0}) == 9);
    CHECK_THROWS_AS(io::Config::load((path.parent_path() / "missing.cfg").string()), std::runtime_error);
  }

  TEST_CASE("ppm and pgm round trips") {
    std::mt19937_64 rng(74);
    const RasterImage img = quantize8(random_image(11, 7, rng));
    const auto dir = scratch_dir("io_pnm");
    write_ppm((dir / "a.ppm").string(), img);
    CHECK(read_ppm((dir / "a.ppm").string()) == img);
    const BinaryMask mask = random_mask(9, 5, rng);
    write_pgm((dir / "m.pgm").string(), mask);
    CHECK(read_pgm_mask((dir / "m.pgm").string()) == mask);
    CHECK(slurp(dir / "a.ppm").substr(0, 2) == "P6");
  }

  TEST_CASE("ppm writing clamps and rounds") {
    RasterImage img(2, 1);
    img.rgb = {-0.5, 0.5, 1.5, 0.2, 1.0 / 255.0, 0.999};
    const auto path = scratch_dir("io_ppm_clamp") / "c.ppm";
    write_ppm(path.string(), img);
    const RasterImage r = read_ppm(path.string());
    CHECK(r.rgb[0] == 0.0);
    CHECK(r.rgb[1] == 128.0 / 255.0);
    CHECK(r.rgb[2] == 1.0);
    CHECK(r.rgb[3] == 51.0 / 255.0);
    CHECK(r.rgb[4] == 1.0 / 255.0);
    CHECK(r.rgb[5] == 1.0);
  }

  TEST_CASE("truncated pixel data is reported") {
    std::mt19937_64 rng(75);
    const auto path = scratch_dir("io_ppm_trunc") / "t.ppm";
    write_ppm(path.string(), random_image(4, 4, rng));
    std::string bytes = slurp(path);
    bytes.resize(bytes.size() - 5);
    spit(path, bytes);
    CHECK(error_of([&] { read_ppm(path.string()); }).find("truncated") != std::string::npos);
    spit(path, "P5\n2 2\n255\n0000");
    CHECK(error_of([&] { read_ppm(path.string()); }).find("expected P6") != std::string::npos);
  }
}
