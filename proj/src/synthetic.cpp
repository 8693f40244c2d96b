#include "gsf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <stdexcept>

#include "gsf/io.hpp"
#include "gsf/pipeline.hpp"
#include "json.hpp"

namespace gsf::synth {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

// Random smooth scalar field over the face plane.
struct Wave {
  double fx, fy, phase, amp;
  double operator()(double x, double y) const { return amp * std::sin(fx * x + fy * y + phase); }
};

Wave random_wave(std::mt19937_64& rng, double amp) {
  std::uniform_real_distribution<double> freq(-40.0, 40.0), phase(0.0, kTwoPi), scale(0.5, 1.0);
  return {freq(rng), freq(rng), phase(rng), amp * scale(rng)};
}

struct EnvelopeParams {
  double f1, f2, p1, p2;
};

EnvelopeParams envelope_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> f1(1.0, 1.6), f2(2.2, 3.0), ph(0.0, kTwoPi);
  return {f1(rng), f2(rng), ph(rng), ph(rng)};
}

}  // namespace

face::FaceBasis make_synthetic_basis(std::uint64_t seed, const BasisOptions& options) {
  if (options.grid < 2) throw std::invalid_argument("make_synthetic_basis: grid must be at least 2");
  std::mt19937_64 rng(seed);
  const std::size_t g = options.grid, n = g * g;
  const auto rows = static_cast<Eigen::Index>(3 * n);
  face::FaceBasis b;
  b.n_vertices = n;
  b.mean_shape.resize(rows);
  b.mean_texture.resize(rows);
  b.basis_id = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(options.k_id));
  b.basis_exp = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(options.k_exp));
  b.basis_tex = Eigen::MatrixXd::Zero(rows, static_cast<Eigen::Index>(options.k_tex));

  std::vector<double> xs(n), ys(n);
  for (std::size_t j = 0; j < g; ++j) {
    for (std::size_t i = 0; i < g; ++i) {
      const std::size_t v = j * g + i;
      const double x = -0.08 + 0.16 * static_cast<double>(i) / static_cast<double>(g - 1);
      const double y = 0.08 - 0.18 * static_cast<double>(j) / static_cast<double>(g - 1);
      const double z = 0.04 * (1.0 - (x / 0.1) * (x / 0.1) - (y / 0.12) * (y / 0.12));
      xs[v] = x;
      ys[v] = y;
      b.mean_shape.segment<3>(static_cast<Eigen::Index>(3 * v)) << f32(x), f32(y), f32(z);
      const bool lips = y < -0.03 && y > -0.075 && std::fabs(x) < 0.045;
      const double r = lips ? 0.72 : 0.86, gg = lips ? 0.32 : 0.66, bb = lips ? 0.34 : 0.56;
      b.mean_texture.segment<3>(static_cast<Eigen::Index>(3 * v)) << f32(r), f32(gg), f32(bb);
    }
  }

  for (std::size_t k = 0; k < options.k_id; ++k) {
    const Wave wx = random_wave(rng, 0.004), wy = random_wave(rng, 0.004), wz = random_wave(rng, 0.004);
    for (std::size_t v = 0; v < n; ++v)
      b.basis_id.block<3, 1>(static_cast<Eigen::Index>(3 * v), static_cast<Eigen::Index>(k))
          << f32(wx(xs[v], ys[v])), f32(wy(xs[v], ys[v])), f32(wz(xs[v], ys[v]));
  }
  for (std::size_t k = 0; k < options.k_exp; ++k) {
    if (k == 0) {
      // Jaw opening: points below the nose move down and slightly back.
      for (std::size_t v = 0; v < n; ++v) {
        const double drop = ys[v] < 0.0 ? -ys[v] / 0.10 : 0.0;
        b.basis_exp.block<3, 1>(static_cast<Eigen::Index>(3 * v), 0) << 0.0, f32(-0.02 * drop), f32(-0.005 * drop);
      }
      continue;
    }
    const Wave wx = random_wave(rng, 0.002), wy = random_wave(rng, 0.002), wz = random_wave(rng, 0.002);
    for (std::size_t v = 0; v < n; ++v)
      b.basis_exp.block<3, 1>(static_cast<Eigen::Index>(3 * v), static_cast<Eigen::Index>(k))
          << f32(wx(xs[v], ys[v])), f32(wy(xs[v], ys[v])), f32(wz(xs[v], ys[v]));
  }
  for (std::size_t k = 0; k < options.k_tex; ++k) {
    const Wave w = random_wave(rng, 0.04);
    for (std::size_t v = 0; v < n; ++v) {
      const double d = f32(w(xs[v], ys[v]));
      b.basis_tex.block<3, 1>(static_cast<Eigen::Index>(3 * v), static_cast<Eigen::Index>(k)) << d, d, d;
    }
  }

  for (std::size_t j = 0; j + 1 < g; ++j) {
    for (std::size_t i = 0; i + 1 < g; ++i) {
      const auto v00 = static_cast<std::uint32_t>(j * g + i), v10 = v00 + 1;
      const auto v01 = static_cast<std::uint32_t>((j + 1) * g + i), v11 = v01 + 1;
      b.triangles.push_back({v00, v01, v10});
      b.triangles.push_back({v10, v01, v11});
    }
  }
  b.validate();
  return b;
}

render::Camera default_camera(int image_size) {
  render::Camera cam;
  cam.width = image_size;
  cam.height = image_size;
  cam.focal = 1.95 * image_size;
  cam.cx = image_size / 2.0;
  cam.cy = image_size / 2.0;
  return cam;
}

face::Vertices shade_colors(const face::FaceBasis& basis, const face::Vertices& posed, const face::Vertices& albedo) {
  face::Vertices normals = face::Vertices::Zero(posed.rows(), 3);
  for (const auto& t : basis.triangles) {
    const Eigen::Vector3d a = posed.row(t[0]), b = posed.row(t[1]), c = posed.row(t[2]);
    const Eigen::Vector3d nrm = (b - a).cross(c - a);
    for (auto i : t) normals.row(i) += nrm.transpose();
  }
  const Eigen::Vector3d light = Eigen::Vector3d(0.3, 0.5, 1.0).normalized();
  face::Vertices out(posed.rows(), 3);
  for (Eigen::Index i = 0; i < posed.rows(); ++i) {
    Eigen::Vector3d nrm = normals.row(i).transpose();
    if (nrm.norm() > 0.0) nrm.normalize();
    // Grid winding gives -z normals for a +z bulge; orient toward the viewer.
    if (nrm.z() < 0.0) nrm = -nrm;
    const double shade = 0.55 + 0.45 * std::max(0.0, nrm.dot(light));
    out.row(i) = albedo.row(i) * shade;
  }
  return out;
}

double clip_envelope(std::uint64_t seed, double s) {
  const EnvelopeParams p = envelope_params(seed);
  const double e = 0.5 + 0.35 * std::sin(kTwoPi * p.f1 * s + p.p1) + 0.15 * std::sin(kTwoPi * p.f2 * s + p.p2);
  return std::clamp(e, 0.0, 1.0);
}

ClipBundle make_synthetic_clip(std::uint64_t seed, std::size_t frames, const face::FaceBasis& basis,
                               const ClipOptions& options) {
  if (frames == 0) throw std::invalid_argument("make_synthetic_clip: need at least one frame");
  basis.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0), phase(0.0, kTwoPi), slow(0.2, 0.8);

  ClipBundle clip;
  clip.identity = options.identity;
  clip.camera = default_camera(options.image_size);

  Eigen::VectorXd alpha(static_cast<Eigen::Index>(basis.k_id()));
  for (auto& a : alpha) a = unit(rng);
  Eigen::VectorXd delta(static_cast<Eigen::Index>(basis.k_tex()));
  for (auto& d : delta) d = 0.5 * unit(rng);

  const std::size_t k = basis.k_exp();
  const std::size_t wobble_channels = std::min<std::size_t>(k, 8);
  std::vector<double> f(wobble_channels), ph(wobble_channels);
  for (std::size_t j = 0; j < wobble_channels; ++j) {
    f[j] = slow(rng);
    ph[j] = phase(rng);
  }
  const double yaw_f = slow(rng), yaw_p = phase(rng), pitch_p = phase(rng);

  for (std::size_t t = 0; t < frames; ++t) {
    const double s = (static_cast<double>(t) + 0.5) / kFps;
    face::CoeffSet c;
    c.alpha = alpha;
    c.delta = delta;
    c.beta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k));
    c.beta[0] = options.jaw_amplitude * clip_envelope(seed, s);
    for (std::size_t j = 1; j < wobble_channels; ++j)
      c.beta[static_cast<Eigen::Index>(j)] = options.wobble_amplitude * std::sin(kTwoPi * f[j] * s + ph[j]);
    c.rotation = Eigen::Vector3d(0.05 * std::sin(kTwoPi * 0.3 * s + pitch_p), 0.15 * std::sin(kTwoPi * yaw_f * s + yaw_p), 0.0);
    c.translation = Eigen::Vector3d(0.0, 0.01, 0.0);
    clip.coeffs.push_back(std::move(c));
  }

  const std::size_t n_samples = frames * kSamplesPerFrame;
  clip.waveform.pcm.resize(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const double s = static_cast<double>(i) / audio::kSampleRate;
    const double tone = 0.5 * std::sin(kTwoPi * 220.0 * s) + 0.3 * std::sin(kTwoPi * 440.0 * s) +
                        0.2 * std::sin(kTwoPi * 880.0 * s);
    clip.waveform.pcm[i] = static_cast<std::int16_t>(std::lround(0.6 * 32767.0 * clip_envelope(seed, s) * tone));
  }

  // Static textured background.
  const int size = options.image_size;
  RasterImage background(size, size);
  const Wave bg_r = random_wave(rng, 0.15), bg_g = random_wave(rng, 0.15), bg_b = random_wave(rng, 0.15);
  std::uniform_real_distribution<double> grain(-0.04, 0.04);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double u = static_cast<double>(x) / size * 0.2, v = static_cast<double>(y) / size * 0.2;
      background.at(x, y, 0) = 0.35 + bg_r(u, v) + grain(rng);
      background.at(x, y, 1) = 0.45 + bg_g(u, v) + grain(rng);
      background.at(x, y, 2) = 0.55 + bg_b(u, v) + grain(rng);
    }

  clip.frames.resize(frames);
#pragma omp parallel for schedule(static)
  for (long t = 0; t < static_cast<long>(frames); ++t) {
    const auto& c = clip.coeffs[static_cast<std::size_t>(t)];
    const face::Vertices posed = face::apply_pose(face::evaluate_shape(basis, c.alpha, c.beta), c.rotation, c.translation);
    const face::Vertices colors = shade_colors(basis, posed, face::evaluate_texture(basis, c.delta));
    const render::RenderOutput r = render::rasterize(pipeline::to_camera_space(posed), colors, basis.triangles, clip.camera);
    RasterImage frame = background;
    for (std::size_t p = 0; p < frame.pixel_count(); ++p)
      if (r.face_mask.bits[p])
        for (int ch = 0; ch < 3; ++ch) frame.rgb[p * 3 + ch] = r.color.rgb[p * 3 + ch];
    clip.frames[static_cast<std::size_t>(t)] = quantize8(frame);
  }
  clip.reference_index = 0;
  return clip;
}

bool ClipBundle::operator==(const ClipBundle& o) const {
  return coeffs == o.coeffs && waveform == o.waveform && frames == o.frames && reference_index == o.reference_index &&
         identity == o.identity && fps == o.fps && sample_rate == o.sample_rate && camera.focal == o.camera.focal &&
         camera.cx == o.camera.cx && camera.cy == o.camera.cy && camera.width == o.camera.width &&
         camera.height == o.camera.height;
}

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frame_%06zu.ppm", index);
  return buf;
}

void save_clip(const std::string& dir, const ClipBundle& clip) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "frames");
  nlohmann::json meta;
  meta["frames"] = clip.frames.size();
  meta["fps"] = clip.fps;
  meta["sample_rate"] = clip.sample_rate;
  meta["identity"] = clip.identity;
  meta["reference_index"] = clip.reference_index;
  meta["camera"] = {{"focal", clip.camera.focal}, {"cx", clip.camera.cx}, {"cy", clip.camera.cy},
                    {"width", clip.camera.width}, {"height", clip.camera.height}};
  std::ofstream(fs::path(dir) / "clip.json") << meta.dump(2) << "\n";
  io::save_coeffs((fs::path(dir) / "coeffs.jsonl").string(), clip.coeffs);
  audio::write_wav((fs::path(dir) / "audio.wav").string(), clip.waveform);
  for (std::size_t t = 0; t < clip.frames.size(); ++t)
    write_ppm((fs::path(dir) / "frames" / frame_name(t)).string(), clip.frames[t]);
}

ClipBundle load_clip(const std::string& dir, std::size_t k_exp) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "clip.json");
  if (!in) throw std::runtime_error("clip '" + dir + "': missing clip.json");
  const nlohmann::json meta = nlohmann::json::parse(in);
  ClipBundle clip;
  clip.fps = meta.at("fps").get<int>();
  clip.sample_rate = meta.at("sample_rate").get<int>();
  clip.identity = meta.at("identity").get<std::size_t>();
  clip.reference_index = meta.at("reference_index").get<std::size_t>();
  const auto& cam = meta.at("camera");
  clip.camera.focal = cam.at("focal").get<double>();
  clip.camera.cx = cam.at("cx").get<double>();
  clip.camera.cy = cam.at("cy").get<double>();
  clip.camera.width = cam.at("width").get<int>();
  clip.camera.height = cam.at("height").get<int>();
  clip.coeffs = io::load_coeffs((fs::path(dir) / "coeffs.jsonl").string(), k_exp);
  clip.waveform = audio::read_wav((fs::path(dir) / "audio.wav").string());
  const auto n = meta.at("frames").get<std::size_t>();
  if (n != clip.coeffs.size())
    throw std::runtime_error("clip '" + dir + "': " + std::to_string(clip.coeffs.size()) + " coefficient frames for " +
                             std::to_string(n) + " video frames");
  for (std::size_t t = 0; t < n; ++t) clip.frames.push_back(read_ppm((fs::path(dir) / "frames" / frame_name(t)).string()));
  if (clip.reference_index >= n) throw std::runtime_error("clip '" + dir + "': reference index out of range");
  return clip;
}

}  // namespace gsf::synth
