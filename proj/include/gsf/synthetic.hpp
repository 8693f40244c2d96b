#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gsf/audio.hpp"
#include "gsf/face3dmm.hpp"
#include "gsf/image.hpp"
#include "gsf/rasterizer.hpp"

namespace gsf::synth {

inline constexpr int kFps = 25;
inline constexpr int kSamplesPerFrame = audio::kSampleRate / kFps;  // 640

struct BasisOptions {
  std::size_t grid = 8;    // grid x grid vertices
  std::size_t k_id = 16;
  std::size_t k_exp = 64;
  std::size_t k_tex = 16;
};

// Mouth threshold for synthetic bases, in meters (origin at the nose).
inline constexpr double kSyntheticMouthY = -0.02;

// A face-like height field over a vertex grid, in meters with the origin at
// the nose. Expression column 0 opens the jaw; the remaining columns are
// small smooth deformation fields. All values are representable as f32.
face::FaceBasis make_synthetic_basis(std::uint64_t seed, const BasisOptions& options = {});

struct ClipBundle {
  std::vector<face::CoeffSet> coeffs;
  audio::Waveform waveform;
  std::vector<RasterImage> frames;
  std::size_t reference_index = 0;
  std::size_t identity = 0;
  int fps = kFps;
  int sample_rate = audio::kSampleRate;
  render::Camera camera;

  bool operator==(const ClipBundle& o) const;
};

struct ClipOptions {
  int image_size = 64;
  std::size_t identity = 0;
  // Amplitude of the jaw channel, which follows the audio loudness envelope.
  double jaw_amplitude = 1.0;
  // Amplitude of the slow, audio-independent motion on channels 1..7.
  double wobble_amplitude = 0.05;
};

render::Camera default_camera(int image_size);

// Per-vertex shading used for "real" target frames; plain renders omit it.
face::Vertices shade_colors(const face::FaceBasis& basis, const face::Vertices& posed, const face::Vertices& albedo);

// Smooth coefficient trajectories, an amplitude-modulated tone mixture whose
// envelope drives beta channel 0, and shaded target frames over a textured
// background. Audio length is exactly T * 640 samples.
ClipBundle make_synthetic_clip(std::uint64_t seed, std::size_t frames, const face::FaceBasis& basis,
                               const ClipOptions& options = {});

// Loudness envelope at a time in seconds; beta channel 0 equals
// jaw_amplitude times this value at frame times.
double clip_envelope(std::uint64_t seed, double seconds);

// Directory layout: clip.json, coeffs.jsonl, audio.wav, frames/frame_%06d.ppm.
void save_clip(const std::string& dir, const ClipBundle& clip);
ClipBundle load_clip(const std::string& dir, std::size_t k_exp);

std::string frame_name(std::size_t index);

}  // namespace gsf::synth
