#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gsf/a2ep.hpp"
#include "gsf/face3dmm.hpp"
#include "gsf/mafb.hpp"
#include "gsf/metrics.hpp"
#include "gsf/rasterizer.hpp"
#include "gsf/synthetic.hpp"
#include "gsf/taft.hpp"

namespace gsf::pipeline {

// The camera sits on the +z axis looking back at the face, which points +z.
inline constexpr double kCameraDistance = 0.5;

// (x, y, z) -> (x, y, kCameraDistance - z)
face::Vertices to_camera_space(const face::Vertices& posed);

struct FrameRender {
  render::RenderOutput output;
  face::Vertices posed;
};

// Plain (unshaded) render of one coefficient set.
FrameRender render_coeffs(const face::FaceBasis& basis, const face::CoeffSet& coeffs, const render::Camera& camera);

// Projected positions of the given vertices (LMD landmark proxy).
metrics::Points2d project_points(const face::Vertices& posed, const std::vector<std::size_t>& indices,
                                 const render::Camera& camera);

struct RunFlags {
  bool bypass_generator = false;
  bool force_ground_truth_beta = false;
  std::optional<std::size_t> identity;  // defaults to the clip's identity
  int close_size = 9;
  double mouth_y_threshold = synth::kSyntheticMouthY;
  std::string output_dir;  // frames are written here when non-empty
};

struct RunResult {
  Tensor predicted_betas;              // [T, k_exp]
  std::vector<RasterImage> blended;    // quantized
  std::vector<RasterImage> frames;     // quantized output frames
  std::vector<BinaryMask> masks;       // closed face masks
  metrics::MetricReport report;
};

// Audio -> expressions -> parameter swap -> render -> mask closing and blend
// -> generator -> metrics against the clip's frames. Frames after expression
// inference are processed in parallel; outputs are deterministic.
RunResult run_pipeline(const synth::ClipBundle& clip, const face::FaceBasis& basis, const a2ep::A2EPModel* a2ep_model,
                       const taft::Generator* generator, const RunFlags& flags);

// Training triples for the generator: blend of the ground-truth render with
// the target under an augmented mask, the clip's reference frame, and the target.
std::vector<taft::TaftSample> make_taft_samples(const synth::ClipBundle& clip, const face::FaceBasis& basis,
                                                std::uint64_t seed, bool augment = true);

// A2EP training sample with the speaker template from the clip's own identity coefficients.
a2ep::A2EPSample make_a2ep_sample(const synth::ClipBundle& clip, const face::FaceBasis& basis);

}  // namespace gsf::pipeline
