#include "gsf/pipeline.hpp"

#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <stdexcept>

namespace gsf::pipeline {

face::Vertices to_camera_space(const face::Vertices& posed) {
  face::Vertices out = posed;
  out.col(2) = (kCameraDistance - posed.col(2).array()).matrix();
  return out;
}

FrameRender render_coeffs(const face::FaceBasis& basis, const face::CoeffSet& coeffs, const render::Camera& camera) {
  FrameRender fr;
  fr.posed = face::apply_pose(face::evaluate_shape(basis, coeffs.alpha, coeffs.beta), coeffs.rotation, coeffs.translation);
  const face::Vertices albedo = face::evaluate_texture(basis, coeffs.delta);
  fr.output = render::rasterize(to_camera_space(fr.posed), albedo, basis.triangles, camera);
  return fr;
}

metrics::Points2d project_points(const face::Vertices& posed, const std::vector<std::size_t>& indices,
                                 const render::Camera& camera) {
  const auto proj = render::project_perspective(to_camera_space(posed), camera);
  metrics::Points2d pts(static_cast<Eigen::Index>(indices.size()), 2);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    pts(static_cast<Eigen::Index>(i), 0) = proj[indices[i]].u;
    pts(static_cast<Eigen::Index>(i), 1) = proj[indices[i]].v;
  }
  return pts;
}

RunResult run_pipeline(const synth::ClipBundle& clip, const face::FaceBasis& basis, const a2ep::A2EPModel* a2ep_model,
                       const taft::Generator* generator, const RunFlags& flags) {
  const std::size_t frames = clip.frames.size();
  if (frames == 0 || clip.coeffs.size() != frames)
    throw std::invalid_argument("run_pipeline: clip has " + std::to_string(clip.coeffs.size()) + " coefficient frames and " +
                                std::to_string(frames) + " video frames");
  if (!flags.force_ground_truth_beta && !a2ep_model) throw std::invalid_argument("run_pipeline: missing A2EP weights");
  if (!flags.bypass_generator && !generator) throw std::invalid_argument("run_pipeline: missing generator weights");

  const std::size_t k = basis.k_exp();
  RunResult res;
  if (flags.force_ground_truth_beta) {
    res.predicted_betas = Tensor({frames, k});
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t j = 0; j < k; ++j) res.predicted_betas.at(t, j) = clip.coeffs[t].beta[static_cast<Eigen::Index>(j)];
  } else {
    const auto features = audio::audio_frontend(clip.waveform);
    res.predicted_betas = a2ep_model->infer_autoregressive(features.frames, flags.identity.value_or(clip.identity), frames);
  }

  const auto mouth = face::lower_mouth_indices(basis, flags.mouth_y_threshold);
  const auto& lmd_indices = mouth.indices.empty() ? std::vector<std::size_t>{0} : mouth.indices;
  const mafb::StructuringElement closer(flags.close_size);
  const RasterImage& reference = clip.frames.at(clip.reference_index);

  res.blended.resize(frames);
  res.frames.resize(frames);
  res.masks.resize(frames);
  std::vector<metrics::Points2d> pred_pts(frames), gt_pts(frames);

#pragma omp parallel for schedule(static)
  for (long lt = 0; lt < static_cast<long>(frames); ++lt) {
    const auto t = static_cast<std::size_t>(lt);
    Eigen::VectorXd beta(static_cast<Eigen::Index>(k));
    for (std::size_t j = 0; j < k; ++j) beta[static_cast<Eigen::Index>(j)] = res.predicted_betas.at(t, j);
    const face::CoeffSet combined = mafb::combine_params(clip.coeffs[t], beta);
    const FrameRender fr = render_coeffs(basis, combined, clip.camera);
    res.masks[t] = mafb::morph_close(fr.output.face_mask, closer);
    res.blended[t] = quantize8(mafb::blend({fr.output.color, clip.frames[t], res.masks[t]}));
    res.frames[t] = flags.bypass_generator ? res.blended[t] : quantize8(generator->run(res.blended[t], reference));

    const face::Vertices gt_posed = face::apply_pose(
        face::evaluate_shape(basis, clip.coeffs[t].alpha, clip.coeffs[t].beta), clip.coeffs[t].rotation,
        clip.coeffs[t].translation);
    pred_pts[t] = project_points(fr.posed, lmd_indices, clip.camera);
    gt_pts[t] = project_points(gt_posed, lmd_indices, clip.camera);
  }

  // Frames identical to their target are skipped in the PSNR mean; all identical gives +inf.
  double psnr_acc = 0.0, ssim_acc = 0.0;
  std::size_t finite = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double p = metrics::psnr(res.frames[t], clip.frames[t], 1.0);
    if (!std::isinf(p)) {
      psnr_acc += p;
      ++finite;
    }
    ssim_acc += metrics::ssim(res.frames[t], clip.frames[t], 1.0);
  }
  res.report.psnr = finite == 0 ? std::numeric_limits<double>::infinity() : psnr_acc / static_cast<double>(finite);
  res.report.ssim = ssim_acc / static_cast<double>(frames);
  res.report.lmd = metrics::lmd(pred_pts, gt_pts);
  res.report.frames = frames;

  if (!flags.output_dir.empty()) {
    std::filesystem::create_directories(flags.output_dir);
    for (std::size_t t = 0; t < frames; ++t)
      write_ppm((std::filesystem::path(flags.output_dir) / synth::frame_name(t)).string(), res.frames[t]);
  }
  return res;
}

std::vector<taft::TaftSample> make_taft_samples(const synth::ClipBundle& clip, const face::FaceBasis& basis,
                                                std::uint64_t seed, bool augment) {
  std::mt19937_64 rng(seed);
  std::vector<taft::TaftSample> out;
  const mafb::StructuringElement closer(9);
  for (std::size_t t = 0; t < clip.frames.size(); ++t) {
    const FrameRender fr = render_coeffs(basis, clip.coeffs[t], clip.camera);
    const BinaryMask mask = augment ? mafb::augment_mask(fr.output.face_mask, rng) : mafb::morph_close(fr.output.face_mask, closer);
    out.push_back({quantize8(mafb::blend({fr.output.color, clip.frames[t], mask})), clip.frames[clip.reference_index],
                   clip.frames[t]});
  }
  return out;
}

a2ep::A2EPSample make_a2ep_sample(const synth::ClipBundle& clip, const face::FaceBasis& basis) {
  a2ep::A2EPSample s;
  s.waveform = clip.waveform;
  s.identity = clip.identity;
  const std::size_t k = basis.k_exp();
  s.betas = Tensor({clip.coeffs.size(), k});
  for (std::size_t t = 0; t < clip.coeffs.size(); ++t)
    for (std::size_t j = 0; j < k; ++j) s.betas.at(t, j) = clip.coeffs[t].beta[static_cast<Eigen::Index>(j)];
  s.template_vertices = face::template_face(basis, face::mean_identity(clip.coeffs));
  return s;
}

}  // namespace gsf::pipeline
