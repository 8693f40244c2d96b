#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gsf/a2ep.hpp"
#include "gsf/io.hpp"
#include "gsf/pipeline.hpp"
#include "gsf/synthetic.hpp"
#include "gsf/taft.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gsf;

namespace {

void emit(const json& j) { std::cout << j.dump() << std::endl; }

// Options that were not given on the command line take their value from the
// --config file, keyed by the long option name without dashes.
std::string long_name(const CLI::Option* opt) {
  const auto& names = opt->get_lnames();
  return names.empty() ? std::string() : names.front();
}

void apply_config(CLI::App& sub, const std::string& config_path) {
  if (config_path.empty()) return;
  const io::Config cfg = io::Config::load(config_path);
  const std::vector<CLI::Option*> options = sub.get_options();
  for (CLI::Option* opt : options) {
    const std::string key = long_name(opt);
    if (key == "config" || key == "help" || opt->count() > 0 || !cfg.has(key)) continue;
    std::string value = cfg.get(key, std::string());
    if (opt->get_type_size() == 0) value = (value == "1" || value == "true") ? "true" : "false";
    opt->add_result(value);
    opt->run_callback();
  }
  for (const auto& [key, value] : cfg.values()) {
    const bool known = std::any_of(options.begin(), options.end(),
                                   [&](const CLI::Option* o) { return long_name(o) == key; });
    if (!known) throw std::runtime_error("config '" + config_path + "': unknown key '" + key + "' for " + sub.get_name());
  }
}

std::vector<synth::ClipBundle> load_clips(const std::vector<std::string>& dirs, std::size_t k_exp) {
  std::vector<synth::ClipBundle> clips;
  for (const auto& d : dirs) clips.push_back(synth::load_clip(d, k_exp));
  return clips;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<RasterImage> read_frames(const std::string& dir) {
  std::vector<RasterImage> out;
  for (std::size_t t = 0;; ++t) {
    const fs::path p = fs::path(dir) / synth::frame_name(t);
    if (!fs::exists(p)) break;
    out.push_back(read_ppm(p.string()));
  }
  if (out.empty()) throw std::runtime_error("no frames named frame_%06d.ppm in '" + dir + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GSmoothFace desk-scale pipeline"};
  app.require_subcommand(1);

  struct Common {
    std::uint64_t seed = 0;
    std::string config;
  };
  std::vector<std::pair<CLI::App*, Common*>> subs;
  std::vector<std::unique_ptr<Common>> commons;
  auto add_sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* s = app.add_subcommand(name, desc);
    commons.push_back(std::make_unique<Common>());
    s->add_option("--seed", commons.back()->seed, "Random seed");
    s->add_option("--config", commons.back()->config, "key=value settings file");
    subs.emplace_back(s, commons.back().get());
    return s;
  };

  // gen-basis
  synth::BasisOptions basis_opt;
  std::string basis_out;
  CLI::App* gen_basis = add_sub("gen-basis", "Write a synthetic face basis (FB3D)");
  gen_basis->add_option("--out", basis_out, "Output basis file")->required();
  gen_basis->add_option("--grid", basis_opt.grid, "Vertices per grid side");
  gen_basis->add_option("--k-id", basis_opt.k_id, "Identity coefficients");
  gen_basis->add_option("--k-exp", basis_opt.k_exp, "Expression coefficients");
  gen_basis->add_option("--k-tex", basis_opt.k_tex, "Texture coefficients");

  // gen-clip
  std::string basis_path, clip_out;
  std::size_t clip_frames = 25;
  synth::ClipOptions clip_opt;
  CLI::App* gen_clip = add_sub("gen-clip", "Write a synthetic talking-face clip");
  gen_clip->add_option("--basis", basis_path, "Basis file")->required();
  gen_clip->add_option("--out", clip_out, "Output clip directory")->required();
  gen_clip->add_option("--frames", clip_frames, "Frame count");
  gen_clip->add_option("--size", clip_opt.image_size, "Image side in pixels");
  gen_clip->add_option("--identity", clip_opt.identity, "Speaker identity index");
  gen_clip->add_option("--jaw", clip_opt.jaw_amplitude, "Jaw channel amplitude");
  gen_clip->add_option("--wobble", clip_opt.wobble_amplitude, "Audio-independent motion amplitude");

  // render
  std::string coeffs_path, render_out;
  int render_size = 64;
  CLI::App* render_cmd = add_sub("render", "Render coefficient frames to images and face masks");
  render_cmd->add_option("--basis", basis_path, "Basis file")->required();
  render_cmd->add_option("--coeffs", coeffs_path, "Coefficients (JSONL)")->required();
  render_cmd->add_option("--out", render_out, "Output directory")->required();
  render_cmd->add_option("--size", render_size, "Image side in pixels");

  // blend
  std::string blend_rendered, blend_target, blend_mask, blend_out;
  int close_size = 9;
  CLI::App* blend_cmd = add_sub("blend", "Close a face mask and blend a render into a target frame");
  blend_cmd->add_option("--rendered", blend_rendered, "Rendered face (PPM)")->required();
  blend_cmd->add_option("--target", blend_target, "Target frame (PPM)")->required();
  blend_cmd->add_option("--mask", blend_mask, "Face mask (PGM)")->required();
  blend_cmd->add_option("--out", blend_out, "Output image (PPM)")->required();
  blend_cmd->add_option("--close", close_size, "Closing kernel side (odd)");

  // train-a2ep
  std::vector<std::string> clip_dirs;
  std::string model_out;
  a2ep::A2EPConfig a2ep_cfg;
  a2ep::A2EPTrainOptions a2ep_opt;
  a2ep_opt.mouth_y_threshold = synth::kSyntheticMouthY;
  std::size_t log_every = 10;
  CLI::App* train_a2ep_cmd = add_sub("train-a2ep", "Train the audio-to-expression model");
  train_a2ep_cmd->add_option("--basis", basis_path, "Basis file")->required();
  train_a2ep_cmd->add_option("--clip", clip_dirs, "Clip directories")->required();
  train_a2ep_cmd->add_option("--out", model_out, "Output checkpoint")->required();
  train_a2ep_cmd->add_option("--steps", a2ep_opt.steps, "Adam steps");
  train_a2ep_cmd->add_option("--lr", a2ep_opt.lr, "Learning rate");
  train_a2ep_cmd->add_option("--lambda-m", a2ep_opt.lambda_m, "Mouth vertex weight");
  train_a2ep_cmd->add_option("--mouth-y", a2ep_opt.mouth_y_threshold, "Mouth threshold on mean-shape y");
  train_a2ep_cmd->add_option("--sigma1", a2ep_cfg.sigma1, "Audio frames visible before the aligned one");
  train_a2ep_cmd->add_option("--sigma2", a2ep_cfg.sigma2, "Audio frames visible from the aligned one on");
  train_a2ep_cmd->add_option("--d-model", a2ep_cfg.d_model, "Model width");
  train_a2ep_cmd->add_option("--heads", a2ep_cfg.decoder_heads, "Cross-attention heads");
  train_a2ep_cmd->add_option("--self-heads", a2ep_cfg.self_heads, "Self-attention heads");
  train_a2ep_cmd->add_option("--ff", a2ep_cfg.ff_width, "Feed-forward width");
  train_a2ep_cmd->add_option("--log-every", log_every, "Steps between log lines");

  // infer-a2ep
  std::string model_path, wav_path, clip_dir, coeffs_out;
  std::size_t infer_frames = 0, identity = 0;
  CLI::App* infer_cmd = add_sub("infer-a2ep", "Predict expression coefficients from audio");
  infer_cmd->add_option("--model", model_path, "A2EP checkpoint")->required();
  auto* wav_opt = infer_cmd->add_option("--wav", wav_path, "16 kHz mono WAV");
  auto* clip_opt_in = infer_cmd->add_option("--clip", clip_dir, "Clip directory (uses its audio)");
  wav_opt->excludes(clip_opt_in);
  infer_cmd->add_option("--frames", infer_frames, "Frame count (default: audio length at 25 fps)");
  infer_cmd->add_option("--identity", identity, "Speaker identity index");
  infer_cmd->add_option("--out", coeffs_out, "Output coefficients (JSONL)")->required();

  // train-taft
  std::string generator_out;
  taft::GeneratorConfig gen_cfg;
  taft::TaftTrainOptions taft_opt;
  bool no_skip = false, no_augment = false;
  std::size_t taft_log_every = 50;
  CLI::App* train_taft_cmd = add_sub("train-taft", "Train the face translation generator on one clip");
  train_taft_cmd->add_option("--basis", basis_path, "Basis file")->required();
  train_taft_cmd->add_option("--clip", clip_dir, "Clip directory")->required();
  train_taft_cmd->add_option("--out", generator_out, "Output checkpoint")->required();
  train_taft_cmd->add_option("--steps", taft_opt.steps, "Adam steps");
  train_taft_cmd->add_option("--lr", taft_opt.lr, "Learning rate");
  train_taft_cmd->add_option("--width", gen_cfg.base_width, "Base channel width");
  train_taft_cmd->add_option("--depth", gen_cfg.depth, "Downsampling levels");
  train_taft_cmd->add_option("--batch", taft_opt.batch_size, "Samples per update");
  train_taft_cmd->add_option("--photo", taft_opt.weights.photo, "Photometric weight");
  train_taft_cmd->add_option("--perc", taft_opt.weights.perc, "Perceptual weight");
  train_taft_cmd->add_option("--style", taft_opt.weights.style, "Style weight");
  train_taft_cmd->add_flag("--no-skip", no_skip, "Disable skip connections");
  train_taft_cmd->add_flag("--no-augment", no_augment, "Use plain closed masks for the training blends");
  train_taft_cmd->add_option("--log-every", taft_log_every, "Steps between evaluation log lines");

  // run
  std::string a2ep_path, generator_path, run_out;
  pipeline::RunFlags run_flags;
  std::size_t run_identity = 0;
  CLI::App* run_cmd = add_sub("run", "Run the full pipeline on a clip and report metrics");
  run_cmd->add_option("--basis", basis_path, "Basis file")->required();
  run_cmd->add_option("--clip", clip_dir, "Clip directory")->required();
  run_cmd->add_option("--a2ep", a2ep_path, "A2EP checkpoint");
  run_cmd->add_option("--generator", generator_path, "Generator checkpoint");
  run_cmd->add_option("--out", run_out, "Output frame directory");
  run_cmd->add_flag("--bypass-generator", run_flags.bypass_generator, "Emit blended frames directly");
  run_cmd->add_flag("--gt-beta", run_flags.force_ground_truth_beta, "Use the clip's own expression coefficients");
  auto* run_id_opt = run_cmd->add_option("--identity", run_identity, "Speaker identity index");
  run_cmd->add_option("--close", run_flags.close_size, "Closing kernel side (odd)");
  run_cmd->add_option("--mouth-y", run_flags.mouth_y_threshold, "Mouth threshold for LMD points");

  // eval
  std::string pred_dir, target_dir, pred_coeffs, gt_coeffs;
  int eval_size = 64;
  CLI::App* eval_cmd = add_sub("eval", "Compare two frame directories");
  eval_cmd->add_option("--pred", pred_dir, "Predicted frame directory")->required();
  eval_cmd->add_option("--target", target_dir, "Target frame directory")->required();
  eval_cmd->add_option("--basis", basis_path, "Basis file (for LMD)");
  eval_cmd->add_option("--pred-coeffs", pred_coeffs, "Predicted coefficients (for LMD)");
  eval_cmd->add_option("--gt-coeffs", gt_coeffs, "Ground-truth coefficients (for LMD)");
  eval_cmd->add_option("--size", eval_size, "Image side used for LMD projection");
  eval_cmd->add_option("--mouth-y", run_flags.mouth_y_threshold, "Mouth threshold for LMD points");

  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* active = nullptr;
    Common* common = nullptr;
    for (auto& [s, c] : subs)
      if (s->parsed()) {
        active = s;
        common = c;
      }
    apply_config(*active, common->config);
    const std::uint64_t seed = common->seed;
    const std::string cmd = active->get_name();
    const auto t0 = std::chrono::steady_clock::now();

    if (cmd == "gen-basis") {
      const face::FaceBasis b = synth::make_synthetic_basis(seed, basis_opt);
      io::save_basis(basis_out, b);
      emit({{"command", cmd}, {"out", basis_out}, {"vertices", b.n_vertices}, {"triangles", b.triangles.size()},
            {"k_id", b.k_id()}, {"k_exp", b.k_exp()}, {"k_tex", b.k_tex()}, {"seed", seed}});
    } else if (cmd == "gen-clip") {
      const face::FaceBasis b = io::load_basis(basis_path);
      const auto clip = synth::make_synthetic_clip(seed, clip_frames, b, clip_opt);
      synth::save_clip(clip_out, clip);
      emit({{"command", cmd}, {"out", clip_out}, {"frames", clip.frames.size()},
            {"samples", clip.waveform.pcm.size()}, {"size", clip_opt.image_size}, {"seed", seed}});
    } else if (cmd == "render") {
      const face::FaceBasis b = io::load_basis(basis_path);
      const auto frames = io::load_coeffs(coeffs_path, b.k_exp());
      const render::Camera cam = synth::default_camera(render_size);
      fs::create_directories(render_out);
      std::size_t lit = 0;
      for (std::size_t t = 0; t < frames.size(); ++t) {
        face::CoeffSet c = frames[t];
        if (c.alpha.size() == 0) c.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.k_id()));
        if (c.delta.size() == 0) c.delta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.k_tex()));
        const auto fr = pipeline::render_coeffs(b, c, cam);
        write_ppm((fs::path(render_out) / synth::frame_name(t)).string(), fr.output.color);
        char name[32];
        std::snprintf(name, sizeof(name), "mask_%06zu.pgm", t);
        write_pgm((fs::path(render_out) / name).string(), fr.output.face_mask);
        lit += fr.output.face_mask.count();
      }
      emit({{"command", cmd}, {"out", render_out}, {"frames", frames.size()}, {"lit_pixels", lit}});
    } else if (cmd == "blend") {
      const RasterImage rendered = read_ppm(blend_rendered), target = read_ppm(blend_target);
      const BinaryMask mask = read_pgm_mask(blend_mask);
      const BinaryMask closed = mafb::morph_close(mask, mafb::StructuringElement(close_size));
      write_ppm(blend_out, mafb::blend({rendered, target, closed}));
      emit({{"command", cmd}, {"out", blend_out}, {"mask_pixels", mask.count()}, {"closed_pixels", closed.count()}});
    } else if (cmd == "train-a2ep") {
      const face::FaceBasis b = io::load_basis(basis_path);
      const auto clips = load_clips(clip_dirs, b.k_exp());
      std::vector<a2ep::A2EPSample> data;
      std::size_t identities = 1;
      for (const auto& c : clips) {
        data.push_back(pipeline::make_a2ep_sample(c, b));
        identities = std::max(identities, c.identity + 1);
      }
      a2ep_cfg.k_exp = b.k_exp();
      a2ep_cfg.n_identities = identities;
      a2ep::A2EPModel model(a2ep_cfg, seed);
      a2ep_opt.seed = seed;
      const auto r = a2ep::train_a2ep(model, data, b, a2ep_opt);
      for (std::size_t s = 0; s < r.step_loss.size(); ++s)
        if (log_every && (s % log_every == 0 || s + 1 == r.step_loss.size()))
          emit({{"command", cmd}, {"step", s}, {"loss", r.step_loss[s]}});
      a2ep::save_model(model_out, model);
      const double first = r.step_loss.empty() ? 0.0 : r.step_loss.front();
      const double last = r.step_loss.empty() ? 0.0 : r.step_loss.back();
      emit({{"command", cmd}, {"out", model_out}, {"steps", r.step_loss.size()}, {"initial_loss", first},
            {"final_loss", last}, {"ratio", first > 0.0 ? last / first : 0.0}, {"seconds", seconds_since(t0)}});
    } else if (cmd == "infer-a2ep") {
      const a2ep::A2EPModel model = a2ep::load_model(model_path);
      audio::Waveform wave;
      if (!wav_path.empty())
        wave = audio::read_wav(wav_path);
      else if (!clip_dir.empty())
        wave = audio::read_wav((fs::path(clip_dir) / "audio.wav").string());
      else
        throw std::runtime_error("infer-a2ep: give --wav or --clip");
      const std::size_t frames = infer_frames ? infer_frames : std::max<std::size_t>(1, wave.pcm.size() / synth::kSamplesPerFrame);
      const Tensor betas = model.infer_autoregressive(audio::audio_frontend(wave).frames, identity, frames);
      std::vector<face::CoeffSet> out(frames);
      for (std::size_t t = 0; t < frames; ++t) {
        out[t].beta.resize(static_cast<Eigen::Index>(betas.dim(1)));
        for (std::size_t j = 0; j < betas.dim(1); ++j) out[t].beta[static_cast<Eigen::Index>(j)] = betas.at(t, j);
      }
      io::save_coeffs(coeffs_out, out);
      emit({{"command", cmd}, {"out", coeffs_out}, {"frames", frames}, {"identity", identity}});
    } else if (cmd == "train-taft") {
      const face::FaceBasis b = io::load_basis(basis_path);
      const auto clip = synth::load_clip(clip_dir, b.k_exp());
      const auto samples = pipeline::make_taft_samples(clip, b, seed, !no_augment);
      gen_cfg.skip_connections = !no_skip;
      taft::Generator gen(gen_cfg, seed);
      taft_opt.seed = seed;
      taft_opt.eval_every = taft_log_every;
      const auto r = taft::train_taft(gen, samples, taft_opt);
      for (const auto& [step, loss] : r.eval_loss) emit({{"command", cmd}, {"step", step}, {"dataset_loss", loss}});
      taft::save_generator(generator_out, gen);
      const double first = r.eval_loss.front().second, last = r.eval_loss.back().second;
      emit({{"command", cmd}, {"out", generator_out}, {"samples", samples.size()}, {"initial_loss", first},
            {"final_loss", last}, {"ratio", first > 0.0 ? last / first : 0.0}, {"skip_connections", !no_skip},
            {"seconds", seconds_since(t0)}});
    } else if (cmd == "run") {
      const face::FaceBasis b = io::load_basis(basis_path);
      const auto clip = synth::load_clip(clip_dir, b.k_exp());
      std::optional<a2ep::A2EPModel> model;
      std::optional<taft::Generator> gen;
      if (!a2ep_path.empty()) model = a2ep::load_model(a2ep_path);
      if (!generator_path.empty()) gen = taft::load_generator(generator_path);
      if (run_id_opt->count() > 0) run_flags.identity = run_identity;
      run_flags.output_dir = run_out;
      const auto r = pipeline::run_pipeline(clip, b, model ? &*model : nullptr, gen ? &*gen : nullptr, run_flags);
      json j = json::parse(r.report.to_json());
      j["command"] = cmd;
      j["out"] = run_out;
      j["seconds"] = seconds_since(t0);
      emit(j);
    } else if (cmd == "eval") {
      const auto pred = read_frames(pred_dir), target = read_frames(target_dir);
      if (pred.size() != target.size())
        throw std::runtime_error("eval: " + std::to_string(pred.size()) + " predicted frames vs " +
                                 std::to_string(target.size()) + " target frames");
      metrics::MetricReport report;
      report.frames = pred.size();
      double psnr_acc = 0.0;
      std::size_t finite = 0;
      for (std::size_t t = 0; t < pred.size(); ++t) {
        const double p = metrics::psnr(pred[t], target[t]);
        if (!std::isinf(p)) {
          psnr_acc += p;
          ++finite;
        }
        report.ssim += metrics::ssim(pred[t], target[t]) / static_cast<double>(pred.size());
      }
      report.psnr = finite ? psnr_acc / static_cast<double>(finite) : std::numeric_limits<double>::infinity();
      json j = json::parse(report.to_json());
      if (!basis_path.empty() && !pred_coeffs.empty() && !gt_coeffs.empty()) {
        const face::FaceBasis b = io::load_basis(basis_path);
        const auto pc = io::load_coeffs(pred_coeffs, b.k_exp()), gcs = io::load_coeffs(gt_coeffs, b.k_exp());
        if (pc.size() != gcs.size()) throw std::runtime_error("eval: coefficient frame counts differ");
        const auto mouth = face::lower_mouth_indices(b, run_flags.mouth_y_threshold);
        const render::Camera cam = synth::default_camera(eval_size);
        std::vector<metrics::Points2d> pp, gp;
        for (std::size_t t = 0; t < pc.size(); ++t) {
          const face::CoeffSet combined = mafb::combine_params(gcs[t], pc[t].beta);
          auto posed = [&](const face::CoeffSet& c) {
            const Eigen::VectorXd alpha = c.alpha.size() ? c.alpha : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(b.k_id()));
            return face::apply_pose(face::evaluate_shape(b, alpha, c.beta), c.rotation, c.translation);
          };
          pp.push_back(pipeline::project_points(posed(combined), mouth.indices, cam));
          gp.push_back(pipeline::project_points(posed(gcs[t]), mouth.indices, cam));
        }
        j["lmd"] = metrics::lmd(pp, gp);
      } else {
        j["lmd"] = nullptr;
      }
      j["command"] = cmd;
      emit(j);
    }
  } catch (const std::exception& e) {
    emit({{"error", e.what()}});
    return 1;
  }
  return 0;
}
