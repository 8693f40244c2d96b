#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gsf/audio.hpp"
#include "gsf/autodiff.hpp"
#include "gsf/checkpoint.hpp"
#include "gsf/face3dmm.hpp"

namespace gsf::a2ep {

// Model sizes. Defaults are the desk-scale toy; the full-size reference
// network uses d_model 1024 and a 2048-wide feed-forward layer.
struct A2EPConfig {
  std::size_t feature_dim = 80;
  std::size_t d_model = 64;
  std::size_t decoder_heads = 4;
  std::size_t self_heads = 4;
  std::size_t ff_width = 256;
  std::size_t sigma1 = 0;  // frames of audio visible before the aligned one
  std::size_t sigma2 = 1;  // frames visible from the aligned one onward
  std::size_t k_exp = 64;
  std::size_t n_identities = 1;
  std::size_t max_frames = 600;

  void validate() const;
};

// Sinusoidal encoding: PE(t, 2k) = sin(t / 10000^(2k/d)), PE(t, 2k+1) = cos(...).
Tensor positional_encoding(std::size_t frames, std::size_t d);

// Entry (i, j) is 0 when max(i - sigma1, 0) <= j < min(i + sigma2, T), else -inf.
Tensor alibi_bias_matrix(std::size_t frames, std::size_t sigma1, std::size_t sigma2);

// 0 on and below the diagonal, -inf above.
Tensor causal_bias_matrix(std::size_t frames);

struct AttentionResult {
  ad::Var output;                   // after the output projection
  ad::Var pre_projection;           // concatenated head outputs
  std::vector<Tensor> head_weights; // per-head [Tq, Tk] attention probabilities
};

// Multi-head attention over already-projected Q [Tq,d], K [Tk,d], V [Tk,d].
// Each head computes softmax(Q_h K_h^T / sqrt(d_h) + bias) V_h; -inf bias
// entries are excluded from the softmax and receive exactly zero weight.
AttentionResult biased_cross_attention(const ad::Var& q, const ad::Var& k, const ad::Var& v, const Tensor& bias,
                                       std::size_t heads, const ad::Var& w_out, const ad::Var& b_out);

class A2EPModel {
 public:
  A2EPModel(const A2EPConfig& config, std::uint64_t seed);

  const A2EPConfig& config() const { return config_; }

  std::vector<ad::Var> parameters() const;
  const ad::Var& param(const std::string& name) const;
  std::vector<NamedTensor> state() const;
  void load_state(const std::vector<NamedTensor>& tensors);

  // Per-channel standardization over time, then resampling to `frames`.
  Tensor prepare_audio(const Tensor& features, std::size_t frames) const;

  // FC(history_t) + v_n + PE(t); row 0 of the history is the start token.
  ad::Var expression_embedding(const Tensor& history, std::size_t identity) const;
  // Embedding followed by causally masked self-attention (post-norm residual).
  ad::Var encode_expressions(const Tensor& history, std::size_t identity) const;
  // Teacher-forced prediction; audio is the raw [T_a, F] front-end output.
  ad::Var forward(const Tensor& audio_features, const Tensor& history, std::size_t identity) const;

  // Decodes T frames one at a time, feeding each prediction back as history.
  Tensor infer_autoregressive(const Tensor& audio_features, std::size_t identity, std::size_t frames) const;

 private:
  ad::Var add(const std::string& name, Tensor value);
  ad::Var linear(const ad::Var& x, const std::string& prefix) const;

  A2EPConfig config_;
  std::vector<std::pair<std::string, ad::Var>> params_;
};

// Checkpoint with the model configuration stored as a "meta.config" record.
void save_model(const std::string& path, const A2EPModel& model);
A2EPModel load_model(const std::string& path);

// Shifts ground-truth betas right by one frame and inserts the zero start token.
Tensor teacher_history(const Tensor& betas);

struct A2EPSample {
  audio::Waveform waveform;
  Tensor betas;  // [T, k_exp]
  std::size_t identity = 0;
  face::Vertices template_vertices;
};

struct A2EPTrainOptions {
  std::size_t steps = 300;
  double lr = 1e-4;
  double lambda_m = 1.8;
  double mouth_y_threshold = 0.0;
  std::uint64_t seed = 0;
};

struct A2EPTrainResult {
  std::vector<double> step_loss;   // loss before each update
  std::vector<double> epoch_loss;  // mean of step losses per pass over the data
};

// Teacher-forced training of `model` against the mouth-weighted vertex loss.
A2EPTrainResult train_a2ep(A2EPModel& model, const std::vector<A2EPSample>& dataset, const face::FaceBasis& basis,
                           const A2EPTrainOptions& options);

}  // namespace gsf::a2ep
