#include "gsf/a2ep.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gsf/adam.hpp"

namespace gsf::a2ep {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Tensor xavier(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

}  // namespace

void A2EPConfig::validate() const {
  if (d_model == 0 || decoder_heads == 0 || self_heads == 0)
    throw std::invalid_argument("A2EPConfig: d_model and head counts must be positive");
  if (d_model % decoder_heads != 0 || d_model % self_heads != 0)
    throw std::invalid_argument("A2EPConfig: d_model " + std::to_string(d_model) + " not divisible by head count");
  if (k_exp == 0 || feature_dim == 0 || ff_width == 0 || n_identities == 0 || max_frames == 0)
    throw std::invalid_argument("A2EPConfig: dimensions must be positive");
}

Tensor positional_encoding(std::size_t frames, std::size_t d) {
  Tensor pe({frames, d});
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t k2 = j - (j % 2);
      const double angle = static_cast<double>(t) / std::pow(10000.0, static_cast<double>(k2) / static_cast<double>(d));
      pe.at(t, j) = (j % 2 == 0) ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

Tensor alibi_bias_matrix(std::size_t frames, std::size_t sigma1, std::size_t sigma2) {
  if (frames == 0) throw std::invalid_argument("alibi_bias_matrix: T must be positive");
  Tensor b({frames, frames}, kNegInf);
  for (std::size_t i = 0; i < frames; ++i) {
    const std::size_t lo = i > sigma1 ? i - sigma1 : 0;
    const std::size_t hi = std::min(i + sigma2, frames);
    if (lo >= hi)
      throw std::invalid_argument("alibi_bias_matrix: row " + std::to_string(i) + " has no visible frame");
    for (std::size_t j = lo; j < hi; ++j) b.at(i, j) = 0.0;
  }
  return b;
}

Tensor causal_bias_matrix(std::size_t frames) {
  Tensor b({frames, frames}, kNegInf);
  for (std::size_t i = 0; i < frames; ++i)
    for (std::size_t j = 0; j <= i; ++j) b.at(i, j) = 0.0;
  return b;
}

AttentionResult biased_cross_attention(const ad::Var& q, const ad::Var& k, const ad::Var& v, const Tensor& bias,
                                       std::size_t heads, const ad::Var& w_out, const ad::Var& b_out) {
  if (q.value().rank() != 2 || k.value().rank() != 2 || v.value().rank() != 2)
    throw std::invalid_argument("biased_cross_attention: Q, K, V must be rank 2");
  const std::size_t tq = q.shape()[0], tk = k.shape()[0], d = q.shape()[1];
  if (k.shape()[1] != d || v.shape()[1] != d || v.shape()[0] != tk)
    throw std::invalid_argument("biased_cross_attention: Q " + shape_string(q.shape()) + ", K " +
                                shape_string(k.shape()) + ", V " + shape_string(v.shape()) + " disagree");
  if (bias.shape() != Shape{tq, tk})
    throw std::invalid_argument("biased_cross_attention: bias " + shape_string(bias.shape()) + " expected [" +
                                std::to_string(tq) + "x" + std::to_string(tk) + "]");
  if (heads == 0 || d % heads != 0)
    throw std::invalid_argument("biased_cross_attention: width " + std::to_string(d) + " not divisible by " +
                                std::to_string(heads) + " heads");

  std::vector<std::uint8_t> keep(bias.size());
  Tensor finite_bias(bias.shape());
  bool any_bias = false;
  for (std::size_t i = 0; i < bias.size(); ++i) {
    keep[i] = bias[i] != kNegInf;
    if (keep[i]) {
      finite_bias[i] = bias[i];
      any_bias = any_bias || bias[i] != 0.0;
    }
  }

  const std::size_t dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  AttentionResult result;
  std::vector<ad::Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const ad::Var qh = ad::slice(q, 1, h * dh, (h + 1) * dh);
    const ad::Var kh = ad::slice(k, 1, h * dh, (h + 1) * dh);
    const ad::Var vh = ad::slice(v, 1, h * dh, (h + 1) * dh);
    ad::Var scores = ad::scale(ad::matmul(qh, ad::transpose(kh)), inv_sqrt);
    if (any_bias) scores = ad::add(scores, ad::constant(finite_bias));
    const ad::Var attn = ad::softmax_rows(scores, &keep);
    result.head_weights.push_back(attn.value());
    outs.push_back(ad::matmul(attn, vh));
  }
  result.pre_projection = heads == 1 ? outs.front() : ad::concat(outs, 1);
  result.output = ad::add_row(ad::matmul(result.pre_projection, w_out), b_out);
  return result;
}

A2EPModel::A2EPModel(const A2EPConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t d = config_.d_model, k = config_.k_exp, f = config_.feature_dim, ff = config_.ff_width;

  add("audio_proj.w", xavier({f, d}, f, d, rng));
  add("audio_proj.b", Tensor({d}));
  add("exp_proj.w", xavier({k, d}, k, d, rng));
  add("exp_proj.b", Tensor({d}));
  add("identity.table", xavier({config_.n_identities, d}, config_.n_identities, d, rng));
  for (const char* block : {"self_attn", "cross_attn"}) {
    const std::string b = block;
    for (const char* m : {".wq", ".wk", ".wv", ".wo"}) add(b + m, xavier({d, d}, d, d, rng));
    add(b + ".bo", Tensor({d}));
  }
  for (const char* ln : {"ln1", "ln2", "ln3"}) {
    add(std::string(ln) + ".g", Tensor({d}, 1.0));
    add(std::string(ln) + ".b", Tensor({d}));
  }
  add("ff1.w", xavier({d, ff}, d, ff, rng));
  add("ff1.b", Tensor({ff}));
  add("ff2.w", xavier({ff, d}, ff, d, rng));
  add("ff2.b", Tensor({d}));
  // Zero output head: a fresh model predicts the neutral expression.
  add("head.w", Tensor({d, k}));
  add("head.b", Tensor({k}));
}

ad::Var A2EPModel::add(const std::string& name, Tensor value) {
  params_.emplace_back(name, ad::parameter(std::move(value)));
  return params_.back().second;
}

const ad::Var& A2EPModel::param(const std::string& name) const {
  for (const auto& [n, v] : params_)
    if (n == name) return v;
  throw std::out_of_range("A2EPModel: no parameter '" + name + "'");
}

std::vector<ad::Var> A2EPModel::parameters() const {
  std::vector<ad::Var> out;
  for (const auto& [n, v] : params_) out.push_back(v);
  return out;
}

std::vector<NamedTensor> A2EPModel::state() const {
  std::vector<NamedTensor> out;
  for (const auto& [n, v] : params_) out.push_back({n, v.value()});
  return out;
}

void A2EPModel::load_state(const std::vector<NamedTensor>& tensors) {
  std::vector<NamedTensor> current = state();
  assign_by_name(current, tensors);
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].second.mutable_value() = current[i].value;
}

ad::Var A2EPModel::linear(const ad::Var& x, const std::string& prefix) const {
  return ad::add_row(ad::matmul(x, param(prefix + ".w")), param(prefix + ".b"));
}

Tensor A2EPModel::prepare_audio(const Tensor& features, std::size_t frames) const {
  if (features.rank() != 2 || features.dim(1) != config_.feature_dim)
    throw std::invalid_argument("A2EPModel: audio features " + shape_string(features.shape()) + " expected [T, " +
                                std::to_string(config_.feature_dim) + "]");
  const std::size_t t_a = features.dim(0), f = features.dim(1);
  Tensor norm(features.shape());
  for (std::size_t c = 0; c < f; ++c) {
    double mu = 0.0;
    for (std::size_t t = 0; t < t_a; ++t) mu += features.at(t, c);
    mu /= static_cast<double>(t_a);
    double var = 0.0;
    for (std::size_t t = 0; t < t_a; ++t) var += (features.at(t, c) - mu) * (features.at(t, c) - mu);
    var /= static_cast<double>(t_a);
    const double inv = 1.0 / std::sqrt(var + 1e-5);
    for (std::size_t t = 0; t < t_a; ++t) norm.at(t, c) = (features.at(t, c) - mu) * inv;
  }
  return audio::resample_linear(norm, frames);
}

ad::Var A2EPModel::expression_embedding(const Tensor& history, std::size_t identity) const {
  if (identity >= config_.n_identities)
    throw std::invalid_argument("A2EPModel: identity " + std::to_string(identity) + " out of range (" +
                                std::to_string(config_.n_identities) + " identities)");
  if (history.rank() != 2 || history.dim(1) != config_.k_exp)
    throw std::invalid_argument("A2EPModel: history " + shape_string(history.shape()) + " expected [T, " +
                                std::to_string(config_.k_exp) + "]");
  const std::size_t frames = history.dim(0);
  if (frames == 0 || frames > config_.max_frames)
    throw std::invalid_argument("A2EPModel: sequence length " + std::to_string(frames) + " outside [1, " +
                                std::to_string(config_.max_frames) + "]");
  const ad::Var projected = linear(ad::constant(history), "exp_proj");
  const ad::Var style = ad::slice(param("identity.table"), 0, identity, identity + 1);
  const ad::Var with_style = ad::add_row(projected, ad::reshape(style, {config_.d_model}));
  return ad::add(with_style, ad::constant(positional_encoding(frames, config_.d_model)));
}

ad::Var A2EPModel::encode_expressions(const Tensor& history, std::size_t identity) const {
  const ad::Var x = expression_embedding(history, identity);
  const std::size_t frames = history.dim(0);
  const AttentionResult att = biased_cross_attention(
      ad::matmul(x, param("self_attn.wq")), ad::matmul(x, param("self_attn.wk")), ad::matmul(x, param("self_attn.wv")),
      causal_bias_matrix(frames), config_.self_heads, param("self_attn.wo"), param("self_attn.bo"));
  return ad::layer_norm_rows(ad::add(x, att.output), param("ln1.g"), param("ln1.b"));
}

ad::Var A2EPModel::forward(const Tensor& audio_features, const Tensor& history, std::size_t identity) const {
  const std::size_t frames = history.rank() == 2 ? history.dim(0) : 0;
  const ad::Var fe = encode_expressions(history, identity);
  const ad::Var audio = linear(ad::constant(prepare_audio(audio_features, frames)), "audio_proj");
  const AttentionResult cross = biased_cross_attention(
      ad::matmul(fe, param("cross_attn.wq")), ad::matmul(audio, param("cross_attn.wk")),
      ad::matmul(audio, param("cross_attn.wv")), alibi_bias_matrix(frames, config_.sigma1, config_.sigma2),
      config_.decoder_heads, param("cross_attn.wo"), param("cross_attn.bo"));
  const ad::Var h2 = ad::layer_norm_rows(ad::add(fe, cross.output), param("ln2.g"), param("ln2.b"));
  const ad::Var ff = linear(ad::relu(linear(h2, "ff1")), "ff2");
  const ad::Var h3 = ad::layer_norm_rows(ad::add(h2, ff), param("ln3.g"), param("ln3.b"));
  return linear(h3, "head");
}

Tensor A2EPModel::infer_autoregressive(const Tensor& audio_features, std::size_t identity, std::size_t frames) const {
  if (frames == 0 || frames > config_.max_frames)
    throw std::invalid_argument("infer_autoregressive: T=" + std::to_string(frames) + " exceeds max_frames " +
                                std::to_string(config_.max_frames));
  ad::NoGradGuard no_grad;
  const std::size_t k = config_.k_exp;
  Tensor history({frames, k});
  Tensor out({frames, k});
  for (std::size_t t = 0; t < frames; ++t) {
    // Rows after t are still zero; causal masking keeps them out of row t.
    const Tensor pred = forward(audio_features, history, identity).value();
    for (std::size_t j = 0; j < k; ++j) {
      out.at(t, j) = pred.at(t, j);
      if (t + 1 < frames) history.at(t + 1, j) = pred.at(t, j);
    }
  }
  return out;
}

namespace {

constexpr const char* kConfigRecord = "meta.config";

Tensor encode_config(const A2EPConfig& c) {
  return Tensor({10}, {static_cast<double>(c.feature_dim), static_cast<double>(c.d_model),
                       static_cast<double>(c.decoder_heads), static_cast<double>(c.self_heads),
                       static_cast<double>(c.ff_width), static_cast<double>(c.sigma1), static_cast<double>(c.sigma2),
                       static_cast<double>(c.k_exp), static_cast<double>(c.n_identities),
                       static_cast<double>(c.max_frames)});
}

A2EPConfig decode_config(const Tensor& t, const std::string& path) {
  if (t.shape() != Shape{10}) throw std::runtime_error("A2EP checkpoint '" + path + "': malformed " + kConfigRecord);
  auto at = [&](std::size_t i) { return static_cast<std::size_t>(t[i]); };
  A2EPConfig c;
  c.feature_dim = at(0);
  c.d_model = at(1);
  c.decoder_heads = at(2);
  c.self_heads = at(3);
  c.ff_width = at(4);
  c.sigma1 = at(5);
  c.sigma2 = at(6);
  c.k_exp = at(7);
  c.n_identities = at(8);
  c.max_frames = at(9);
  return c;
}

}  // namespace

void save_model(const std::string& path, const A2EPModel& model) {
  std::vector<NamedTensor> records{{kConfigRecord, encode_config(model.config())}};
  for (auto& t : model.state()) records.push_back(std::move(t));
  save_checkpoint(path, records);
}

A2EPModel load_model(const std::string& path) {
  const auto records = load_checkpoint(path);
  const auto it = std::find_if(records.begin(), records.end(), [](const NamedTensor& t) { return t.name == kConfigRecord; });
  if (it == records.end()) throw std::runtime_error("A2EP checkpoint '" + path + "' has no " + kConfigRecord + " record");
  A2EPModel model(decode_config(it->value, path), 0);
  model.load_state(records);
  return model;
}

Tensor teacher_history(const Tensor& betas) {
  if (betas.rank() != 2) throw std::invalid_argument("teacher_history: expected [T, k]");
  Tensor h(betas.shape());
  for (std::size_t t = 1; t < betas.dim(0); ++t)
    for (std::size_t j = 0; j < betas.dim(1); ++j) h.at(t, j) = betas.at(t - 1, j);
  return h;
}

A2EPTrainResult train_a2ep(A2EPModel& model, const std::vector<A2EPSample>& dataset, const face::FaceBasis& basis,
                           const A2EPTrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train_a2ep: empty dataset");
  if (basis.k_exp() != model.config().k_exp)
    throw std::invalid_argument("train_a2ep: basis k_exp " + std::to_string(basis.k_exp()) + " != model k_exp " +
                                std::to_string(model.config().k_exp));
  const face::MouthMask mouth = face::lower_mouth_indices(basis, options.mouth_y_threshold);

  struct Prepared {
    Tensor features;
    Tensor history;
    face::VertexLossTerms terms;
  };
  std::vector<Prepared> prepared;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    if (s.betas.rank() != 2 || s.betas.dim(1) != basis.k_exp())
      throw std::invalid_argument("train_a2ep: sample " + std::to_string(i) + " betas " + shape_string(s.betas.shape()));
    prepared.push_back({audio::audio_frontend(s.waveform).frames, teacher_history(s.betas),
                        face::VertexLossTerms::build(basis, s.template_vertices, mouth, options.lambda_m)});
  }

  Adam adam(model.parameters(), options.lr);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  A2EPTrainResult result;
  double epoch_acc = 0.0;
  std::size_t pos = order.size();
  for (std::size_t step = 0; step < options.steps; ++step) {
    if (pos == order.size()) {
      if (step > 0) result.epoch_loss.push_back(epoch_acc / static_cast<double>(order.size()));
      epoch_acc = 0.0;
      std::shuffle(order.begin(), order.end(), rng);
      pos = 0;
    }
    const std::size_t idx = order[pos++];
    const auto& p = prepared[idx];
    adam.zero_grad();
    const ad::Var pred = model.forward(p.features, p.history, dataset[idx].identity);
    const ad::Var loss = face::vertex_prediction_loss(pred, dataset[idx].betas, p.terms);
    ad::backward(loss);
    adam.step();
    result.step_loss.push_back(loss.item());
    epoch_acc += loss.item();
  }
  if (pos == order.size() && options.steps > 0) result.epoch_loss.push_back(epoch_acc / static_cast<double>(order.size()));
  return result;
}

}  // namespace gsf::a2ep
