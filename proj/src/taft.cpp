#include "gsf/taft.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "gsf/adam.hpp"

namespace gsf::taft {

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = dist(rng);
  return t;
}

void check_image_pair(const ad::Var& a, const ad::Var& b, const char* op) {
  if (a.shape() != b.shape() || a.value().rank() != 3)
    throw std::invalid_argument(std::string(op) + ": expected matching [C,H,W] images, got " + shape_string(a.shape()) +
                                " and " + shape_string(b.shape()));
}

}  // namespace

void GeneratorConfig::validate() const {
  if (in_channels == 0 || out_channels == 0 || base_width == 0)
    throw std::invalid_argument("GeneratorConfig: channel counts must be positive");
}

Tensor image_to_tensor(const RasterImage& image) {
  const auto h = static_cast<std::size_t>(image.height), w = static_cast<std::size_t>(image.width);
  Tensor t({3, h, w});
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) t.at(c, y, x) = image.rgb[(y * w + x) * 3 + c];
  return t;
}

RasterImage tensor_to_image(const Tensor& chw) {
  if (chw.rank() != 3 || chw.dim(0) != 3) throw std::invalid_argument("tensor_to_image: expected [3,H,W], got " + shape_string(chw.shape()));
  const std::size_t h = chw.dim(1), w = chw.dim(2);
  RasterImage img(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) img.rgb[(y * w + x) * 3 + c] = chw.at(c, y, x);
  return img;
}

FeatureStack::FeatureStack(std::uint64_t seed, std::vector<std::size_t> widths) {
  std::mt19937_64 rng(seed);
  std::size_t in = 3;
  for (std::size_t out : widths) {
    weights_.push_back(ad::constant(he_normal({out, in, 3, 3}, in * 9, rng)));
    biases_.push_back(ad::constant(Tensor({out})));
    in = out;
  }
}

std::vector<ad::Var> FeatureStack::features(const ad::Var& image) const {
  std::vector<ad::Var> out;
  ad::Var x = image;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    x = ad::relu(ad::conv2d(x, weights_[l], biases_[l], 2, 1));
    out.push_back(x);
  }
  return out;
}

Generator::Generator(const GeneratorConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t w = config_.base_width;
  auto width = [w](std::size_t level) { return w << level; };
  add_conv("enc0", config_.in_channels, width(0), rng);
  for (std::size_t l = 1; l <= config_.depth; ++l) add_conv("enc" + std::to_string(l), width(l - 1), width(l), rng);
  for (std::size_t l = config_.depth; l-- > 0;) {
    const std::size_t in = width(l + 1) + (config_.skip_connections ? width(l) : 0);
    add_conv("dec" + std::to_string(l), in, width(l), rng);
  }
  add_conv("out", width(0), config_.out_channels, rng);
}

void Generator::add_conv(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng) {
  params_.emplace_back(name + ".w", ad::parameter(he_normal({out, in, 3, 3}, in * 9, rng)));
  params_.emplace_back(name + ".b", ad::parameter(Tensor({out})));
}

ad::Var Generator::conv(const ad::Var& x, const std::string& name, std::size_t stride) const {
  const ad::Var* w = nullptr;
  const ad::Var* b = nullptr;
  for (const auto& [n, v] : params_) {
    if (n == name + ".w") w = &v;
    if (n == name + ".b") b = &v;
  }
  if (!w || !b) throw std::logic_error("Generator: missing layer " + name);
  return ad::conv2d(x, *w, *b, stride, 1);
}

ad::Var Generator::forward(const ad::Var& input) const {
  if (input.value().rank() != 3 || input.shape()[0] != config_.in_channels)
    throw std::invalid_argument("Generator: input " + shape_string(input.shape()) + " expected [" +
                                std::to_string(config_.in_channels) + ",H,W]");
  const std::size_t div = std::size_t{1} << config_.depth;
  if (input.shape()[1] % div != 0 || input.shape()[2] % div != 0)
    throw std::invalid_argument("Generator: spatial size " + std::to_string(input.shape()[2]) + "x" +
                                std::to_string(input.shape()[1]) + " not divisible by " + std::to_string(div));

  std::vector<ad::Var> skips;
  // Inputs in [0, 1] are mapped to [-1, 1].
  const ad::Var in = ad::add_scalar(ad::scale(input, 2.0), -1.0);
  ad::Var x = ad::relu(conv(in, "enc0", 1));
  skips.push_back(x);
  for (std::size_t l = 1; l <= config_.depth; ++l) {
    x = ad::relu(conv(x, "enc" + std::to_string(l), 2));
    skips.push_back(x);
  }
  for (std::size_t l = config_.depth; l-- > 0;) {
    x = ad::upsample_nearest2x(x);
    if (config_.skip_connections) x = ad::concat({x, skips[l]}, 0);
    x = ad::relu(conv(x, "dec" + std::to_string(l), 1));
  }
  return ad::sigmoid(conv(x, "out", 1));
}

namespace {

constexpr const char* kConfigRecord = "meta.config";

}  // namespace

void save_generator(const std::string& path, const Generator& generator) {
  const auto& c = generator.config();
  std::vector<NamedTensor> records{
      {kConfigRecord, Tensor({5}, {static_cast<double>(c.in_channels), static_cast<double>(c.base_width),
                                   static_cast<double>(c.depth), static_cast<double>(c.out_channels),
                                   c.skip_connections ? 1.0 : 0.0})}};
  for (auto& t : generator.state()) records.push_back(std::move(t));
  save_checkpoint(path, records);
}

Generator load_generator(const std::string& path) {
  const auto records = load_checkpoint(path);
  const auto it = std::find_if(records.begin(), records.end(), [](const NamedTensor& t) { return t.name == kConfigRecord; });
  if (it == records.end() || it->value.shape() != Shape{5})
    throw std::runtime_error("generator checkpoint '" + path + "' has no valid " + kConfigRecord + " record");
  GeneratorConfig c;
  c.in_channels = static_cast<std::size_t>(it->value[0]);
  c.base_width = static_cast<std::size_t>(it->value[1]);
  c.depth = static_cast<std::size_t>(it->value[2]);
  c.out_channels = static_cast<std::size_t>(it->value[3]);
  c.skip_connections = it->value[4] != 0.0;
  Generator g(c, 0);
  g.load_state(records);
  return g;
}

ad::Var concat_inputs(const RasterImage& blended, const RasterImage& reference) {
  if (blended.width != reference.width || blended.height != reference.height)
    throw std::invalid_argument("Generator: blended and reference images differ in size");
  return ad::concat({ad::constant(image_to_tensor(blended)), ad::constant(image_to_tensor(reference))}, 0);
}

RasterImage Generator::run(const RasterImage& blended, const RasterImage& reference) const {
  ad::NoGradGuard no_grad;
  return tensor_to_image(forward(concat_inputs(blended, reference)).value());
}

std::vector<ad::Var> Generator::parameters() const {
  std::vector<ad::Var> out;
  for (const auto& [n, v] : params_) out.push_back(v);
  return out;
}

std::vector<NamedTensor> Generator::state() const {
  std::vector<NamedTensor> out;
  for (const auto& [n, v] : params_) out.push_back({n, v.value()});
  return out;
}

void Generator::load_state(const std::vector<NamedTensor>& tensors) {
  std::vector<NamedTensor> current = state();
  assign_by_name(current, tensors);
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].second.mutable_value() = current[i].value;
}

ad::Var photometric_loss(const ad::Var& pred, const ad::Var& target) {
  if (pred.shape() != target.shape()) throw std::invalid_argument("photometric_loss: shape mismatch");
  return ad::mean(ad::abs(ad::sub(pred, target)));
}

std::vector<ad::Var> pyramid_downsample(const ad::Var& image, std::size_t levels) {
  if (levels == 0) throw std::invalid_argument("pyramid_downsample: need at least one level");
  std::vector<ad::Var> out{image};
  for (std::size_t l = 1; l < levels; ++l) out.push_back(ad::avg_pool2x2(out.back()));
  return out;
}

ad::Var perceptual_loss(const ad::Var& pred, const ad::Var& target, const FeatureStack& stack, std::size_t levels) {
  check_image_pair(pred, target, "perceptual_loss");
  const auto pp = pyramid_downsample(pred, levels);
  const auto tp = pyramid_downsample(target, levels);
  std::vector<ad::Var> terms;
  for (std::size_t l = 0; l < levels; ++l) {
    const auto fp = stack.features(pp[l]);
    const auto ft = stack.features(tp[l]);
    for (std::size_t k = 0; k < fp.size(); ++k) terms.push_back(ad::mean(ad::abs(ad::sub(fp[k], ft[k]))));
  }
  return ad::sum(ad::concat(terms, 0));
}

ad::Var gram_matrix(const ad::Var& features) {
  if (features.value().rank() != 3) throw std::invalid_argument("gram_matrix: expected [C,H,W], got " + shape_string(features.shape()));
  const std::size_t c = features.shape()[0], hw = features.shape()[1] * features.shape()[2];
  const ad::Var f = ad::reshape(features, {c, hw});
  return ad::scale(ad::matmul(f, ad::transpose(f)), 1.0 / static_cast<double>(c * hw));
}

ad::Var style_loss(const ad::Var& pred, const ad::Var& target, const FeatureStack& stack) {
  check_image_pair(pred, target, "style_loss");
  const auto fp = stack.features(pred);
  const auto ft = stack.features(target);
  std::vector<ad::Var> terms;
  for (std::size_t k = 0; k < fp.size(); ++k)
    terms.push_back(ad::mean(ad::abs(ad::sub(gram_matrix(fp[k]), gram_matrix(ft[k])))));
  return ad::sum(ad::concat(terms, 0));
}

ad::Var total_loss(const ad::Var& pred, const ad::Var& target, const LossWeights& weights, const FeatureStack& stack,
                   std::size_t levels) {
  if (weights.photo < 0.0 || weights.perc < 0.0 || weights.style < 0.0)
    throw std::invalid_argument("total_loss: weights must be nonnegative");
  const ad::Var photo = photometric_loss(pred, target);
  const ad::Var perc = perceptual_loss(pred, target, stack, levels);
  const ad::Var style = style_loss(pred, target, stack);
  return ad::add(ad::add(ad::scale(photo, weights.photo), ad::scale(perc, weights.perc)),
                 ad::scale(style, weights.style));
}

double dataset_loss(const Generator& generator, const std::vector<TaftSample>& dataset, const FeatureStack& stack,
                    const LossWeights& weights, std::size_t levels) {
  ad::NoGradGuard no_grad;
  double acc = 0.0;
  for (const auto& s : dataset) {
    const ad::Var pred = generator.forward(concat_inputs(s.blended, s.reference));
    acc += total_loss(pred, ad::constant(image_to_tensor(s.target)), weights, stack, levels).item();
  }
  return acc / static_cast<double>(dataset.size());
}

TaftTrainResult train_taft(Generator& generator, const std::vector<TaftSample>& dataset,
                           const TaftTrainOptions& options) {
  if (dataset.empty()) throw std::invalid_argument("train_taft: empty dataset");
  const FeatureStack stack(options.feature_seed);
  Adam adam(generator.parameters(), options.lr);
  std::mt19937_64 rng(options.seed);
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), 0);

  TaftTrainResult result;
  result.eval_loss.emplace_back(0, dataset_loss(generator, dataset, stack, options.weights, options.pyramid_levels));
  const std::size_t batch = std::clamp<std::size_t>(options.batch_size, 1, dataset.size());
  std::size_t pos = order.size();
  for (std::size_t step = 0; step < options.steps; ++step) {
    adam.zero_grad();
    double step_loss = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      if (pos == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        pos = 0;
      }
      const auto& s = dataset[order[pos++]];
      const ad::Var pred = generator.forward(concat_inputs(s.blended, s.reference));
      const ad::Var loss = total_loss(pred, ad::constant(image_to_tensor(s.target)), options.weights, stack,
                                      options.pyramid_levels);
      ad::backward(ad::scale(loss, 1.0 / static_cast<double>(batch)));
      step_loss += loss.item() / static_cast<double>(batch);
    }
    adam.step();
    result.step_loss.push_back(step_loss);
    const std::size_t done = step + 1;
    if ((options.eval_every && done % options.eval_every == 0) || done == options.steps) {
      if (result.eval_loss.back().first != done)
        result.eval_loss.emplace_back(done, dataset_loss(generator, dataset, stack, options.weights, options.pyramid_levels));
    }
  }
  return result;
}

}  // namespace gsf::taft
