#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gsf/autodiff.hpp"
#include "gsf/checkpoint.hpp"
#include "gsf/image.hpp"

namespace gsf::taft {

struct GeneratorConfig {
  std::size_t in_channels = 6;  // blended RGB + reference RGB
  std::size_t base_width = 16;
  std::size_t depth = 3;        // number of stride-2 downsamples
  std::size_t out_channels = 3;
  bool skip_connections = true;

  void validate() const;
};

struct LossWeights {
  double photo = 1.0;
  double perc = 4.0;
  double style = 1000.0;
};

// [3, H, W] <-> interleaved RGB image.
Tensor image_to_tensor(const RasterImage& image);
RasterImage tensor_to_image(const Tensor& chw);

// Fixed random feature extractor standing in for a pretrained network:
// three 3x3 stride-2 convolutions with ReLU, weights drawn once from `seed`.
class FeatureStack {
 public:
  explicit FeatureStack(std::uint64_t seed, std::vector<std::size_t> widths = {8, 16, 32});

  // Activations of every layer for a [3, H, W] input.
  std::vector<ad::Var> features(const ad::Var& image) const;
  std::size_t layers() const { return weights_.size(); }

 private:
  std::vector<ad::Var> weights_;
  std::vector<ad::Var> biases_;
};

// U-Net style encoder/decoder with optional skip connections and a sigmoid output.
class Generator {
 public:
  Generator(const GeneratorConfig& config, std::uint64_t seed);

  const GeneratorConfig& config() const { return config_; }
  // input: [in_channels, H, W] -> [out_channels, H, W] in (0, 1).
  ad::Var forward(const ad::Var& input) const;
  RasterImage run(const RasterImage& blended, const RasterImage& reference) const;

  std::vector<ad::Var> parameters() const;
  std::vector<NamedTensor> state() const;
  void load_state(const std::vector<NamedTensor>& tensors);

 private:
  ad::Var conv(const ad::Var& x, const std::string& name, std::size_t stride) const;
  void add_conv(const std::string& name, std::size_t in, std::size_t out, std::mt19937_64& rng);

  GeneratorConfig config_;
  std::vector<std::pair<std::string, ad::Var>> params_;
};

// Checkpoint with the generator configuration stored as a "meta.config" record.
void save_generator(const std::string& path, const Generator& generator);
Generator load_generator(const std::string& path);

ad::Var concat_inputs(const RasterImage& blended, const RasterImage& reference);

// Mean absolute error over all pixels and channels.
ad::Var photometric_loss(const ad::Var& pred, const ad::Var& target);
// Level 0 is the input; each further level is a 2x2 box-filtered half-size copy.
std::vector<ad::Var> pyramid_downsample(const ad::Var& image, std::size_t levels);
// Sum over pyramid levels and feature layers of mean absolute feature differences.
ad::Var perceptual_loss(const ad::Var& pred, const ad::Var& target, const FeatureStack& stack, std::size_t levels = 3);
// [C, H, W] -> [C, C] = F F^T / (C H W)
ad::Var gram_matrix(const ad::Var& features);
// Sum over feature layers of mean absolute Gram differences.
ad::Var style_loss(const ad::Var& pred, const ad::Var& target, const FeatureStack& stack);
ad::Var total_loss(const ad::Var& pred, const ad::Var& target, const LossWeights& weights, const FeatureStack& stack,
                   std::size_t levels = 3);

struct TaftSample {
  RasterImage blended;
  RasterImage reference;
  RasterImage target;
};

struct TaftTrainOptions {
  std::size_t steps = 500;
  double lr = 1e-4;
  LossWeights weights;
  std::size_t pyramid_levels = 3;
  std::size_t batch_size = 1;    // samples averaged per update
  std::uint64_t seed = 0;        // sample order
  std::uint64_t feature_seed = 7;
  std::size_t eval_every = 50;   // dataset-mean loss is logged at this cadence
};

struct TaftTrainResult {
  std::vector<double> step_loss;
  std::vector<std::pair<std::size_t, double>> eval_loss;  // (step, dataset mean) incl. step 0 and the final step
};

double dataset_loss(const Generator& generator, const std::vector<TaftSample>& dataset, const FeatureStack& stack,
                    const LossWeights& weights, std::size_t levels);

TaftTrainResult train_taft(Generator& generator, const std::vector<TaftSample>& dataset,
                           const TaftTrainOptions& options);

}  // namespace gsf::taft
