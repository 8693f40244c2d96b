#include "gsf/mafb.hpp"

#include <stdexcept>
#include <string>

namespace gsf::mafb {

StructuringElement::StructuringElement(int side) : side_(side) {
  if (side < 1 || side % 2 == 0)
    throw std::invalid_argument("StructuringElement: side must be odd and positive, got " + std::to_string(side));
}

face::CoeffSet combine_params(const face::CoeffSet& target, const Eigen::VectorXd& predicted_beta) {
  if (predicted_beta.size() != target.beta.size())
    throw std::invalid_argument("combine_params: predicted beta has length " + std::to_string(predicted_beta.size()) +
                                ", target has " + std::to_string(target.beta.size()));
  face::CoeffSet out = target;
  out.beta = predicted_beta;
  return out;
}

namespace {

// Dilation with `want` = 1 looks for any set neighbor; erosion with `want` = 0
// looks for any unset (or outside) neighbor.
BinaryMask neighborhood_op(const BinaryMask& mask, const StructuringElement& kernel, bool dilate) {
  const int w = mask.width, h = mask.height, r = kernel.radius();
  BinaryMask out(w, h, 0);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      bool hit = false;
      for (int dy = -r; dy <= r && !hit; ++dy) {
        for (int dx = -r; dx <= r && !hit; ++dx) {
          const int yy = y + dy, xx = x + dx;
          const bool inside = yy >= 0 && yy < h && xx >= 0 && xx < w;
          const bool set = inside && mask.at(xx, yy);
          hit = dilate ? set : !set;
        }
      }
      out.at(x, y) = dilate ? (hit ? 1 : 0) : (hit ? 0 : 1);
    }
  }
  return out;
}

}  // namespace

BinaryMask morph_dilate(const BinaryMask& mask, const StructuringElement& kernel) {
  return neighborhood_op(mask, kernel, true);
}

BinaryMask morph_erode(const BinaryMask& mask, const StructuringElement& kernel) {
  return neighborhood_op(mask, kernel, false);
}

BinaryMask morph_close(const BinaryMask& mask, const StructuringElement& kernel) {
  return morph_erode(morph_dilate(mask, kernel), kernel);
}

BinaryMask augment_mask(const BinaryMask& mask, std::mt19937_64& rng, const AugmentOptions& options,
                        AugmentBranch* branch_taken) {
  if (options.kernel_sizes.empty()) throw std::invalid_argument("augment_mask: no kernel sizes");
  const BinaryMask closed = morph_close(mask, StructuringElement(options.close_size));
  std::bernoulli_distribution coin(0.5);
  std::uniform_int_distribution<std::size_t> pick(0, options.kernel_sizes.size() - 1);
  const bool dilate = coin(rng);
  const StructuringElement k(options.kernel_sizes[pick(rng)]);
  if (branch_taken) *branch_taken = dilate ? AugmentBranch::kDilate : AugmentBranch::kErode;
  return dilate ? morph_dilate(closed, k) : morph_erode(closed, k);
}

RasterImage blend(const BlendInputs& in) {
  const auto& r = in.rendered;
  const auto& t = in.target;
  const auto& m = in.face_mask;
  if (r.width != t.width || r.height != t.height || m.width != r.width || m.height != r.height)
    throw std::invalid_argument("blend: size mismatch rendered " + std::to_string(r.width) + "x" +
                                std::to_string(r.height) + ", target " + std::to_string(t.width) + "x" +
                                std::to_string(t.height) + ", mask " + std::to_string(m.width) + "x" +
                                std::to_string(m.height));
  RasterImage out(r.width, r.height);
  for (std::size_t p = 0; p < m.bits.size(); ++p) {
    const double mf = m.bits[p] ? 1.0 : 0.0;
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t i = p * 3 + c;
      out.rgb[i] = r.rgb[i] * mf + t.rgb[i] * (1.0 - mf);
    }
  }
  return out;
}

}  // namespace gsf::mafb
