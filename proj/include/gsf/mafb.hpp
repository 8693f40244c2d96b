#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "gsf/face3dmm.hpp"
#include "gsf/image.hpp"

namespace gsf::mafb {

// Square all-ones structuring element with an odd side, anchored at its center.
class StructuringElement {
 public:
  explicit StructuringElement(int side);
  int side() const { return side_; }
  int radius() const { return side_ / 2; }

 private:
  int side_;
};

struct BlendInputs {
  const RasterImage& rendered;
  const RasterImage& target;
  const BinaryMask& face_mask;
};

// Copy of `target` with its expression replaced.
face::CoeffSet combine_params(const face::CoeffSet& target, const Eigen::VectorXd& predicted_beta);

// Pixels outside the image count as 0 for both operations, so erosion eats
// in from the border.
BinaryMask morph_dilate(const BinaryMask& mask, const StructuringElement& kernel);
BinaryMask morph_erode(const BinaryMask& mask, const StructuringElement& kernel);
// erode(dilate(mask))
BinaryMask morph_close(const BinaryMask& mask, const StructuringElement& kernel);

struct AugmentOptions {
  std::vector<int> kernel_sizes{3, 5, 7};
  int close_size = 9;
};

enum class AugmentBranch { kDilate, kErode };

// Closes the mask, then applies one dilation or erosion with a randomly drawn kernel.
BinaryMask augment_mask(const BinaryMask& mask, std::mt19937_64& rng, const AugmentOptions& options = {},
                        AugmentBranch* branch_taken = nullptr);

// rendered * M + target * (1 - M), per channel.
RasterImage blend(const BlendInputs& inputs);

}  // namespace gsf::mafb
