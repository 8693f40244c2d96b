#pragma once

#include <cstddef>

#include "gsf/tensor.hpp"

// Dense compute kernels behind the autodiff engine.
//
// Every kernel exists twice: a plain serial loop nest kept as the reference,
// and an OpenMP version that partitions the outermost output axis across
// threads. Each output element is accumulated by exactly one thread in the
// same order as the serial loop, so both variants are bit-identical.
namespace gsf::kernels {

struct ConvGeometry {
  std::size_t stride = 1;
  std::size_t pad = 0;
};

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, const ConvGeometry& g);

namespace serial {
// [m,k] x [k,n] -> [m,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// input [Ci,H,W], weight [Co,Ci,K,K], bias [Co] -> [Co,Ho,Wo]
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const ConvGeometry& g);
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape,
                         const ConvGeometry& g);
// Returns the weight gradient; bias gradient is written to grad_bias.
Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input, const Shape& weight_shape,
                          const ConvGeometry& g, Tensor& grad_bias);
}  // namespace serial

namespace parallel {
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const ConvGeometry& g);
Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape,
                         const ConvGeometry& g);
Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input, const Shape& weight_shape,
                          const ConvGeometry& g, Tensor& grad_bias);
}  // namespace parallel

// Default entry points used by the library.
using parallel::conv2d;
using parallel::conv2d_grad_input;
using parallel::conv2d_grad_weight;
using parallel::matmul;

}  // namespace gsf::kernels
