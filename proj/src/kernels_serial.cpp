#include "kernels_detail.hpp"

namespace gsf::kernels {

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, const ConvGeometry& g) {
  if (g.stride == 0 || in + 2 * g.pad < kernel) {
    throw std::invalid_argument("conv2d: kernel " + std::to_string(kernel) + " does not fit extent " +
                                std::to_string(in));
  }
  return (in + 2 * g.pad - kernel) / g.stride + 1;
}

namespace serial {

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_matmul(a, b);
  Tensor c({a.dim(0), b.dim(1)});
  for (std::size_t i = 0; i < a.dim(0); ++i) detail::matmul_row(a, b, c, i);
  return c;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const ConvGeometry& g) {
  detail::check_conv(input, weight, bias);
  Tensor out(detail::conv_out_shape(input, weight, g));
  for (std::size_t co = 0; co < weight.dim(0); ++co) detail::conv_out_channel(input, weight, bias, g, out, co);
  return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape,
                         const ConvGeometry& g) {
  Tensor gin(input_shape);
  for (std::size_t ci = 0; ci < input_shape[0]; ++ci) detail::conv_grad_input_channel(grad_out, weight, g, gin, ci);
  return gin;
}

Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input, const Shape& weight_shape,
                          const ConvGeometry& g, Tensor& grad_bias) {
  Tensor gw(weight_shape);
  grad_bias = Tensor({weight_shape[0]});
  for (std::size_t co = 0; co < weight_shape[0]; ++co)
    detail::conv_grad_weight_channel(grad_out, input, g, gw, grad_bias, co);
  return gw;
}

}  // namespace serial
}  // namespace gsf::kernels
