#include <omp.h>

#include "kernels_detail.hpp"

namespace gsf::kernels::parallel {

namespace {
// Below this many multiply-adds the thread fork costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 14;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  detail::check_matmul(a, b);
  Tensor c({a.dim(0), b.dim(1)});
  const long m = static_cast<long>(a.dim(0));
  const bool go_parallel = a.dim(0) * a.dim(1) * b.dim(1) >= kParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (long i = 0; i < m; ++i) detail::matmul_row(a, b, c, static_cast<std::size_t>(i));
  return c;
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, const ConvGeometry& g) {
  detail::check_conv(input, weight, bias);
  Tensor out(detail::conv_out_shape(input, weight, g));
  const long co_n = static_cast<long>(weight.dim(0));
  const bool go_parallel = out.size() * weight.dim(1) * weight.dim(2) * weight.dim(3) >= kParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (long co = 0; co < co_n; ++co)
    detail::conv_out_channel(input, weight, bias, g, out, static_cast<std::size_t>(co));
  return out;
}

Tensor conv2d_grad_input(const Tensor& grad_out, const Tensor& weight, const Shape& input_shape,
                         const ConvGeometry& g) {
  Tensor gin(input_shape);
  const long ci_n = static_cast<long>(input_shape[0]);
  const bool go_parallel = grad_out.size() * weight.dim(1) * weight.dim(2) * weight.dim(3) >= kParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (long ci = 0; ci < ci_n; ++ci)
    detail::conv_grad_input_channel(grad_out, weight, g, gin, static_cast<std::size_t>(ci));
  return gin;
}

Tensor conv2d_grad_weight(const Tensor& grad_out, const Tensor& input, const Shape& weight_shape,
                          const ConvGeometry& g, Tensor& grad_bias) {
  Tensor gw(weight_shape);
  grad_bias = Tensor({weight_shape[0]});
  const long co_n = static_cast<long>(weight_shape[0]);
  const bool go_parallel = grad_out.size() * weight_shape[1] * weight_shape[2] * weight_shape[3] >= kParallelWork;
#pragma omp parallel for schedule(static) if (go_parallel)
  for (long co = 0; co < co_n; ++co)
    detail::conv_grad_weight_channel(grad_out, input, g, gw, grad_bias, static_cast<std::size_t>(co));
  return gw;
}

}  // namespace gsf::kernels::parallel
