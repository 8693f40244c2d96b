#pragma once

// Per-row bodies shared by the serial and OpenMP kernels.

#include <stdexcept>
#include <string>

#include "gsf/kernels.hpp"

namespace gsf::kernels::detail {

inline void check_matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " + shape_string(a.shape()) + " and " +
                                shape_string(b.shape()));
  }
}

inline void matmul_row(const Tensor& a, const Tensor& b, Tensor& c, std::size_t i) {
  const std::size_t k = a.dim(1), n = b.dim(1);
  const double* arow = a.data().data() + i * k;
  double* crow = c.data().data() + i * n;
  const double* bd = b.data().data();
  for (std::size_t p = 0; p < k; ++p) {
    const double av = arow[p];
    const double* brow = bd + p * n;
    for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
  }
}

inline void check_conv(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (input.rank() != 3 || weight.rank() != 4 || bias.rank() != 1 || weight.dim(1) != input.dim(0) ||
      weight.dim(0) != bias.dim(0) || weight.dim(2) != weight.dim(3)) {
    throw std::invalid_argument("conv2d: incompatible shapes input " + shape_string(input.shape()) +
                                " weight " + shape_string(weight.shape()) + " bias " +
                                shape_string(bias.shape()));
  }
}

inline void conv_out_channel(const Tensor& in, const Tensor& w, const Tensor& bias, const ConvGeometry& g,
                             Tensor& out, std::size_t co) {
  const std::size_t ci_n = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t k = w.dim(2);
  const std::size_t ho = out.dim(1), wo = out.dim(2);
  for (std::size_t oy = 0; oy < ho; ++oy) {
    for (std::size_t ox = 0; ox < wo; ++ox) {
      double acc = bias[co];
      for (std::size_t ci = 0; ci < ci_n; ++ci) {
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(wd)) continue;
            acc += w[((co * ci_n + ci) * k + ky) * k + kx] * in.at(ci, iy, ix);
          }
        }
      }
      out.at(co, oy, ox) = acc;
    }
  }
}

inline void conv_grad_input_channel(const Tensor& gout, const Tensor& w, const ConvGeometry& g, Tensor& gin,
                                    std::size_t ci) {
  const std::size_t co_n = w.dim(0), ci_n = w.dim(1), k = w.dim(2);
  const std::size_t h = gin.dim(1), wd = gin.dim(2);
  const std::size_t ho = gout.dim(1), wo = gout.dim(2);
  for (std::size_t co = 0; co < co_n; ++co) {
    for (std::size_t oy = 0; oy < ho; ++oy) {
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const double go = gout.at(co, oy, ox);
        if (go == 0.0) continue;
        for (std::size_t ky = 0; ky < k; ++ky) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t kx = 0; kx < k; ++kx) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(wd)) continue;
            gin.at(ci, iy, ix) += go * w[((co * ci_n + ci) * k + ky) * k + kx];
          }
        }
      }
    }
  }
}

inline void conv_grad_weight_channel(const Tensor& gout, const Tensor& in, const ConvGeometry& g, Tensor& gw,
                                     Tensor& gb, std::size_t co) {
  const std::size_t ci_n = in.dim(0), h = in.dim(1), wd = in.dim(2);
  const std::size_t k = gw.dim(2);
  const std::size_t ho = gout.dim(1), wo = gout.dim(2);
  double bsum = 0.0;
  for (std::size_t oy = 0; oy < ho; ++oy)
    for (std::size_t ox = 0; ox < wo; ++ox) bsum += gout.at(co, oy, ox);
  gb[co] = bsum;
  for (std::size_t ci = 0; ci < ci_n; ++ci) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        double acc = 0.0;
        for (std::size_t oy = 0; oy < ho; ++oy) {
          const long iy = static_cast<long>(oy * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(h)) continue;
          for (std::size_t ox = 0; ox < wo; ++ox) {
            const long ix = static_cast<long>(ox * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(wd)) continue;
            acc += gout.at(co, oy, ox) * in.at(ci, iy, ix);
          }
        }
        gw[((co * ci_n + ci) * k + ky) * k + kx] = acc;
      }
    }
  }
}

inline Shape conv_out_shape(const Tensor& input, const Tensor& weight, const ConvGeometry& g) {
  const std::size_t k = weight.dim(2);
  return {weight.dim(0), conv_out_extent(input.dim(1), k, g), conv_out_extent(input.dim(2), k, g)};
}

}  // namespace gsf::kernels::detail
