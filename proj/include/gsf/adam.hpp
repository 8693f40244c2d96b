#pragma once

#include <cstddef>
#include <vector>

#include "gsf/autodiff.hpp"
#include "gsf/tensor.hpp"

namespace gsf {

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::size_t step = 0;
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
};

// One bias-corrected Adam update. Moments are allocated on the first call.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads, AdamState& state);

// Convenience wrapper over a fixed list of autodiff parameters.
class Adam {
 public:
  Adam(std::vector<ad::Var> params, double lr = 1e-4);

  void step();
  void zero_grad();
  const AdamState& state() const { return state_; }

 private:
  std::vector<ad::Var> params_;
  AdamState state_;
};

}  // namespace gsf
