#pragma once

#include <cstddef>
#include <vector>

#include "v2s/params.hpp"
#include "v2s/tensor.hpp"

namespace v2s {

struct AdamConfig {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;  // added after the square root
};

struct AdamState {
  AdamConfig hyper;
  std::size_t t = 0;
  std::vector<Tensor> m;  // parallel to the ParamSet order
  std::vector<Tensor> v;
};

AdamState make_adam(const AdamConfig& cfg, const ParamSet& params);

// Standard bias-corrected Adam. grads is parallel to params' order. Pure in
// (state, params, grads); throws FrozenError on a frozen ParamSet.
void adam_step(AdamState& state, ParamSet& params,
               const std::vector<Tensor>& grads);

}  // namespace v2s
