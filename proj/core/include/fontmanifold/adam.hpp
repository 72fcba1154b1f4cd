#pragma once

#include <cstdint>

#include "fontmanifold/autodiff.hpp"

namespace fm::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::uint64_t step = 0;
  ParameterSet first_moment;
  ParameterSet second_moment;
};

/// One bias-corrected Adam update, applied to parameters in name order.
/// Parameters missing from `grads` are treated as having zero gradient.
void adam_step(ParameterSet& params, const Gradients& grads, AdamState& state,
               const AdamConfig& config = {});

}  // namespace fm::ad
