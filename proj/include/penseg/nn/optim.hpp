#pragma once

#include <cstdint>
#include <vector>

#include "penseg/nn/network.hpp"

namespace penseg::nn {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::vector<Matrix> m;
  std::vector<Matrix> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update over parallel lists of parameters and gradients.
void adam_step(std::vector<Matrix*> params, const std::vector<const Matrix*>& grads, AdamState& state,
               const AdamConfig& cfg = {});

/// Convenience overload for a whole network.
void adam_step(Network& net, const Gradients& grads, AdamState& state, const AdamConfig& cfg = {});

}  // namespace penseg::nn
