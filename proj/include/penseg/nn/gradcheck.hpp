#pragma once

#include <cstdint>
#include <variant>
#include <vector>

#include "penseg/nn/network.hpp"

namespace penseg::nn {

/// Either cross-entropy against labels (softmax heads) or the linear
/// functional sum(output .* projection).
using Objective = std::variant<std::vector<int>, Matrix>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

/// Central-difference check of every parameter of `net` on objective + l2 penalty.
/// Stochastic layers replay the same mask from `mask_seed`.
/// Relative error per entry: |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport gradient_check(Network& net, const Matrix& inputs, const Objective& objective, double eps = 1e-5,
                               Mode mode = Mode::Infer, std::uint64_t mask_seed = 0);

/// Builds `specs` on `input`, draws a random batch and objective from `seed`,
/// and runs gradient_check.
GradCheckReport check_layers(const Shape& input, const std::vector<LayerSpec>& specs, std::uint64_t seed,
                             std::size_t batch = 3, double l2 = 0.01, double eps = 1e-5);

}  // namespace penseg::nn
