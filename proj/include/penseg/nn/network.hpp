#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <vector>

#include "penseg/nn/layers.hpp"
#include "penseg/nn/tensor.hpp"
#include "penseg/rng.hpp"

namespace penseg::nn {

/// Every layer's output for one batch, plus the per-layer caches backward needs.
struct ForwardTrace {
  Matrix input;
  std::vector<Matrix> outputs;
  std::vector<LayerCache> caches;

  const Matrix& output() const { return outputs.back(); }
};

/// Parameter gradients, indexed [layer][param].
using Gradients = std::vector<std::vector<Matrix>>;

/// An ordered stack of layers with owned parameters. Copies are deep.
class Network {
 public:
  /// Checks shape compatibility and initializes parameters from `seed`.
  /// Throws ShapeMismatch.
  Network(Shape input, std::vector<LayerSpec> specs, std::uint64_t seed, double l2 = 0.0);

  Network(const Network& other);
  Network& operator=(const Network& other);
  Network(Network&&) noexcept = default;
  Network& operator=(Network&&) noexcept = default;

  const Shape& input_shape() const { return input_; }
  const Shape& output_shape() const;
  Shape layer_output_shape(std::size_t layer) const { return layers_.at(layer)->output_shape(); }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  std::size_t size() const { return layers_.size(); }
  std::uint64_t seed() const { return seed_; }
  double l2() const { return l2_; }
  void set_l2(double l2) { l2_ = l2; }

  Layer& layer(std::size_t i) { return *layers_.at(i); }
  const Layer& layer(std::size_t i) const { return *layers_.at(i); }
  std::size_t param_count() const;

  /// Runs all layers. Throws ShapeMismatch if `batch` has the wrong width.
  ForwardTrace forward(const Matrix& batch, Mode mode, Rng* rng = nullptr) const;
  /// Output of layer `last` (inclusive) in inference mode.
  Matrix forward_to(const Matrix& batch, std::size_t last) const;
  Matrix predict(const Matrix& batch) const;

  /// Backpropagates dLoss/dOutput and adds the l2 term (l2 * w) for weights.
  Gradients backward(const ForwardTrace& trace, const Matrix& output_grad) const;
  Gradients zero_gradients() const;

  /// 0.5 * l2 * sum of squared regularized weights.
  double l2_penalty() const;

  /// Flat views over all parameters, in layer order.
  std::vector<Matrix*> parameters();
  std::vector<const Matrix*> parameters() const;

 private:
  void check_batch(const Matrix& batch) const;

  Shape input_;
  std::vector<LayerSpec> specs_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::uint64_t seed_ = 0;
  double l2_ = 0.0;
};

/// Mean cross-entropy of softmax outputs against integer labels.
double cross_entropy(const Matrix& probs, const std::vector<int>& labels);
/// dLoss/dProbs for the mean cross-entropy; probabilities are floored at 1e-12.
Matrix cross_entropy_grad(const Matrix& probs, const std::vector<int>& labels);

/// Row-wise argmax, lowest index on ties.
std::vector<int> argmax_rows(const Matrix& m);

}  // namespace penseg::nn
