#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "penseg/nn/tensor.hpp"
#include "penseg/rng.hpp"

namespace penseg::nn {

enum class LayerKind : std::uint32_t { Conv2D = 0, MaxPool = 1, LSTM = 2, Dense = 3, Dropout = 4, Reshape = 5 };
enum class Activation : std::uint32_t { Linear = 0, Relu = 1, Softmax = 2 };
enum class Mode { Train, Infer };

const char* to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  std::size_t kernel_h = 1;  // Conv2D kernel or MaxPool window
  std::size_t kernel_w = 1;
  std::size_t filters = 0;   // Conv2D
  std::size_t units = 0;     // LSTM / Dense
  bool return_sequences = false;
  Activation activation = Activation::Linear;
  double rate = 0.0;  // Dropout
  Shape target;       // Reshape

  static LayerSpec conv2d(std::size_t kh, std::size_t kw, std::size_t filters);
  static LayerSpec maxpool(std::size_t ph, std::size_t pw);
  static LayerSpec lstm(std::size_t units, bool return_sequences = false);
  static LayerSpec dense(std::size_t units, Activation act = Activation::Linear);
  static LayerSpec dropout(double rate);
  static LayerSpec reshape(Shape target);

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Scratch a layer keeps between its forward and backward pass.
struct LayerCache {
  std::vector<Matrix> mats;
  std::vector<std::vector<std::size_t>> indices;
};

struct ParamInfo {
  std::string name;
  bool regularized;  // weights yes, biases no
};

class Layer {
 public:
  Layer(LayerSpec spec, Shape input);
  virtual ~Layer() = default;

  const LayerSpec& spec() const { return spec_; }
  const Shape& input_shape() const { return input_; }
  const Shape& output_shape() const { return output_; }

  std::vector<Matrix>& params() { return params_; }
  const std::vector<Matrix>& params() const { return params_; }
  const std::vector<ParamInfo>& param_info() const { return info_; }
  std::size_t param_count() const;

  virtual void init(Rng& rng) = 0;
  /// `rng` is only used in Mode::Train by stochastic layers.
  virtual Matrix forward(const Matrix& in, Mode mode, Rng* rng, LayerCache& cache) const = 0;
  /// Accumulates into `grads` (same layout as params()) and returns dL/din
  /// when `want_input_grad`.
  virtual Matrix backward(const Matrix& in, const Matrix& out, const Matrix& dout, const LayerCache& cache,
                          std::vector<Matrix>& grads, bool want_input_grad) const = 0;
  virtual std::unique_ptr<Layer> clone() const = 0;

 protected:
  void add_param(std::string name, std::size_t rows, std::size_t cols, bool regularized);

  LayerSpec spec_;
  Shape input_;
  Shape output_;
  std::vector<Matrix> params_;
  std::vector<ParamInfo> info_;
};

/// Validates the spec against the input shape; throws ShapeMismatch.
std::unique_ptr<Layer> make_layer(const LayerSpec& spec, const Shape& input);

/// Row-wise softmax with max subtraction.
Matrix softmax_rows(const Matrix& logits);

}  // namespace penseg::nn
