#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace penseg::nn {

/// Batch-major storage: one row per batch item, the item's tensor flattened
/// row-major in the columns.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Per-item extents, e.g. {16, 13, 1} for a window.
using Shape = std::vector<std::size_t>;

std::size_t volume(const Shape& shape);
std::string to_string(const Shape& shape);

/// A batch of equally shaped tensors.
struct Tensor {
  Shape shape;
  Matrix data;  // rows = batch, cols = volume(shape)

  std::size_t batch() const { return static_cast<std::size_t>(data.rows()); }
  bool finite() const { return data.allFinite(); }
};

}  // namespace penseg::nn
