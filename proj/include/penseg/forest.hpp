#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "penseg/nn/tensor.hpp"

namespace penseg::forest {

using nn::Matrix;

struct Node {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  int label = 0;  // leaf majority class (lowest index on ties)

  friend bool operator==(const Node&, const Node&) = default;
};

class DecisionTree {
 public:
  DecisionTree() = default;
  explicit DecisionTree(std::vector<Node> nodes) : nodes_(std::move(nodes)) {}

  int predict(std::span<const double> row) const;
  const std::vector<Node>& nodes() const { return nodes_; }
  std::size_t depth() const;

  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;

 private:
  std::vector<Node> nodes_;
};

struct ForestConfig {
  std::size_t n_estimators = 50;
  double train_fraction = 0.25;  // row subsample before bootstrapping
  std::size_t max_features = 0;  // 0: ceil(sqrt(n_features))
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;
};

class RandomForest {
 public:
  RandomForest() = default;
  RandomForest(std::vector<DecisionTree> trees, std::size_t n_features, int n_classes)
      : trees_(std::move(trees)), n_features_(n_features), n_classes_(n_classes) {}

  /// Per-class vote counts for one row.
  std::vector<int> votes(std::span<const double> row) const;
  /// Majority vote; ties go to the lowest class index.
  int predict(std::span<const double> row) const;
  std::vector<int> predict(const Matrix& rows) const;

  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::size_t n_features() const { return n_features_; }
  int n_classes() const { return n_classes_; }

  friend bool operator==(const RandomForest&, const RandomForest&) = default;

 private:
  std::vector<DecisionTree> trees_;
  std::size_t n_features_ = 0;
  int n_classes_ = 0;
};

/// Gini impurity of a class histogram.
double gini(std::span<const std::size_t> counts);

/// Grows one unpruned tree on `rows` of `x` with Gini splits over random
/// feature subsets.
DecisionTree grow_tree(const Matrix& x, std::span<const int> y, std::vector<std::size_t> rows, int n_classes,
                       std::size_t max_features, std::size_t min_leaf, std::uint64_t seed);

/// Subsamples train_fraction of the rows, then fits each tree on a bootstrap
/// of that subsample. Throws DegenerateData when fewer than two classes occur.
RandomForest train_forest(const Matrix& x, std::span<const int> y, const ForestConfig& cfg = {});

inline constexpr std::uint32_t kForestVersion = 1;
/// Text container; layout in docs/checkpoint_format.md.
void save_forest(std::ostream& out, const RandomForest& forest);
RandomForest load_forest(std::istream& in);
void save_forest(const std::filesystem::path& file, const RandomForest& forest);
RandomForest load_forest(const std::filesystem::path& file);

}  // namespace penseg::forest
