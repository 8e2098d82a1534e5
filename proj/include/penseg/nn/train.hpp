#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

#include "penseg/nn/network.hpp"
#include "penseg/nn/optim.hpp"
#include "penseg/rng.hpp"

namespace penseg::nn {

struct TrainConfig {
  std::size_t batch_size = 128;
  double learning_rate = 0.001;
  std::size_t patience = 5;
  std::size_t max_epochs = 100;
  double l2_rate = 0.01;
  std::uint64_t seed = 0;
};

/// Inputs (one row per item) with integer class labels.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  Dataset subset(const std::vector<std::size_t>& rows) const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
};

/// Tracks the best validation loss; stops after `patience` epochs without a
/// strict improvement.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience);
  /// Returns true when `val_loss` is a new best.
  bool update(double val_loss);
  bool should_stop() const { return stale_ >= patience_; }
  std::size_t best_epoch() const { return best_epoch_; }
  double best_loss() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t epoch_ = 0;
  std::size_t best_epoch_ = 0;
  std::size_t stale_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  Network model;  // weights from the best validation epoch
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  bool stopped_early = false;
};

/// Mini-batch Adam on mean cross-entropy (+ l2) with seeded shuffling and
/// early stopping. Throws Diverged on a non-finite loss.
TrainResult train(Network model, const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg);

/// Mean cross-entropy over a dataset in inference mode (no l2 term).
double evaluate_loss(const Network& model, const Dataset& data, std::size_t batch_size = 512);
/// Softmax outputs for every row, batched.
Matrix predict_batched(const Network& model, const Matrix& inputs, std::size_t batch_size = 512);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Seeded shuffle then contiguous cut: train = round(n * r0), val = round(n * r1),
/// test takes the rest. Ratios must sum to 1.
SplitIndices split_dataset(std::size_t n, std::array<double, 3> ratios, Rng& rng);

}  // namespace penseg::nn
