#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "penseg/forest.hpp"
#include "penseg/nn/network.hpp"
#include "penseg/nn/train.hpp"
#include "penseg/recording.hpp"

namespace penseg::boundary {

using nn::Matrix;
using ActivitySequence = std::vector<bool>;

inline constexpr std::size_t kFeatureDim = 128;
/// Index of the LSTM layer whose output is used as the feature vector.
inline constexpr std::size_t kFeatureLayer = 3;

/// 1x13 sample -> two [1,1] convolutions -> LSTM(128) -> Dropout -> Dense(2).
nn::Network build_boundary_extractor(std::uint64_t seed, double l2 = 0.01);

/// One row per resampled sample, 13 columns.
Matrix sample_matrix(const Recording& prepared);

/// Per-sample labels: 1 inside any of `segments`, else 0.
std::vector<int> activity_labels(std::size_t length, const std::vector<Segment>& segments);
ActivitySequence activity_from_segments(std::size_t length, const std::vector<Segment>& segments);

struct BalanceConfig {
  double max_majority = 0.55;
  std::size_t max_samples = 40000;  // 0: no cap
};

/// Subsamples the majority class until it is at most max_majority of the rows,
/// then caps the total. Row order of the survivors is preserved.
nn::Dataset balance(const nn::Dataset& data, const BalanceConfig& cfg, std::uint64_t seed);

struct ExtractorTrainConfig {
  nn::TrainConfig train{2048, 0.001, 5, 100, 0.01, 0};
  double val_fraction = 0.2;
};

/// Seeded train/validation cut of `samples`, then nn::train.
nn::TrainResult train_boundary_extractor(nn::Network model, const nn::Dataset& samples, const ExtractorTrainConfig& cfg);

/// LSTM output for every row (inference mode). Throws ShapeMismatch.
Matrix extract_features(const nn::Network& model, const Matrix& samples);

/// Majority vote per row; ties count as inactive.
ActivitySequence predict_activity(const forest::RandomForest& forest, const Matrix& features);
/// The extractor's own softmax head, argmax per row.
ActivitySequence dense_activity(const nn::Network& model, const Matrix& samples);

struct CleanConfig {
  std::size_t min_run = 5;
  std::size_t extend = 4;
  std::size_t guard = 3;
};

/// Flips runs shorter than min_run that have the opposite value on both sides,
/// shortest first, until none remain.
ActivitySequence remove_outliers(const ActivitySequence& seq, std::size_t min_run);
/// Grows each active run by up to `extend` per side, staying `guard` samples
/// clear of the neighbouring run.
ActivitySequence extend_runs(const ActivitySequence& seq, std::size_t extend, std::size_t guard);
ActivitySequence clean_activity(const ActivitySequence& seq, const CleanConfig& cfg = {});

/// One segment per maximal active run, in order.
std::vector<Segment> segments_from_activity(const ActivitySequence& seq);

struct MergeResult {
  std::vector<Segment> segments;
  bool short_count = false;  // fewer segments than requested
};

/// Merges the closest neighbours (earliest on ties) until at most k remain.
MergeResult merge_to_count(std::vector<Segment> segments, std::size_t k);

/// Extractor plus forest, applied to one prepared recording.
struct BoundaryModel {
  nn::Network extractor;
  forest::RandomForest forest;

  ActivitySequence activity(const Recording& prepared) const;
};

}  // namespace penseg::boundary
