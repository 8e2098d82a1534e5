#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "penseg/alphabet.hpp"
#include "penseg/boundary.hpp"
#include "penseg/metrics.hpp"
#include "penseg/nn/network.hpp"
#include "penseg/nn/train.hpp"
#include "penseg/preprocess.hpp"
#include "penseg/recording.hpp"

namespace penseg::charclf {

using nn::Matrix;

/// 16x13 window -> Conv[4,1]x32 -> Conv[4,1]x64 -> MaxPool[2,1] -> LSTM(128)
/// -> Dropout -> Dense(15).
nn::Network build_char_model(std::uint64_t seed, double l2 = 0.01);

/// Windows of every labelled segment of one prepared recording; segment
/// indices are recorded in the window source.
std::vector<prep::Window> segment_windows(const Recording& prepared, const std::vector<Segment>& segments);

/// One row per window. Labels are required.
nn::Dataset windows_to_dataset(const std::vector<prep::Window>& windows);
Matrix windows_matrix(const std::vector<prep::Window>& windows);

struct CharTrainConfig {
  nn::TrainConfig train{128, 0.001, 5, 100, 0.01, 0};
  std::array<double, 3> ratios{0.6, 0.2, 0.2};
};

struct CharTrainResult {
  nn::TrainResult fit;
  nn::SplitIndices split;
  metrics::ConfusionMatrix test_confusion{kNumClasses};
  double test_macro_f1 = 0.0;
};

/// Seeded 60/20/20 split, training, and test-split evaluation.
CharTrainResult train_character_classifier(const nn::Dataset& data, const CharTrainConfig& cfg);

struct FoldReport {
  std::vector<double> macro_f1;
  double min() const;
  double max() const;
  double mean() const;
};

/// k-fold cross-validation: each fold is the test set once, the remaining
/// folds are cut 75/25 into train and validation.
FoldReport cross_validate(const nn::Dataset& data, const CharTrainConfig& cfg, std::size_t folds = 5);

struct SegmentPrediction {
  Segment segment;
  Matrix window_probs;  // one row per window
  std::array<double, kNumClasses> mean{};
  CharClass cls{0};
  double confidence = 0.0;
};

/// Averages per-window probabilities; argmax with lowest index on ties.
/// Throws NoWindows for an empty matrix.
SegmentPrediction aggregate(const Segment& segment, Matrix window_probs);
SegmentPrediction predict_segment(const nn::Network& model, const Segment& segment,
                                  const std::vector<prep::Window>& windows);

struct AdaptConfig {
  nn::TrainConfig train{128, 0.001, 3, 20, 0.01, 0};
  double val_fraction = 0.2;
  boundary::CleanConfig clean;
  prep::PreprocessConfig prep;
};

struct AdaptationSet {
  std::vector<prep::Window> windows;
  std::vector<std::string> skipped;  // ids of terms that could not be aligned
};

/// Boundary models segment each labelled term; segments are merged down to
/// the label length and labelled in order. Terms with too few segments are skipped.
AdaptationSet adaptation_windows(const std::vector<Recording>& terms, const boundary::BoundaryModel& boundary,
                                 const AdaptConfig& cfg);

struct AdaptResult {
  nn::Network model;
  AdaptationSet data;
  std::vector<nn::EpochRecord> history;
};

/// Fine-tunes a copy of `base` on the adaptation windows (80/20 split).
/// Throws NoAdaptationWindows when no term yields windows.
AdaptResult adapt_to_writer(const nn::Network& base, const std::vector<Recording>& terms,
                            const boundary::BoundaryModel& boundary, const AdaptConfig& cfg);

}  // namespace penseg::charclf
