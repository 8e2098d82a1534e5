#include "penseg/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "penseg/errors.hpp"
#include "penseg/rng.hpp"

namespace penseg::boundary {

using nn::LayerSpec;

nn::Network build_boundary_extractor(std::uint64_t seed, double l2) {
  std::vector<LayerSpec> specs{
      LayerSpec::conv2d(1, 1, 32),
      LayerSpec::conv2d(1, 1, 64),
      LayerSpec::reshape({1, kNumChannels * 64}),
      LayerSpec::lstm(kFeatureDim),
      LayerSpec::dropout(0.5),
      LayerSpec::dense(2, nn::Activation::Softmax),
  };
  return nn::Network({1, kNumChannels, 1}, std::move(specs), seed, l2);
}

Matrix sample_matrix(const Recording& prepared) {
  Matrix m(static_cast<Eigen::Index>(prepared.size()), static_cast<Eigen::Index>(kNumChannels));
  for (std::size_t i = 0; i < prepared.size(); ++i) {
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = prepared.samples[i].channels[c];
    }
  }
  return m;
}

std::vector<int> activity_labels(std::size_t length, const std::vector<Segment>& segments) {
  std::vector<int> y(length, 0);
  for (const auto& s : segments) {
    for (std::size_t i = s.start; i < std::min(s.end, length); ++i) y[i] = 1;
  }
  return y;
}

ActivitySequence activity_from_segments(std::size_t length, const std::vector<Segment>& segments) {
  const auto y = activity_labels(length, segments);
  return ActivitySequence(y.begin(), y.end());
}

nn::Dataset balance(const nn::Dataset& data, const BalanceConfig& cfg, std::uint64_t seed) {
  Rng rng = make_rng(derive_seed(seed, "boundary/balance"));
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < data.size(); ++i) (data.labels[i] ? pos : neg).push_back(i);
  auto& major = pos.size() >= neg.size() ? pos : neg;
  const auto& minor = pos.size() >= neg.size() ? neg : pos;
  const double m = cfg.max_majority;
  const auto allowed = static_cast<std::size_t>(std::floor(m / (1.0 - m) * static_cast<double>(minor.size())));
  if (major.size() > allowed) {
    std::shuffle(major.begin(), major.end(), rng);
    major.resize(allowed);
  }
  std::vector<std::size_t> keep;
  keep.insert(keep.end(), pos.begin(), pos.end());
  keep.insert(keep.end(), neg.begin(), neg.end());
  if (cfg.max_samples > 0 && keep.size() > cfg.max_samples) {
    std::shuffle(keep.begin(), keep.end(), rng);
    keep.resize(cfg.max_samples);
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

nn::TrainResult train_boundary_extractor(nn::Network model, const nn::Dataset& samples, const ExtractorTrainConfig& cfg) {
  Rng rng = make_rng(derive_seed(cfg.train.seed, "boundary/split"));
  const auto split = nn::split_dataset(samples.size(), {1.0 - cfg.val_fraction, cfg.val_fraction, 0.0}, rng);
  model.set_l2(cfg.train.l2_rate);
  return nn::train(std::move(model), samples.subset(split.train), samples.subset(split.val), cfg.train);
}

Matrix extract_features(const nn::Network& model, const Matrix& samples) {
  if (samples.cols() != static_cast<Eigen::Index>(kNumChannels)) {
    throw ShapeMismatch("feature extraction expects " + std::to_string(kNumChannels) + " columns, got " +
                        std::to_string(samples.cols()));
  }
  constexpr Eigen::Index kChunk = 4096;
  Matrix out(samples.rows(), static_cast<Eigen::Index>(kFeatureDim));
  for (Eigen::Index r = 0; r < samples.rows(); r += kChunk) {
    const Eigen::Index n = std::min(kChunk, samples.rows() - r);
    out.middleRows(r, n) = model.forward_to(samples.middleRows(r, n), kFeatureLayer);
  }
  return out;
}

ActivitySequence predict_activity(const forest::RandomForest& forest, const Matrix& features) {
  ActivitySequence out(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index r = 0; r < features.rows(); ++r) {
    const auto v = forest.votes(std::span<const double>(features.row(r).data(), static_cast<std::size_t>(features.cols())));
    out[static_cast<std::size_t>(r)] = v.size() > 1 && v[1] > v[0];
  }
  return out;
}

ActivitySequence dense_activity(const nn::Network& model, const Matrix& samples) {
  const auto cls = nn::argmax_rows(nn::predict_batched(model, samples));
  return ActivitySequence(cls.begin(), cls.end());
}

namespace {

struct Run {
  std::size_t start, end;
  bool value;
};

std::vector<Run> runs_of(const ActivitySequence& seq) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < seq.size();) {
    std::size_t j = i;
    while (j < seq.size() && seq[j] == seq[i]) ++j;
    runs.push_back({i, j, seq[i]});
    i = j;
  }
  return runs;
}

}  // namespace

ActivitySequence remove_outliers(const ActivitySequence& seq, std::size_t min_run) {
  ActivitySequence out = seq;
  for (;;) {
    const auto runs = runs_of(out);
    std::size_t pick = runs.size();
    for (std::size_t r = 1; r + 1 < runs.size(); ++r) {
      const std::size_t len = runs[r].end - runs[r].start;
      if (len >= min_run) continue;
      if (pick == runs.size() || len < runs[pick].end - runs[pick].start) pick = r;
    }
    if (pick == runs.size()) return out;
    for (std::size_t i = runs[pick].start; i < runs[pick].end; ++i) out[i] = !runs[pick].value;
  }
}

ActivitySequence extend_runs(const ActivitySequence& seq, std::size_t extend, std::size_t guard) {
  std::vector<Run> active;
  for (const auto& r : runs_of(seq)) {
    if (r.value) active.push_back(r);
  }
  ActivitySequence out = seq;
  std::vector<std::size_t> grow_left(active.size(), 0), grow_right(active.size(), 0);
  for (std::size_t a = 0; a < active.size(); ++a) {
    if (a == 0) grow_left[a] = std::min(extend, active[a].start);
    if (a + 1 == active.size()) grow_right[a] = std::min(extend, seq.size() - active[a].end);
    if (a + 1 < active.size()) {
      const std::size_t gap = active[a + 1].start - active[a].end;
      const std::size_t room = gap > guard ? gap - guard : 0;
      grow_right[a] = std::min(extend, room);
      grow_left[a + 1] = std::min(extend, room - grow_right[a]);
    }
  }
  for (std::size_t a = 0; a < active.size(); ++a) {
    for (std::size_t i = active[a].start - grow_left[a]; i < active[a].end + grow_right[a]; ++i) out[i] = true;
  }
  return out;
}

ActivitySequence clean_activity(const ActivitySequence& seq, const CleanConfig& cfg) {
  return extend_runs(remove_outliers(seq, cfg.min_run), cfg.extend, cfg.guard);
}

std::vector<Segment> segments_from_activity(const ActivitySequence& seq) {
  std::vector<Segment> out;
  for (const auto& r : runs_of(seq)) {
    if (r.value) out.push_back({r.start, r.end, std::nullopt});
  }
  return out;
}

MergeResult merge_to_count(std::vector<Segment> segments, std::size_t k) {
  MergeResult res;
  res.short_count = segments.size() < k;
  while (segments.size() > k && segments.size() > 1) {
    std::size_t best = 0;
    for (std::size_t i = 1; i + 1 < segments.size(); ++i) {
      if (segments[i + 1].start - segments[i].end < segments[best + 1].start - segments[best].end) best = i;
    }
    segments[best].end = segments[best + 1].end;
    segments.erase(segments.begin() + static_cast<std::ptrdiff_t>(best) + 1);
  }
  res.segments = std::move(segments);
  return res;
}

ActivitySequence BoundaryModel::activity(const Recording& prepared) const {
  return predict_activity(forest, extract_features(extractor, sample_matrix(prepared)));
}

}  // namespace penseg::boundary
