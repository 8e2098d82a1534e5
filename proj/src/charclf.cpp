#include "penseg/charclf.hpp"

#include <algorithm>
#include <numeric>

#include "penseg/errors.hpp"
#include "penseg/rng.hpp"

namespace penseg::charclf {

using nn::LayerSpec;

nn::Network build_char_model(std::uint64_t seed, double l2) {
  std::vector<LayerSpec> specs{
      LayerSpec::conv2d(4, 1, 32),
      LayerSpec::conv2d(4, 1, 64),
      LayerSpec::maxpool(2, 1),
      LayerSpec::reshape({5, kNumChannels * 64}),
      LayerSpec::lstm(128),
      LayerSpec::dropout(0.5),
      LayerSpec::dense(kNumClasses, nn::Activation::Softmax),
  };
  return nn::Network({prep::kWindowSize, kNumChannels, 1}, std::move(specs), seed, l2);
}

std::vector<prep::Window> segment_windows(const Recording& prepared, const std::vector<Segment>& segments) {
  std::vector<prep::Window> out;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    auto ws = prep::make_windows(prepared, segments[s]);
    for (auto& w : ws) {
      w.source.segment = s;
      out.push_back(std::move(w));
    }
  }
  return out;
}

Matrix windows_matrix(const std::vector<prep::Window>& windows) {
  constexpr std::size_t width = prep::kWindowSize * kNumChannels;
  Matrix m(static_cast<Eigen::Index>(windows.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (std::size_t k = 0; k < width; ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = windows[i].values[k];
  }
  return m;
}

nn::Dataset windows_to_dataset(const std::vector<prep::Window>& windows) {
  nn::Dataset d;
  d.inputs = windows_matrix(windows);
  d.labels.reserve(windows.size());
  for (const auto& w : windows) {
    if (!w.label) throw DegenerateData("window from " + w.source.recording + " has no label");
    d.labels.push_back(w.label->index());
  }
  return d;
}

namespace {

metrics::ConfusionMatrix evaluate(const nn::Network& model, const nn::Dataset& data) {
  const auto pred = nn::argmax_rows(nn::predict_batched(model, data.inputs));
  return metrics::confusion(data.labels, pred, kNumClasses);
}

}  // namespace

CharTrainResult train_character_classifier(const nn::Dataset& data, const CharTrainConfig& cfg) {
  if (data.size() == 0) throw DegenerateData("no character windows");
  Rng rng = make_rng(derive_seed(cfg.train.seed, "charclf/split"));
  auto split = nn::split_dataset(data.size(), cfg.ratios, rng);
  auto fit = nn::train(build_char_model(derive_seed(cfg.train.seed, "charclf/init"), cfg.train.l2_rate),
                       data.subset(split.train), data.subset(split.val), cfg.train);
  CharTrainResult out{std::move(fit), std::move(split)};
  if (!out.split.test.empty()) {
    out.test_confusion = evaluate(out.fit.model, data.subset(out.split.test));
    out.test_macro_f1 = out.test_confusion.macro_f1();
  }
  return out;
}

double FoldReport::min() const { return macro_f1.empty() ? 0.0 : *std::min_element(macro_f1.begin(), macro_f1.end()); }
double FoldReport::max() const { return macro_f1.empty() ? 0.0 : *std::max_element(macro_f1.begin(), macro_f1.end()); }
double FoldReport::mean() const {
  return macro_f1.empty() ? 0.0 : std::accumulate(macro_f1.begin(), macro_f1.end(), 0.0) / static_cast<double>(macro_f1.size());
}

FoldReport cross_validate(const nn::Dataset& data, const CharTrainConfig& cfg, std::size_t folds) {
  if (folds < 2 || data.size() < folds) throw DegenerateData("not enough windows for cross-validation");
  Rng rng = make_rng(derive_seed(cfg.train.seed, "charclf/folds"));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  FoldReport report;
  for (std::size_t f = 0; f < folds; ++f) {
    const std::size_t lo = data.size() * f / folds, hi = data.size() * (f + 1) / folds;
    std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(lo), order.begin() + static_cast<std::ptrdiff_t>(hi));
    std::vector<std::size_t> rest(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(lo));
    rest.insert(rest.end(), order.begin() + static_cast<std::ptrdiff_t>(hi), order.end());
    const std::size_t cut = (rest.size() * 3 + 2) / 4;
    std::vector<std::size_t> train(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(cut));
    std::vector<std::size_t> val(rest.begin() + static_cast<std::ptrdiff_t>(cut), rest.end());
    nn::TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.train.seed, "charclf/fold", f);
    auto fit = nn::train(build_char_model(derive_seed(tc.seed, "charclf/init"), tc.l2_rate), data.subset(train),
                         data.subset(val), tc);
    report.macro_f1.push_back(evaluate(fit.model, data.subset(test)).macro_f1());
  }
  return report;
}

SegmentPrediction aggregate(const Segment& segment, Matrix window_probs) {
  if (window_probs.rows() == 0) throw NoWindows();
  SegmentPrediction p;
  p.segment = segment;
  const nn::RowVector mean = window_probs.colwise().mean();
  std::size_t best = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    p.mean[c] = mean(static_cast<Eigen::Index>(c));
    if (p.mean[c] > p.mean[best]) best = c;
  }
  p.cls = CharClass(static_cast<int>(best));
  p.confidence = p.mean[best];
  p.window_probs = std::move(window_probs);
  return p;
}

SegmentPrediction predict_segment(const nn::Network& model, const Segment& segment,
                                  const std::vector<prep::Window>& windows) {
  if (windows.empty()) throw NoWindows();
  return aggregate(segment, model.predict(windows_matrix(windows)));
}

AdaptationSet adaptation_windows(const std::vector<Recording>& terms, const boundary::BoundaryModel& boundary,
                                 const AdaptConfig& cfg) {
  AdaptationSet set;
  for (const auto& term : terms) {
    if (!term.label) throw DegenerateData("adaptation term " + term.id + " has no label");
    const auto label = decode_label(*term.label);
    const Recording prepared = prep::prepare(term, cfg.prep);
    const auto activity = boundary::clean_activity(boundary.activity(prepared), cfg.clean);
    auto merged = boundary::merge_to_count(boundary::segments_from_activity(activity), label.size());
    if (merged.short_count) {
      set.skipped.push_back(term.id);
      continue;
    }
    for (std::size_t i = 0; i < label.size(); ++i) merged.segments[i].label = label[i];
    auto ws = segment_windows(prepared, merged.segments);
    set.windows.insert(set.windows.end(), std::make_move_iterator(ws.begin()), std::make_move_iterator(ws.end()));
  }
  return set;
}

AdaptResult adapt_to_writer(const nn::Network& base, const std::vector<Recording>& terms,
                            const boundary::BoundaryModel& boundary, const AdaptConfig& cfg) {
  AdaptationSet set = adaptation_windows(terms, boundary, cfg);
  if (set.windows.empty()) throw NoAdaptationWindows();
  const nn::Dataset data = windows_to_dataset(set.windows);
  Rng rng = make_rng(derive_seed(cfg.train.seed, "adapt/split"));
  auto split = nn::split_dataset(data.size(), {1.0 - cfg.val_fraction, cfg.val_fraction, 0.0}, rng);
  if (split.val.empty()) split.val = split.train;
  nn::Network start = base;
  start.set_l2(cfg.train.l2_rate);
  auto fit = nn::train(std::move(start), data.subset(split.train), data.subset(split.val), cfg.train);
  return {std::move(fit.model), std::move(set), std::move(fit.history)};
}

}  // namespace penseg::charclf
