#include <algorithm>

#include "doctest.h"
#include "penseg/charclf.hpp"
#include "penseg/errors.hpp"
#include "penseg/synth.hpp"

using namespace penseg;
using namespace penseg::charclf;

namespace {

Matrix probs(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), kNumClasses);
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

// Windows of every truth segment of a few synthetic terms.
std::vector<prep::Window> labelled_windows(std::uint64_t seed, int terms) {
  Rng rng = make_rng(seed);
  const auto style = synth::default_style();
  std::vector<prep::Window> out;
  for (int k = 0; k < terms; ++k) {
    auto rec = synth::generate_term(style, synth::sample_label(rng), rng);
    rec.writer_id = "w";
    rec.id = std::to_string(k);
    const auto prepared = prep::prepare(rec);
    std::vector<Segment> segs;
    for (const auto& s : *rec.truth_segments) {
      auto r = prep::resample_segment(rec, s);
      REQUIRE(r);
      r->label = s.label;
      segs.push_back(*r);
    }
    const auto ws = segment_windows(prepared, segs);
    out.insert(out.end(), ws.begin(), ws.end());
  }
  return out;
}

}  // namespace

TEST_CASE("aggregate") {
  const Segment seg{0, 30, std::nullopt};
  const auto p = aggregate(seg, probs({{.6, .4}, {.2, .8}}));
  CHECK(p.cls == CharClass(1));
  CHECK(p.mean[0] == doctest::Approx(0.4));
  CHECK(p.confidence == doctest::Approx(0.6));
  double sum = 0.0;
  for (double v : p.mean) sum += v;
  CHECK(sum == doctest::Approx(1.0));

  const auto q = aggregate(seg, probs({{.2, .8}, {.6, .4}}));
  CHECK(q.cls == p.cls);
  CHECK(q.mean == p.mean);

  // Equal means: lowest index.
  CHECK(aggregate(seg, probs({{.5, .5}})).cls == CharClass(0));
  CHECK_THROWS_AS(aggregate(seg, Matrix(0, kNumClasses)), NoWindows);
  CHECK_THROWS_AS(predict_segment(build_char_model(1), seg, {}), NoWindows);
}

TEST_CASE("model shape chain") {
  const auto m = build_char_model(5);
  CHECK(m.input_shape() == nn::Shape{16, 13, 1});
  CHECK(m.layer_output_shape(0) == nn::Shape{13, 13, 32});
  CHECK(m.layer_output_shape(1) == nn::Shape{10, 13, 64});
  CHECK(m.layer_output_shape(2) == nn::Shape{5, 13, 64});
  CHECK(m.layer_output_shape(3) == nn::Shape{5, 832});
  CHECK(m.output_shape() == nn::Shape{kNumClasses});
  CHECK(build_char_model(6).param_count() == m.param_count());
}

TEST_CASE("segment windows and datasets") {
  const auto ws = labelled_windows(3, 4);
  REQUIRE(!ws.empty());
  for (const auto& w : ws) CHECK(w.label.has_value());
  const auto d = windows_to_dataset(ws);
  CHECK(d.size() == ws.size());
  CHECK(d.inputs.cols() == 16 * 13);
  CHECK(d.inputs(0, 13 + 2) == ws[0].at(1, 2));
  auto unlabelled = ws;
  unlabelled[0].label.reset();
  CHECK_THROWS_AS(windows_to_dataset(unlabelled), DegenerateData);
  // Windows stay inside their segment and carry its index.
  for (std::size_t i = 1; i < ws.size(); ++i) {
    if (ws[i].source.recording == ws[i - 1].source.recording) CHECK(ws[i].source.segment >= ws[i - 1].source.segment);
  }
}

TEST_CASE("training, cross-validation and fine-tuning on a small set") {
  const auto data = windows_to_dataset(labelled_windows(8, 40));
  CharTrainConfig cfg;
  cfg.train.max_epochs = 2;
  cfg.train.seed = 3;
  const auto r = train_character_classifier(data, cfg);
  CHECK(r.split.train.size() + r.split.val.size() + r.split.test.size() == data.size());
  CHECK(r.test_confusion.total() == r.split.test.size());
  CHECK(r.test_macro_f1 == r.test_confusion.macro_f1());
  const auto again = train_character_classifier(data, cfg);
  CHECK(again.test_macro_f1 == r.test_macro_f1);
  CHECK(again.fit.model.predict(data.inputs.topRows(5)) == r.fit.model.predict(data.inputs.topRows(5)));

  cfg.train.max_epochs = 1;
  const auto folds = cross_validate(data, cfg, 3);
  REQUIRE(folds.macro_f1.size() == 3);
  CHECK(folds.min() <= folds.mean());
  CHECK(folds.mean() <= folds.max());

  // Single-glyph terms and an always-active boundary stub: every term aligns.
  boundary::BoundaryModel always{boundary::build_boundary_extractor(1),
                                 forest::RandomForest({forest::DecisionTree({forest::Node{-1, 0.0, -1, -1, 1}})},
                                                      boundary::kFeatureDim, 2)};
  Rng rng = make_rng(4);
  std::vector<Recording> terms;
  for (const char* label : {"7", "+", "3", "7", "="}) {
    terms.push_back(synth::generate_term(synth::default_style(), label, rng));
    terms.back().id = std::to_string(terms.size());
  }
  AdaptConfig acfg;
  acfg.train.max_epochs = 2;
  const auto base = r.fit.model;
  const auto adapted = adapt_to_writer(base, terms, always, acfg);
  CHECK(adapted.data.skipped.empty());
  CHECK(!adapted.data.windows.empty());
  CHECK(adapted.model.specs() == base.specs());
  CHECK(adapted.model.param_count() == base.param_count());
  CHECK(!adapted.history.empty());
  CHECK(adapted.history.size() <= 2);

  terms.back().label = "12";
  const auto set = adaptation_windows(terms, always, acfg);
  CHECK(set.skipped == std::vector<std::string>{"5"});
  terms.resize(1);
  terms[0].label = "123";
  CHECK_THROWS_AS(adapt_to_writer(base, terms, always, acfg), NoAdaptationWindows);
}
