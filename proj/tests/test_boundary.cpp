#include <algorithm>
#include <optional>

#include "doctest.h"
#include "penseg/boundary.hpp"
#include "penseg/errors.hpp"
#include "penseg/metrics.hpp"
#include "penseg/pipeline.hpp"
#include "penseg/synth.hpp"

using namespace penseg;
using namespace penseg::boundary;

namespace {

ActivitySequence seq(std::string_view s) {
  ActivitySequence out;
  for (char c : s) out.push_back(c == 'A');
  return out;
}

struct RunInfo {
  std::size_t start, end;
  bool value;
};

std::vector<RunInfo> runs(const ActivitySequence& s) {
  std::vector<RunInfo> out;
  for (std::size_t i = 0; i < s.size();) {
    std::size_t j = i;
    while (j < s.size() && s[j] == s[i]) ++j;
    out.push_back({i, j, s[i]});
    i = j;
  }
  return out;
}

ActivitySequence random_sequence(Rng& rng) {
  const auto len = static_cast<std::size_t>(uniform(rng, 1, 200));
  ActivitySequence s;
  bool v = uniform(rng, 0, 1) < 0.5;
  while (s.size() < len) {
    const auto run = static_cast<std::size_t>(uniform(rng, 1, 12));
    for (std::size_t i = 0; i < run && s.size() < len; ++i) s.push_back(v);
    v = !v;
  }
  return s;
}

}  // namespace

TEST_CASE("extractor topology") {
  const auto a = build_boundary_extractor(1), b = build_boundary_extractor(2);
  CHECK(a.param_count() == b.param_count());
  CHECK(a.input_shape() == nn::Shape{1, 13, 1});
  const Matrix x = Matrix::Random(7, 13);
  CHECK(a.predict(x).rows() == 7);
  CHECK(a.predict(x).cols() == 2);
  const Matrix f = extract_features(a, x);
  CHECK(f.rows() == 7);
  CHECK(f.cols() == static_cast<Eigen::Index>(kFeatureDim));
  CHECK(extract_features(a, x) == f);
  // GEMM blocking depends on the batch size, so only approximately equal.
  CHECK(extract_features(a, x.topRows(1)).isApprox(f.topRows(1), 1e-12));
  CHECK_THROWS_AS(extract_features(a, Matrix::Zero(2, 12)), ShapeMismatch);
}

TEST_CASE("balance") {
  nn::Dataset d;
  d.inputs.resize(100, 1);
  for (int i = 0; i < 100; ++i) {
    d.inputs(i, 0) = i;
    d.labels.push_back(i < 80 ? 1 : 0);
  }
  const auto b = balance(d, {0.55, 0}, 3);
  const auto ones = std::count(b.labels.begin(), b.labels.end(), 1);
  CHECK(ones <= static_cast<long>(0.55 * static_cast<double>(b.size()) + 1e-9));
  CHECK(std::count(b.labels.begin(), b.labels.end(), 0) == 20);
  for (Eigen::Index i = 1; i < b.inputs.rows(); ++i) CHECK(b.inputs(i - 1, 0) < b.inputs(i, 0));
  CHECK(balance(d, {0.55, 30}, 3).size() == 30);
}

TEST_CASE("remove_outliers and extend_runs examples") {
  CHECK(remove_outliers(seq("IIIIIIAIIIIII"), 5) == seq("IIIIIIIIIIIII"));
  CHECK(remove_outliers(seq("AAAAAAIIAAAAAA"), 5) == seq("AAAAAAAAAAAAAA"));
  // Edge runs have only one neighbour and stay.
  CHECK(remove_outliers(seq("AIIIIIII"), 5) == seq("AIIIIIII"));
  // Shortest first: the single I goes before the pair of A.
  CHECK(remove_outliers(seq("IIIIIAAIAAAAAIIIII"), 5) == seq("IIIIIAAAAAAAAIIIII"));

  ActivitySequence s(40, false);
  for (std::size_t i = 10; i < 20; ++i) s[i] = true;
  for (std::size_t i = 26; i < 36; ++i) s[i] = true;
  const auto e = extend_runs(s, 4, 3);
  const auto r = runs(e);
  REQUIRE(r.size() == 4);
  CHECK(r[1].start == 6);
  CHECK(r[1].end == 23);
  CHECK(r[3].start == 26);
  CHECK(r[3].end == 40);

  CHECK(clean_activity(seq("IIIIIIIAIIIIIII")) == seq("IIIIIIIIIIIIIII"));
}

TEST_CASE("clean_activity properties on random sequences") {
  Rng rng = make_rng(2024);
  const CleanConfig cfg;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto s = random_sequence(rng);
    const auto r1 = remove_outliers(s, cfg.min_run);
    CHECK(remove_outliers(r1, cfg.min_run) == r1);
    const auto out = clean_activity(s, cfg);
    REQUIRE(out.size() == s.size());

    // Extension keeps every surviving run separate and only grows it.
    const auto before = segments_from_activity(r1);
    const auto after = segments_from_activity(out);
    REQUIRE(after.size() == before.size());
    for (std::size_t k = 0; k < before.size(); ++k) {
      CHECK(after[k].start <= before[k].start);
      CHECK(after[k].end >= before[k].end);
      CHECK(before[k].start - after[k].start <= cfg.extend);
      CHECK(after[k].end - before[k].end <= cfg.extend);
    }
    // Interior active runs are never shorter than min_run.
    for (const auto& run : runs(out)) {
      if (run.value && run.start > 0 && run.end < out.size()) CHECK(run.end - run.start >= cfg.min_run);
    }
  }
}

TEST_CASE("a second cleaning pass can still change the sequence") {
  // After extension the gap between the runs is 3 < min_run, so a second
  // pass flips it and joins the two characters.
  ActivitySequence s(40, false);
  for (std::size_t i = 10; i < 20; ++i) s[i] = true;
  for (std::size_t i = 26; i < 36; ++i) s[i] = true;
  const auto once = clean_activity(s);
  const auto twice = clean_activity(once);
  CHECK(segments_from_activity(once).size() == 2);
  CHECK(segments_from_activity(twice).size() == 1);
}

TEST_CASE("segments_from_activity") {
  CHECK(segments_from_activity(ActivitySequence(10, false)).empty());
  ActivitySequence s(45, false);
  for (std::size_t i = 3; i < 9; ++i) s[i] = true;
  for (std::size_t i = 15; i < 40; ++i) s[i] = true;
  const auto segs = segments_from_activity(s);
  REQUIRE(segs.size() == 2);
  CHECK(segs[0] == Segment{3, 9, std::nullopt});
  CHECK(segs[1] == Segment{15, 40, std::nullopt});
  CHECK(activity_from_segments(45, segs) == s);
}

TEST_CASE("merge_to_count") {
  const std::vector<Segment> three{{0, 5, {}}, {7, 10, {}}, {19, 25, {}}};
  auto m = merge_to_count(three, 2);
  REQUIRE(m.segments.size() == 2);
  CHECK(m.segments[0] == Segment{0, 10, std::nullopt});
  CHECK(!m.short_count);
  CHECK(merge_to_count(three, 3).segments == three);
  m = merge_to_count(three, 5);
  CHECK(m.segments == three);
  CHECK(m.short_count);
  // Equal gaps: the earlier pair goes first.
  const std::vector<Segment> even{{0, 2, {}}, {4, 6, {}}, {8, 10, {}}};
  CHECK(merge_to_count(even, 2).segments[0] == Segment{0, 6, std::nullopt});

  Rng rng = make_rng(7);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<Segment> segs;
    std::size_t pos = 0;
    const int n = static_cast<int>(uniform(rng, 0, 12));
    for (int i = 0; i < n; ++i) {
      pos += static_cast<std::size_t>(uniform(rng, 1, 10));
      const std::size_t end = pos + static_cast<std::size_t>(uniform(rng, 1, 10));
      segs.push_back({pos, end, {}});
      pos = end;
    }
    const auto k = static_cast<std::size_t>(uniform(rng, 1, 10));
    const auto r = merge_to_count(segs, k);
    CHECK(r.segments.size() == std::min(segs.size(), k));
    CHECK(r.short_count == (segs.size() < k));
    for (std::size_t i = 1; i < r.segments.size(); ++i) CHECK(r.segments[i - 1].end < r.segments[i].start);
    if (!segs.empty()) {
      CHECK(r.segments.front().start == segs.front().start);
      CHECK(r.segments.back().end == segs.back().end);
    }
  }
}

namespace {

// A small synthetic corpus: three writers for training, one held out.
struct Trained {
  Config cfg;
  Corpus corpus;
  std::string held_out;
  pipeline::TrainingData data;
  std::optional<pipeline::BoundaryTraining> stack;
  std::vector<Recording> test_prepared;
  std::vector<ActivitySequence> test_truth;
};

Config small_config() {
  Config cfg;
  cfg.generator.writers = 4;
  cfg.generator.terms_per_writer = 20;
  cfg.boundary.balance.max_samples = 20000;
  cfg.apply_seed(7);
  return cfg;
}

const Trained& trained() {
  static const Trained t = [] {
    Trained t;
    t.cfg = small_config();
    t.corpus = synth::generate_corpus(t.cfg.generator).corpus;
    t.held_out = t.corpus.rbegin()->first;
    t.data = pipeline::collect_training_data(t.corpus, {t.held_out}, t.cfg);
    t.stack = pipeline::train_boundary_stack(t.data.boundary_samples, t.cfg);
    for (const auto& rec : t.corpus.at(t.held_out)) {
      auto p = prep::prepare(rec, t.cfg.preprocess);
      auto truth = pipeline::truth_activity(rec, p, t.cfg.preprocess);
      REQUIRE(truth);
      t.test_prepared.push_back(std::move(p));
      t.test_truth.push_back(*truth);
    }
    return t;
  }();
  return t;
}

nn::Dataset held_out_samples(const Trained& t) {
  std::size_t rows = 0;
  for (const auto& p : t.test_prepared) rows += p.size();
  nn::Dataset d;
  d.inputs.resize(static_cast<Eigen::Index>(rows), 13);
  std::size_t at = 0;
  for (std::size_t r = 0; r < t.test_prepared.size(); ++r) {
    const Matrix m = sample_matrix(t.test_prepared[r]);
    d.inputs.middleRows(static_cast<Eigen::Index>(at), m.rows()) = m;
    at += static_cast<std::size_t>(m.rows());
    for (bool b : t.test_truth[r]) d.labels.push_back(b ? 1 : 0);
  }
  return d;
}

double accuracy(const std::vector<int>& truth, const std::vector<int>& pred) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace

TEST_CASE("trained extractor on a held-out synthetic writer") {
  const auto& t = trained();
  const auto test = held_out_samples(t);
  const double acc = accuracy(test.labels, nn::argmax_rows(nn::predict_batched(t.stack->model.extractor, test.inputs)));
  MESSAGE("held-out dense accuracy " << acc);
  CHECK(acc >= 0.9);

  SUBCASE("features separate the classes with a single threshold") {
    const Matrix f = extract_features(t.stack->model.extractor, test.inputs);
    const auto n = static_cast<std::size_t>(f.rows());
    const auto pos = static_cast<std::size_t>(std::count(test.labels.begin(), test.labels.end(), 1));
    double best = 0.0;
    std::vector<std::size_t> order(n);
    for (Eigen::Index c = 0; c < f.cols(); ++c) {
      for (std::size_t i = 0; i < n; ++i) order[i] = i;
      std::sort(order.begin(), order.end(), [&](auto a, auto b) { return f(a, c) < f(b, c); });
      // Sweep "active iff feature > thr" and its mirror.
      std::size_t pos_below = 0;
      for (std::size_t k = 0; k <= n; ++k) {
        if (k == 0 || k == n || f(order[k - 1], c) < f(order[k], c)) {
          const std::size_t neg_below = k - pos_below;
          const std::size_t correct = neg_below + (pos - pos_below);
          best = std::max({best, static_cast<double>(correct) / n, static_cast<double>(n - correct) / n});
        }
        if (k < n) pos_below += test.labels[order[k]] == 1;
      }
    }
    MESSAGE("best stump accuracy " << best);
    CHECK(best >= 0.85);
  }

  SUBCASE("forest activity yields one segment per character for most terms") {
    std::size_t ok = 0;
    for (std::size_t r = 0; r < t.test_prepared.size(); ++r) {
      const auto act = clean_activity(t.stack->model.activity(t.test_prepared[r]), t.cfg.boundary.clean);
      const auto label = t.corpus.at(t.held_out)[r].label;
      ok += segments_from_activity(act).size() == decode_label(*label).size();
    }
    const double frac = static_cast<double>(ok) / static_cast<double>(t.test_prepared.size());
    MESSAGE("terms with matching segment count " << frac);
    CHECK(frac >= 0.8);
  }
}

TEST_CASE("zeroing the force channel costs accuracy") {
  const auto& t = trained();
  auto samples = t.data.boundary_samples;
  samples.inputs.col(kForce).setZero();
  const auto ablated = pipeline::train_boundary_stack(samples, t.cfg);
  auto test = held_out_samples(t);
  const double full = accuracy(test.labels, nn::argmax_rows(nn::predict_batched(t.stack->model.extractor, test.inputs)));
  test.inputs.col(kForce).setZero();
  const double without = accuracy(test.labels, nn::argmax_rows(nn::predict_batched(ablated.model.extractor, test.inputs)));
  MESSAGE("accuracy with force " << full << ", without " << without);
  CHECK(full - without >= 0.1);
}

TEST_CASE("boundary training is deterministic") {
  auto cfg = small_config();
  cfg.boundary.extractor.train.max_epochs = 2;
  cfg.boundary.balance.max_samples = 4000;
  cfg.boundary.forest.n_estimators = 5;
  const auto& samples = trained().data.boundary_samples;
  const auto a = pipeline::train_boundary_stack(samples, cfg);
  const auto b = pipeline::train_boundary_stack(samples, cfg);
  CHECK(a.model.forest == b.model.forest);
  const auto pa = a.model.extractor.parameters(), pb = b.model.extractor.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i] == *pb[i]);
}
