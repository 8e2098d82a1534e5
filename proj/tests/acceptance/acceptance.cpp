// Acceptance run: one PASS/FAIL line per criterion. Exit status is non-zero
// if any criterion fails.
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "penseg/boundary.hpp"
#include "penseg/charclf.hpp"
#include "penseg/forest.hpp"
#include "penseg/metrics.hpp"
#include "penseg/nn/checkpoint.hpp"
#include "penseg/nn/gradcheck.hpp"
#include "penseg/pipeline.hpp"
#include "penseg/preprocess.hpp"
#include "penseg/splitter.hpp"
#include "penseg/synth.hpp"

using namespace penseg;
using nn::LayerSpec;

namespace {

// Pinned tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kFastSeconds = 60.0;
constexpr double kBoundarySeconds = 15 * 60.0;
constexpr double kCharclfSeconds = 30 * 60.0;
constexpr double kMinBoundaryF1 = 0.90;
constexpr double kMinMacroF1 = 0.60;
constexpr double kMinYield = 0.95;
constexpr double kMinBoundaryMatch = 0.99;
constexpr long kBoundaryToleranceSamples = 3;
constexpr double kMaxMeanLevenshtein = 8.0;

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

int failures = 0;

void criterion(int n, const char* name, const std::function<Outcome()>& body, double limit_s = 0.0) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (limit_s > 0.0) o.require(secs <= limit_s, fmt("%.1fs", secs) + " <= " + fmt("%.0fs", limit_s));
  else o.require(true, fmt("%.1fs", secs));
  if (!o.pass) ++failures;
  std::printf("%s criterion %d (%s): %s\n", o.pass ? "PASS" : "FAIL", n, name, o.detail.c_str());
  std::fflush(stdout);
}

std::size_t edit_oracle(const std::u32string& a, const std::u32string& b) {
  std::vector<int> memo((a.size() + 1) * (b.size() + 1), -1);
  std::function<std::size_t(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size()) return b.size() - j;
    if (j == b.size()) return a.size() - i;
    int& m = memo[i * (b.size() + 1) + j];
    if (m >= 0) return static_cast<std::size_t>(m);
    const std::size_t best =
        std::min({rec(i + 1, j + 1) + (a[i] == b[j] ? 0 : 1), rec(i + 1, j) + 1, rec(i, j + 1) + 1});
    m = static_cast<int>(best);
    return best;
  };
  return rec(0, 0);
}

Config default_config() {
  Config cfg;
  cfg.apply_seed(cfg.seed);
  return cfg;
}

Outcome gradients() {
  Outcome o;
  const std::vector<std::pair<const char*, std::function<nn::GradCheckReport()>>> cases{
      {"dense", [] { return nn::check_layers({5}, {LayerSpec::dense(4, nn::Activation::Relu), LayerSpec::dense(3)}, 1); }},
      {"conv[4,1]", [] { return nn::check_layers({8, 3, 2}, {LayerSpec::conv2d(4, 1, 3)}, 2); }},
      {"conv[1,1]", [] { return nn::check_layers({1, 13, 1}, {LayerSpec::conv2d(1, 1, 4)}, 3); }},
      {"maxpool", [] { return nn::check_layers({6, 2, 1}, {LayerSpec::conv2d(1, 1, 2), LayerSpec::maxpool(2, 1)}, 4); }},
      {"lstm", [] { return nn::check_layers({3, 2}, {LayerSpec::lstm(4)}, 5); }},
      {"softmax+ce", [] { return nn::check_layers({4}, {LayerSpec::dense(3, nn::Activation::Softmax)}, 7); }},
  };
  for (const auto& [name, run] : cases) {
    const auto r = run();
    o.require(r.checked > 0 && r.max_rel_error <= kGradTol, std::string(name) + " " + fmt("%.2e", r.max_rel_error));
  }
  return o;
}

Outcome shapes() {
  Outcome o;
  bool all = true;
  for (std::size_t len = 0; len <= 200; ++len) {
    std::size_t brute = 0;
    for (std::size_t s = 0; s + prep::kWindowSize <= len; s += prep::kWindowStride) ++brute;
    all = all && prep::count_windows(len) == brute;
  }
  o.require(all, "count_windows == sliding loop for L <= 200");
  o.require(prep::count_windows(15) == 0 && prep::count_windows(16) == 1 && prep::count_windows(28) == 2,
            "anchors 15/16/28 -> 0/1/2");
  const auto m = charclf::build_char_model(1);
  const bool chain = m.input_shape()[0] == 16 && m.layer_output_shape(0)[0] == 13 && m.layer_output_shape(1)[0] == 10 &&
                     m.layer_output_shape(2)[0] == 5 && m.output_shape() == nn::Shape{15};
  o.require(chain, "shape chain 16->13->10->5->15");
  return o;
}

Outcome levenshtein() {
  Outcome o;
  std::vector<std::u32string> strings{U""};
  for (std::size_t i = 0; i < strings.size(); ++i) {
    if (strings[i].size() == 6) continue;
    for (char32_t c : std::u32string(U"1+·")) strings.push_back(strings[i] + c);
  }
  std::size_t mismatches = 0, pairs = 0;
  for (const auto& a : strings)
    for (const auto& b : strings) {
      ++pairs;
      mismatches += metrics::levenshtein(a, b) != edit_oracle(a, b);
    }
  o.require(mismatches == 0, std::to_string(pairs) + " pairs vs recursive oracle");

  Rng rng = make_rng(3);
  auto draw = [&] {
    std::u32string s;
    const auto len = static_cast<std::size_t>(uniform(rng, 0, 21));
    for (std::size_t i = 0; i < len; ++i) s.push_back(U"0123456789+-·:="[static_cast<int>(uniform(rng, 0, 15))]);
    return s;
  };
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto a = draw(), b = draw(), c = draw();
    const auto ab = metrics::levenshtein(a, b);
    violations += ab != metrics::levenshtein(b, a);
    violations += (ab == 0) != (a == b);
    violations += metrics::levenshtein(a, c) > ab + metrics::levenshtein(b, c);
  }
  o.require(violations == 0, "metric properties on 10^4 random triples");
  return o;
}

Outcome splitter() {
  Outcome o;
  const Config cfg = default_config();
  const auto sc = synth::generate_corpus(cfg.generator);
  std::size_t chars = 0, matched = 0, attempted = 0, accepted = 0, profile_errors = 0;
  for (const auto& [w, recs] : sc.corpus) {
    const auto ws = split::split_writer(recs, cfg.splitter);
    std::set<int> used;
    for (const auto& r : recs)
      for (auto c : decode_label(*r.label)) used.insert(c.index());
    for (int c : used) profile_errors += ws.profile.count(CharClass(c)) != sc.styles.at(w).strokes(CharClass(c));
    attempted += recs.size();
    accepted += ws.accepted();
    for (const auto& r : recs) {
      const auto* segs = std::get_if<std::vector<Segment>>(&ws.outcomes.at(r.id));
      if (!segs) continue;
      for (std::size_t i = 0; i < segs->size(); ++i) {
        ++chars;
        const auto truth = prep::resample_segment(r, (*r.truth_segments)[i], cfg.preprocess.period_ms);
        matched += truth && (*segs)[i].label == (*r.truth_segments)[i].label &&
                   std::labs(static_cast<long>(truth->start) - static_cast<long>((*segs)[i].start)) <= kBoundaryToleranceSamples &&
                   std::labs(static_cast<long>(truth->end) - static_cast<long>((*segs)[i].end)) <= kBoundaryToleranceSamples;
      }
    }
  }
  const double yield = split::corpus_yield(accepted, attempted);
  o.require(profile_errors == 0, "profiles equal generator truth (" + std::to_string(profile_errors) + " wrong)");
  o.require(static_cast<double>(matched) >= kMinBoundaryMatch * static_cast<double>(chars),
            "boundaries " + std::to_string(matched) + "/" + std::to_string(chars));
  o.require(yield >= kMinYield, "yield " + fmt("%.3f", yield));

  auto corrupted_cfg = cfg.generator;
  corrupted_cfg.violation_rate = 0.2;
  const auto bad = synth::generate_corpus(corrupted_cfg);
  std::size_t rejected = 0, mislabeled = 0;
  for (const auto& [w, recs] : bad.corpus) {
    const auto ws = split::split_writer(recs, cfg.splitter);
    for (const auto& r : recs) {
      const bool violated = bad.violations.count({w, r.id}) > 0;
      const bool rej = std::holds_alternative<split::Reject>(ws.outcomes.at(r.id));
      rejected += violated && rej;
      mislabeled += violated && !rej;
    }
  }
  o.require(!bad.violations.empty() && rejected == bad.violations.size() && mislabeled == 0,
            "corrupted variant: " + std::to_string(rejected) + "/" + std::to_string(bad.violations.size()) + " rejected");
  return o;
}

Outcome boundary_stack() {
  Outcome o;
  const Config cfg = default_config();
  const auto corpus = synth::generate_corpus(cfg.generator).corpus;
  const std::string held = pipeline::choose_holdout(corpus, cfg);
  const auto data = pipeline::collect_training_data(corpus, {held}, cfg);
  const auto stack = pipeline::train_boundary_stack(data.boundary_samples, cfg);
  const auto ev = pipeline::evaluate_boundary(stack.model, corpus.at(held), cfg);
  o.require(ev.f1_forest >= kMinBoundaryF1, "held-out " + held + " F1 " + fmt("%.4f", ev.f1_forest));
  o.require(ev.short_runs_forest < ev.short_runs_dense, "short error runs forest " +
                                                            std::to_string(ev.short_runs_forest) + " < dense " +
                                                            std::to_string(ev.short_runs_dense));
  return o;
}

Outcome character_classifier() {
  Outcome o;
  const Config cfg = default_config();
  const auto corpus = synth::generate_corpus(cfg.generator).corpus;
  const std::string held = pipeline::choose_holdout(corpus, cfg);
  const auto data = pipeline::collect_training_data(corpus, {held}, cfg);
  const auto dataset = charclf::windows_to_dataset(data.windows);
  const auto res = charclf::train_character_classifier(dataset, cfg.charclf.train);
  o.require(res.test_macro_f1 >= kMinMacroF1,
            "test macro F1 " + fmt("%.4f", res.test_macro_f1) + " over " + std::to_string(dataset.size()) + " windows");
  const auto folds = charclf::cross_validate(dataset, cfg.charclf.train, cfg.charclf.folds);
  std::string list;
  for (double f : folds.macro_f1) list += (list.empty() ? "" : ",") + fmt("%.3f", f);
  o.require(folds.macro_f1.size() == cfg.charclf.folds, "folds [" + list + "]");
  return o;
}

Outcome simulation() {
  Outcome o;
  const Config cfg = default_config();
  const auto corpus = synth::generate_corpus(cfg.generator).corpus;
  const auto rep = pipeline::run_simulation(corpus, cfg);
  o.require(rep.adapted.mean() <= kMaxMeanLevenshtein,
            "held-out " + rep.held_out + " mean Levenshtein " + fmt("%.3f", rep.adapted.mean()) + " over " +
                std::to_string(rep.adapted.terms.size()) + " terms");
  o.require(rep.adapted.mean() <= rep.unadapted.mean(), "adapted <= unadapted " + fmt("%.3f", rep.unadapted.mean()));
  o.require(true, "splitter yield " + fmt("%.3f", rep.yield));
  return o;
}

struct StageBytes {
  std::string profiles, extractor, forest, chars, report;
  bool operator==(const StageBytes&) const = default;
};

StageBytes run_stages(const Config& cfg) {
  StageBytes b;
  const auto corpus = synth::generate_corpus(cfg.generator).corpus;
  const std::string held = pipeline::choose_holdout(corpus, cfg);
  const auto data = pipeline::collect_training_data(corpus, {held}, cfg);
  std::ostringstream p, e, f, c;
  for (const auto& [w, s] : data.splits) split::write_profile_tsv(p, s.profile);
  const auto stack = pipeline::train_boundary_stack(data.boundary_samples, cfg);
  nn::save_network(e, stack.model.extractor);
  forest::save_forest(f, stack.model.forest);
  const auto res = charclf::train_character_classifier(charclf::windows_to_dataset(data.windows), cfg.charclf.train);
  nn::save_network(c, res.fit.model);
  b.profiles = p.str();
  b.extractor = e.str();
  b.forest = f.str();
  b.chars = c.str();
  b.report = pipeline::run_simulation(corpus, cfg).to_json().dump();
  return b;
}

Outcome determinism() {
  Outcome o;
  Config cfg;
  cfg.generator.writers = 3;
  cfg.generator.terms_per_writer = 10;
  cfg.boundary.extractor.train.max_epochs = 2;
  cfg.boundary.balance.max_samples = 4000;
  cfg.boundary.forest.n_estimators = 5;
  cfg.charclf.train.train.max_epochs = 2;
  cfg.adapt.terms = 2;
  cfg.adapt.adapt.train.max_epochs = 2;
  cfg.apply_seed(17);
  const auto a = run_stages(cfg), b = run_stages(cfg);
  o.require(a.profiles == b.profiles, "profiles");
  o.require(a.extractor == b.extractor && a.forest == b.forest, "boundary checkpoints");
  o.require(a.chars == b.chars, "character checkpoint");
  o.require(a.report == b.report, "simulation report");
  cfg.apply_seed(18);
  o.require(!(run_stages(cfg) == a), "a different seed changes the outputs");
  return o;
}

}  // namespace

int main() {
  criterion(1, "gradient checks", gradients, kFastSeconds);
  criterion(2, "shape and count oracles", shapes);
  criterion(3, "levenshtein oracle", levenshtein, kFastSeconds);
  criterion(4, "splitter soundness", splitter);
  criterion(5, "boundary stack", boundary_stack, kBoundarySeconds);
  criterion(6, "character classifier", character_classifier, kCharclfSeconds);
  criterion(7, "challenge simulation", simulation);
  criterion(8, "determinism", determinism);
  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
