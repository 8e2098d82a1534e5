#include "penseg/pipeline.hpp"

#include <algorithm>

#include "penseg/errors.hpp"
#include "penseg/metrics.hpp"
#include "penseg/rng.hpp"

namespace penseg::pipeline {

double TrainingData::yield() const { return attempted == 0 ? 0.0 : split::corpus_yield(accepted, attempted); }

TrainingData collect_training_data(const Corpus& corpus, const std::set<std::string>& exclude, const Config& cfg) {
  TrainingData data;
  std::vector<nn::Matrix> blocks;
  Eigen::Index rows = 0;
  for (const auto& [writer, recordings] : corpus) {
    if (exclude.count(writer)) continue;
    std::vector<Recording> labelled;
    for (const auto& r : recordings) {
      if (r.label) labelled.push_back(r);
    }
    if (labelled.empty()) continue;
    auto ws = split::split_writer(labelled, cfg.splitter);
    data.attempted += labelled.size();
    data.accepted += ws.accepted();
    for (const auto& rec : labelled) {
      const auto* segs = std::get_if<std::vector<Segment>>(&ws.outcomes.at(rec.id));
      if (!segs) continue;
      const Recording prepared = prep::prepare(rec, cfg.preprocess);
      blocks.push_back(boundary::sample_matrix(prepared));
      rows += blocks.back().rows();
      const auto y = boundary::activity_labels(prepared.size(), *segs);
      data.boundary_samples.labels.insert(data.boundary_samples.labels.end(), y.begin(), y.end());
      auto w = charclf::segment_windows(prepared, *segs);
      data.windows.insert(data.windows.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
    data.splits.emplace(writer, std::move(ws));
  }
  data.boundary_samples.inputs.resize(rows, static_cast<Eigen::Index>(kNumChannels));
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    data.boundary_samples.inputs.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return data;
}

std::string choose_holdout(const Corpus& corpus, const Config& cfg) {
  if (corpus.empty()) throw InsufficientData("corpus has no writers");
  if (!cfg.holdout.empty()) {
    if (!corpus.count(cfg.holdout)) throw InsufficientData("held-out writer '" + cfg.holdout + "' not in corpus");
    return cfg.holdout;
  }
  Rng rng = make_rng(derive_seed(cfg.seed, "stage/holdout"));
  std::uniform_int_distribution<std::size_t> pick(0, corpus.size() - 1);
  return std::next(corpus.begin(), static_cast<std::ptrdiff_t>(pick(rng)))->first;
}

BoundaryTraining train_boundary_stack(const nn::Dataset& samples, const Config& cfg) {
  const auto& b = cfg.boundary;
  const nn::Dataset balanced = boundary::balance(samples, b.balance, b.extractor.train.seed);
  auto fit = boundary::train_boundary_extractor(
      boundary::build_boundary_extractor(derive_seed(b.extractor.train.seed, "boundary/init"), b.extractor.train.l2_rate),
      balanced, b.extractor);
  const nn::Matrix features = boundary::extract_features(fit.model, balanced.inputs);
  auto forest = forest::train_forest(features, balanced.labels, b.forest);
  return {{std::move(fit.model), std::move(forest)}, std::move(fit.history)};
}

std::optional<boundary::ActivitySequence> truth_activity(const Recording& raw, const Recording& prepared,
                                                         const prep::PreprocessConfig& cfg) {
  if (!raw.truth_segments) return std::nullopt;
  std::vector<Segment> mapped;
  for (const auto& s : *raw.truth_segments) {
    if (auto m = prep::resample_segment(raw, s, cfg.period_ms)) mapped.push_back(*m);
  }
  return boundary::activity_from_segments(prepared.size(), mapped);
}

BoundaryEvaluation evaluate_boundary(const boundary::BoundaryModel& model, const std::vector<Recording>& recordings,
                                     const Config& cfg) {
  std::vector<bool> truth, forest, dense, cleaned;
  for (const auto& raw : recordings) {
    const Recording prepared = prep::prepare(raw, cfg.preprocess);
    const auto t = truth_activity(raw, prepared, cfg.preprocess);
    if (!t) continue;
    const nn::Matrix x = boundary::sample_matrix(prepared);
    const auto f = boundary::predict_activity(model.forest, boundary::extract_features(model.extractor, x));
    const auto d = boundary::dense_activity(model.extractor, x);
    const auto c = boundary::clean_activity(f, cfg.boundary.clean);
    truth.insert(truth.end(), t->begin(), t->end());
    forest.insert(forest.end(), f.begin(), f.end());
    dense.insert(dense.end(), d.begin(), d.end());
    cleaned.insert(cleaned.end(), c.begin(), c.end());
  }
  BoundaryEvaluation e;
  e.samples = truth.size();
  if (truth.empty()) return e;
  e.f1_forest = metrics::binary_f1(truth, forest);
  e.f1_dense = metrics::binary_f1(truth, dense);
  e.f1_cleaned = metrics::binary_f1(truth, cleaned);
  e.short_runs_forest = metrics::short_error_runs(truth, forest, cfg.boundary.clean.min_run);
  e.short_runs_dense = metrics::short_error_runs(truth, dense, cfg.boundary.clean.min_run);
  return e;
}

std::string predict_term(const Recording& raw, const boundary::BoundaryModel& boundary, const nn::Network& chars,
                         const Config& cfg) {
  const Recording prepared = prep::prepare(raw, cfg.preprocess);
  return predict_from_activity(prepared, boundary.activity(prepared), chars, cfg);
}

std::string predict_from_activity(const Recording& prepared, const boundary::ActivitySequence& raw_activity,
                                  const nn::Network& chars, const Config& cfg) {
  const auto activity = boundary::clean_activity(raw_activity, cfg.boundary.clean);
  std::u32string out;
  for (const auto& seg : boundary::segments_from_activity(activity)) {
    const auto windows = prep::make_windows(prepared, seg);
    if (windows.empty()) continue;
    out.push_back(charclf::predict_segment(chars, seg, windows).cls.glyph());
  }
  return encode_utf8(out);
}

double Scores::mean() const { return terms.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(terms.size()); }

Scores score_terms(const std::vector<Recording>& terms, const boundary::BoundaryModel& boundary, const nn::Network& chars,
                   const Config& cfg) {
  Scores s;
  for (const auto& r : terms) {
    if (!r.label) throw DegenerateData("cannot score unlabelled recording " + r.id);
    TermScore t{r.id, *r.label, predict_term(r, boundary, chars, cfg), 0};
    t.distance = metrics::levenshtein(t.prediction, t.truth);
    s.total += t.distance;
    s.terms.push_back(std::move(t));
  }
  return s;
}

namespace {

nlohmann::json scores_json(const Scores& s) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : s.terms) {
    terms.push_back({{"id", t.id}, {"truth", t.truth}, {"prediction", t.prediction}, {"distance", t.distance}});
  }
  return {{"terms", terms}, {"total_levenshtein", s.total}, {"mean_levenshtein", s.mean()}};
}

}  // namespace

nlohmann::json SimulationReport::to_json() const {
  nlohmann::json j;
  j["held_out_writer"] = held_out;
  j["adaptation"] = {{"enabled", adaptation_enabled},
                     {"terms", adaptation_terms},
                     {"skipped_terms", skipped_adaptation_terms},
                     {"windows", adaptation_windows}};
  j["scored"] = scores_json(headline());
  j["unadapted"] = scores_json(unadapted);
  j["mean_levenshtein"] = headline().mean();
  j["total_levenshtein"] = headline().total;
  j["unadapted_mean_levenshtein"] = unadapted.mean();
  j["boundary_f1"] = boundary_f1;
  j["charclf_macro_f1"] = charclf_f1;
  j["splitter_yield"] = yield;
  j["training_windows"] = training_windows;
  j["seeds"] = {{"root", config.seed},
                {"generator", config.generator.seed},
                {"boundary", config.boundary.extractor.train.seed},
                {"forest", config.boundary.forest.seed},
                {"charclf", config.charclf.train.train.seed},
                {"adapt", config.adapt.adapt.train.seed}};
  j["config"] = penseg::to_json(config);
  return j;
}

SimulationReport run_simulation(const Corpus& corpus, const Config& cfg) {
  if (corpus.size() < 2) throw InsufficientData("simulation needs at least two writers");
  SimulationReport rep;
  rep.config = cfg;
  rep.held_out = choose_holdout(corpus, cfg);
  std::vector<Recording> held;
  for (const auto& r : corpus.at(rep.held_out)) {
    if (r.label) held.push_back(r);
  }
  if (held.size() < cfg.adapt.terms + 1) {
    throw InsufficientData("held-out writer '" + rep.held_out + "' has " + std::to_string(held.size()) +
                           " labelled terms, need " + std::to_string(cfg.adapt.terms + 1));
  }

  const TrainingData data = collect_training_data(corpus, {rep.held_out}, cfg);
  rep.yield = data.yield();
  rep.training_windows = data.windows.size();
  const auto bnd = train_boundary_stack(data.boundary_samples, cfg);
  rep.boundary_f1 = evaluate_boundary(bnd.model, held, cfg).f1_forest;
  const auto chars = charclf::train_character_classifier(charclf::windows_to_dataset(data.windows), cfg.charclf.train);
  rep.charclf_f1 = chars.test_macro_f1;

  const std::vector<Recording> adapt_terms(held.begin(), held.begin() + static_cast<std::ptrdiff_t>(cfg.adapt.terms));
  const std::vector<Recording> scored(held.begin() + static_cast<std::ptrdiff_t>(cfg.adapt.terms), held.end());
  for (const auto& r : adapt_terms) rep.adaptation_terms.push_back(r.id);

  rep.unadapted = score_terms(scored, bnd.model, chars.fit.model, cfg);
  rep.adaptation_enabled = cfg.adapt.enabled;
  if (cfg.adapt.enabled) {
    auto adapted = charclf::adapt_to_writer(chars.fit.model, adapt_terms, bnd.model, cfg.adapt.adapt);
    rep.adaptation_windows = adapted.data.windows.size();
    rep.skipped_adaptation_terms = adapted.data.skipped;
    rep.adapted = score_terms(scored, bnd.model, adapted.model, cfg);
  } else {
    rep.adapted = rep.unadapted;
  }
  return rep;
}

}  // namespace penseg::pipeline
