#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "penseg/boundary.hpp"
#include "penseg/charclf.hpp"
#include "penseg/config.hpp"
#include "penseg/recording.hpp"
#include "penseg/splitter.hpp"

namespace penseg::pipeline {

/// Splitter output for a set of writers, ready for both trainers.
struct TrainingData {
  std::map<std::string, split::WriterSplit> splits;
  std::size_t attempted = 0;
  std::size_t accepted = 0;
  nn::Dataset boundary_samples;  // every sample of every accepted term
  std::vector<prep::Window> windows;

  double yield() const;
};

/// Runs the splitter on every writer not in `exclude`.
TrainingData collect_training_data(const Corpus& corpus, const std::set<std::string>& exclude, const Config& cfg);

/// Seeded choice among the corpus writers, or cfg.holdout when set.
std::string choose_holdout(const Corpus& corpus, const Config& cfg);

struct BoundaryTraining {
  boundary::BoundaryModel model;
  std::vector<nn::EpochRecord> history;
};

/// Balance, train the extractor, then fit the forest on its features.
BoundaryTraining train_boundary_stack(const nn::Dataset& samples, const Config& cfg);

/// Per-sample activity truth for a raw recording on the prepared grid: the
/// generator truth when present.
std::optional<boundary::ActivitySequence> truth_activity(const Recording& raw, const Recording& prepared,
                                                         const prep::PreprocessConfig& cfg);

struct BoundaryEvaluation {
  double f1_forest = 0.0;
  double f1_dense = 0.0;
  double f1_cleaned = 0.0;
  std::size_t short_runs_forest = 0;
  std::size_t short_runs_dense = 0;
  std::size_t samples = 0;
};

/// Scores the boundary stack against truth on recordings that carry it.
BoundaryEvaluation evaluate_boundary(const boundary::BoundaryModel& model, const std::vector<Recording>& recordings,
                                     const Config& cfg);

/// Segments, windows and classifies one unlabelled recording. Segments without
/// windows are dropped; returns "" when nothing survives.
std::string predict_term(const Recording& raw, const boundary::BoundaryModel& boundary, const nn::Network& chars,
                         const Config& cfg);
/// The tail of predict_term: cleans `activity` and classifies each segment.
std::string predict_from_activity(const Recording& prepared, const boundary::ActivitySequence& activity,
                                  const nn::Network& chars, const Config& cfg);

struct TermScore {
  std::string id;
  std::string truth;
  std::string prediction;
  std::size_t distance = 0;
};

struct Scores {
  std::vector<TermScore> terms;
  std::size_t total = 0;
  double mean() const;
};

Scores score_terms(const std::vector<Recording>& terms, const boundary::BoundaryModel& boundary, const nn::Network& chars,
                   const Config& cfg);

struct SimulationReport {
  std::string held_out;
  std::vector<std::string> adaptation_terms;
  std::vector<std::string> skipped_adaptation_terms;
  std::size_t adaptation_windows = 0;
  Scores adapted;    // equals `unadapted` when adaptation is disabled
  Scores unadapted;
  bool adaptation_enabled = true;
  double boundary_f1 = 0.0;
  double charclf_f1 = 0.0;
  double yield = 0.0;
  std::size_t training_windows = 0;
  Config config;

  const Scores& headline() const { return adaptation_enabled ? adapted : unadapted; }
  nlohmann::json to_json() const;
};

/// Hold out one writer, train every stage on the rest, adapt on its first
/// `adapt.terms` terms and score the remainder. Throws InsufficientData.
SimulationReport run_simulation(const Corpus& corpus, const Config& cfg);

}  // namespace penseg::pipeline
