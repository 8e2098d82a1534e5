#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "json.hpp"
#include "penseg/boundary.hpp"
#include "penseg/charclf.hpp"
#include "penseg/forest.hpp"
#include "penseg/preprocess.hpp"
#include "penseg/splitter.hpp"
#include "penseg/synth.hpp"

namespace penseg {

struct BoundaryStageConfig {
  boundary::ExtractorTrainConfig extractor;
  boundary::BalanceConfig balance;
  forest::ForestConfig forest;
  boundary::CleanConfig clean;
};

struct CharclfStageConfig {
  charclf::CharTrainConfig train;
  std::size_t folds = 5;
};

struct AdaptStageConfig {
  bool enabled = true;
  std::size_t terms = 5;
  charclf::AdaptConfig adapt;
};

/// Everything a run needs. Per-stage seeds are derived from `seed`.
struct Config {
  std::uint64_t seed = 42;
  synth::GeneratorConfig generator;
  prep::PreprocessConfig preprocess;
  split::SplitterConfig splitter;
  BoundaryStageConfig boundary;
  CharclfStageConfig charclf;
  AdaptStageConfig adapt;
  std::string holdout;  // empty: seeded choice

  /// Copies `seed` into every stage's seed field.
  void apply_seed(std::uint64_t root);
};

/// Unknown keys and wrong types raise ConfigError; missing keys keep defaults.
Config config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Config& cfg);
Config load_config(const std::filesystem::path& file);

}  // namespace penseg
