#include "penseg/config.hpp"

#include <fstream>
#include <set>

#include "penseg/errors.hpp"
#include "penseg/rng.hpp"

namespace penseg {

using nlohmann::json;

void Config::apply_seed(std::uint64_t root) {
  seed = root;
  generator.seed = root;
  boundary.extractor.train.seed = derive_seed(root, "stage/boundary");
  boundary.forest.seed = derive_seed(root, "stage/forest");
  charclf.train.train.seed = derive_seed(root, "stage/charclf");
  adapt.adapt.train.seed = derive_seed(root, "stage/adapt");
}

namespace {

// Reads keys of one section into fields, rejecting anything unexpected.
class Section {
 public:
  Section(const json& parent, const std::string& name) : name_(name) {
    if (!parent.contains(name)) return;
    node_ = &parent.at(name);
    if (!node_->is_object()) throw ConfigError("section '" + name + "' must be an object");
  }

  template <class T>
  Section& get(const std::string& key, T& field) {
    seen_.insert(key);
    if (!node_ || !node_->contains(key)) return *this;
    try {
      field = node_->at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(name_ + "." + key + ": " + e.what());
    }
    return *this;
  }

  void done() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + name_ + "." + key + "'");
    }
  }

 private:
  std::string name_;
  const json* node_ = nullptr;
  std::set<std::string> seen_;
};

void check(bool ok, const std::string& what) {
  if (!ok) throw ConfigError(what);
}

}  // namespace

Config config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  static const std::set<std::string> sections{"seed",    "generator", "preprocess", "splitter",
                                              "boundary", "charclf",  "adapt",      "holdout"};
  for (const auto& [key, value] : j.items()) {
    if (!sections.count(key)) throw ConfigError("unknown section '" + key + "'");
  }
  Config c;
  std::uint64_t seed = c.seed;
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw ConfigError("seed must be a non-negative integer");
    seed = j.at("seed").get<std::uint64_t>();
  }
  c.apply_seed(seed);
  if (j.contains("holdout")) {
    if (!j.at("holdout").is_string()) throw ConfigError("holdout must be a string");
    c.holdout = j.at("holdout").get<std::string>();
  }

  auto& g = c.generator;
  Section(j, "generator")
      .get("writers", g.writers)
      .get("terms_per_writer", g.terms_per_writer)
      .get("min_len", g.min_len)
      .get("max_len", g.max_len)
      .get("violation_rate", g.violation_rate)
      .done();
  check(g.writers >= 1 && g.terms_per_writer >= 1, "generator needs at least one writer and term");
  check(g.min_len >= 1 && g.min_len <= g.max_len, "generator lengths out of order");
  check(g.violation_rate >= 0 && g.violation_rate <= 1, "violation_rate must be in [0, 1]");

  Section(j, "preprocess").get("period_ms", c.preprocess.period_ms).done();
  check(c.preprocess.period_ms > 0, "period_ms must be positive");
  c.splitter.period_ms = c.preprocess.period_ms;
  c.adapt.adapt.prep = c.preprocess;

  auto& s = c.splitter;
  Section(j, "splitter")
      .get("force_threshold", s.strokes.force_threshold)
      .get("min_stroke_len", s.strokes.min_stroke_len)
      .get("merge_gap", s.strokes.merge_gap)
      .get("agreement", s.profile.agreement)
      .get("min_votes", s.profile.min_votes)
      .done();

  auto& b = c.boundary;
  Section(j, "boundary")
      .get("batch_size", b.extractor.train.batch_size)
      .get("learning_rate", b.extractor.train.learning_rate)
      .get("l2", b.extractor.train.l2_rate)
      .get("patience", b.extractor.train.patience)
      .get("max_epochs", b.extractor.train.max_epochs)
      .get("val_fraction", b.extractor.val_fraction)
      .get("max_majority", b.balance.max_majority)
      .get("max_samples", b.balance.max_samples)
      .get("n_estimators", b.forest.n_estimators)
      .get("train_fraction", b.forest.train_fraction)
      .get("max_features", b.forest.max_features)
      .get("min_leaf", b.forest.min_leaf)
      .get("min_run", b.clean.min_run)
      .get("extend", b.clean.extend)
      .get("guard", b.clean.guard)
      .done();
  check(b.balance.max_majority >= 0.5 && b.balance.max_majority < 1, "max_majority must be in [0.5, 1)");
  check(b.extractor.val_fraction > 0 && b.extractor.val_fraction < 1, "boundary val_fraction must be in (0, 1)");
  c.adapt.adapt.clean = b.clean;

  auto& k = c.charclf;
  Section(j, "charclf")
      .get("batch_size", k.train.train.batch_size)
      .get("learning_rate", k.train.train.learning_rate)
      .get("l2", k.train.train.l2_rate)
      .get("patience", k.train.train.patience)
      .get("max_epochs", k.train.train.max_epochs)
      .get("ratios", k.train.ratios)
      .get("folds", k.folds)
      .done();

  auto& a = c.adapt;
  Section(j, "adapt")
      .get("enabled", a.enabled)
      .get("terms", a.terms)
      .get("batch_size", a.adapt.train.batch_size)
      .get("learning_rate", a.adapt.train.learning_rate)
      .get("l2", a.adapt.train.l2_rate)
      .get("patience", a.adapt.train.patience)
      .get("max_epochs", a.adapt.train.max_epochs)
      .get("val_fraction", a.adapt.val_fraction)
      .done();
  check(a.terms >= 1, "adapt.terms must be at least 1");
  return c;
}

json to_json(const Config& c) {
  const auto& g = c.generator;
  const auto& s = c.splitter;
  const auto& b = c.boundary;
  const auto& k = c.charclf;
  const auto& a = c.adapt;
  json j;
  j["seed"] = c.seed;
  j["holdout"] = c.holdout;
  j["generator"] = {{"writers", g.writers},
                    {"terms_per_writer", g.terms_per_writer},
                    {"min_len", g.min_len},
                    {"max_len", g.max_len},
                    {"violation_rate", g.violation_rate}};
  j["preprocess"] = {{"period_ms", c.preprocess.period_ms}};
  j["splitter"] = {{"force_threshold", s.strokes.force_threshold},
                   {"min_stroke_len", s.strokes.min_stroke_len},
                   {"merge_gap", s.strokes.merge_gap},
                   {"agreement", s.profile.agreement},
                   {"min_votes", s.profile.min_votes}};
  j["boundary"] = {{"batch_size", b.extractor.train.batch_size},
                   {"learning_rate", b.extractor.train.learning_rate},
                   {"l2", b.extractor.train.l2_rate},
                   {"patience", b.extractor.train.patience},
                   {"max_epochs", b.extractor.train.max_epochs},
                   {"val_fraction", b.extractor.val_fraction},
                   {"max_majority", b.balance.max_majority},
                   {"max_samples", b.balance.max_samples},
                   {"n_estimators", b.forest.n_estimators},
                   {"train_fraction", b.forest.train_fraction},
                   {"max_features", b.forest.max_features},
                   {"min_leaf", b.forest.min_leaf},
                   {"min_run", b.clean.min_run},
                   {"extend", b.clean.extend},
                   {"guard", b.clean.guard}};
  j["charclf"] = {{"batch_size", k.train.train.batch_size},
                  {"learning_rate", k.train.train.learning_rate},
                  {"l2", k.train.train.l2_rate},
                  {"patience", k.train.train.patience},
                  {"max_epochs", k.train.train.max_epochs},
                  {"ratios", k.train.ratios},
                  {"folds", k.folds}};
  j["adapt"] = {{"enabled", a.enabled},
                {"terms", a.terms},
                {"batch_size", a.adapt.train.batch_size},
                {"learning_rate", a.adapt.train.learning_rate},
                {"l2", a.adapt.train.l2_rate},
                {"patience", a.adapt.train.patience},
                {"max_epochs", a.adapt.train.max_epochs},
                {"val_fraction", a.adapt.val_fraction}};
  return j;
}

Config load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace penseg
