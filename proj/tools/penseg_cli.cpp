#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "penseg/boundary.hpp"
#include "penseg/charclf.hpp"
#include "penseg/config.hpp"
#include "penseg/errors.hpp"
#include "penseg/forest.hpp"
#include "penseg/metrics.hpp"
#include "penseg/nn/checkpoint.hpp"
#include "penseg/pipeline.hpp"
#include "penseg/recording.hpp"
#include "penseg/splitter.hpp"
#include "penseg/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace penseg;

namespace {

struct Global {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool check = false;

  Config load() const {
    Config c = config.empty() ? Config{} : load_config(config);
    if (seed) c.apply_seed(*seed);
    return c;
  }
};

constexpr const char* kExtractorFile = "extractor.psnn";
constexpr const char* kForestFile = "forest.psrf";
constexpr const char* kCharFile = "charclf.psnn";

void write_text(const fs::path& file, const std::string& text) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw Error("cannot write " + file.string());
  out << text;
}

void write_json(const fs::path& file, const json& j) { write_text(file, j.dump(2) + "\n"); }

void write_history(const fs::path& file, const std::vector<nn::EpochRecord>& history) {
  std::string csv = "epoch,train_loss,val_loss\n";
  char buf[96];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.10g,%.10g\n", h.epoch, h.train_loss, h.val_loss);
    csv += buf;
  }
  write_text(file, csv);
}

boundary::BoundaryModel load_boundary(const fs::path& dir) {
  return {nn::load_network(dir / kExtractorFile), forest::load_forest(dir / kForestFile)};
}

std::vector<Recording> labelled_terms(const Corpus& corpus, const std::string& writer) {
  auto it = corpus.find(writer);
  if (it == corpus.end()) throw InsufficientData("writer '" + writer + "' not in corpus");
  std::vector<Recording> out;
  for (const auto& r : it->second) {
    if (r.label) out.push_back(r);
  }
  return out;
}

// Each handler returns whether its --check thresholds hold.
bool run_generate(const Global& g, const fs::path& out, std::optional<int> writers, std::optional<int> terms,
                  std::optional<double> violations) {
  Config cfg = g.load();
  if (writers) cfg.generator.writers = *writers;
  if (terms) cfg.generator.terms_per_writer = *terms;
  if (violations) cfg.generator.violation_rate = *violations;
  const auto sc = synth::generate_corpus(cfg.generator);
  write_corpus(out, sc.corpus);
  std::cout << "wrote " << sc.corpus.size() << " writers to " << out.string() << "\n";
  return true;
}

bool run_split(const Global& g, const fs::path& corpus_dir, const fs::path& out) {
  const Config cfg = g.load();
  const Corpus corpus = load_corpus(corpus_dir);
  json report;
  std::size_t accepted = 0, attempted = 0;
  for (const auto& [writer, recordings] : corpus) {
    std::vector<Recording> labelled;
    for (const auto& r : recordings) {
      if (r.label) labelled.push_back(r);
    }
    if (labelled.empty()) continue;
    const auto ws = split::split_writer(labelled, cfg.splitter);
    std::ostringstream profile;
    split::write_profile_tsv(profile, ws.profile);
    write_text(out / writer / "profile.tsv", profile.str());
    json rejects = json::object();
    for (const auto& [id, outcome] : ws.outcomes) {
      if (const auto* segs = std::get_if<std::vector<Segment>>(&outcome)) {
        std::ostringstream tsv;
        emit_segments_tsv(tsv, *segs);
        write_text(out / writer / (id + ".segments.tsv"), tsv.str());
      } else {
        const auto& r = std::get<split::Reject>(outcome);
        rejects[id] = {{"reason", split::to_string(r.reason)}, {"expected", r.expected}, {"found", r.found}};
      }
    }
    accepted += ws.accepted();
    attempted += labelled.size();
    report["writers"][writer] = {{"accepted", ws.accepted()},
                                 {"attempted", labelled.size()},
                                 {"yield", split::corpus_yield(ws.accepted(), labelled.size())},
                                 {"rejects", rejects}};
  }
  const double yield = split::corpus_yield(accepted, attempted);
  report["yield"] = yield;
  write_json(out / "split_report.json", report);
  std::cout << "yield " << yield << " (" << accepted << "/" << attempted << ")\n";
  return yield >= 0.95;
}

bool run_train_boundary(const Global& g, const fs::path& corpus_dir, const fs::path& out) {
  const Config cfg = g.load();
  const Corpus corpus = load_corpus(corpus_dir);
  const std::string held = pipeline::choose_holdout(corpus, cfg);
  const auto data = pipeline::collect_training_data(corpus, {held}, cfg);
  const auto stack = pipeline::train_boundary_stack(data.boundary_samples, cfg);
  fs::create_directories(out);
  nn::save_network(out / kExtractorFile, stack.model.extractor);
  forest::save_forest(out / kForestFile, stack.model.forest);
  write_history(out / "boundary_loss_history.csv", stack.history);
  const auto eval = pipeline::evaluate_boundary(stack.model, labelled_terms(corpus, held), cfg);
  write_json(out / "boundary_report.json", {{"held_out_writer", held},
                                            {"samples", eval.samples},
                                            {"f1", eval.f1_forest},
                                            {"f1_dense_head", eval.f1_dense},
                                            {"f1_cleaned", eval.f1_cleaned},
                                            {"short_error_runs_forest", eval.short_runs_forest},
                                            {"short_error_runs_dense_head", eval.short_runs_dense},
                                            {"config", to_json(cfg)}});
  std::cout << "held-out " << held << " activity F1 " << eval.f1_forest << "\n";
  return eval.samples > 0 && eval.f1_forest >= 0.90;
}

bool run_train_charclf(const Global& g, const fs::path& corpus_dir, const fs::path& out, bool cross_validate) {
  const Config cfg = g.load();
  const Corpus corpus = load_corpus(corpus_dir);
  const std::string held = pipeline::choose_holdout(corpus, cfg);
  const auto data = pipeline::collect_training_data(corpus, {held}, cfg);
  const auto dataset = charclf::windows_to_dataset(data.windows);
  const auto res = charclf::train_character_classifier(dataset, cfg.charclf.train);
  fs::create_directories(out);
  nn::save_network(out / kCharFile, res.fit.model);
  write_history(out / "loss_history.csv", res.fit.history);
  std::vector<std::string> names;
  for (int c = 0; c < static_cast<int>(kNumClasses); ++c) names.push_back(CharClass(c).utf8());
  write_text(out / "confusion.csv", res.test_confusion.to_csv(names));
  json report{{"held_out_writer", held},
              {"windows", dataset.size()},
              {"epochs", res.fit.history.size()},
              {"best_epoch", res.fit.best_epoch},
              {"stopped_early", res.fit.stopped_early},
              {"test_macro_f1", res.test_macro_f1},
              {"test_accuracy", res.test_confusion.accuracy()},
              {"config", to_json(cfg)}};
  if (cross_validate) {
    const auto folds = charclf::cross_validate(dataset, cfg.charclf.train, cfg.charclf.folds);
    report["folds"] = {{"macro_f1", folds.macro_f1}, {"min", folds.min()}, {"max", folds.max()}, {"mean", folds.mean()}};
  }
  write_json(out / "charclf_report.json", report);
  std::cout << "test macro F1 " << res.test_macro_f1 << " over " << dataset.size() << " windows\n";
  return res.test_macro_f1 >= 0.60;
}

bool run_adapt(const Global& g, const fs::path& models, const fs::path& corpus_dir, const std::string& writer,
               const fs::path& out) {
  const Config cfg = g.load();
  const auto terms = labelled_terms(load_corpus(corpus_dir), writer);
  if (terms.size() < cfg.adapt.terms) throw InsufficientData("writer has fewer than " + std::to_string(cfg.adapt.terms) + " labelled terms");
  const std::vector<Recording> used(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(cfg.adapt.terms));
  const auto res = charclf::adapt_to_writer(nn::load_network(models / kCharFile), used, load_boundary(models),
                                            cfg.adapt.adapt);
  nn::save_network(out, res.model);
  std::cout << "adapted on " << res.data.windows.size() << " windows, skipped " << res.data.skipped.size() << " terms\n";
  return true;
}

bool run_predict(const Global& g, const fs::path& models, const std::optional<fs::path>& chars, const fs::path& input) {
  const Config cfg = g.load();
  std::ifstream in(input);
  if (!in) throw Error("cannot open " + input.string());
  const Recording rec = parse_recording(in, "", input.stem().string());
  const auto model = nn::load_network(chars.value_or(models / kCharFile));
  std::cout << pipeline::predict_term(rec, load_boundary(models), model, cfg) << "\n";
  return true;
}

bool run_evaluate(const Global& g, const fs::path& models, const std::optional<fs::path>& chars,
                  const fs::path& corpus_dir, const std::string& writer, std::size_t skip, const fs::path& out) {
  const Config cfg = g.load();
  auto terms = labelled_terms(load_corpus(corpus_dir), writer);
  terms.erase(terms.begin(), terms.begin() + static_cast<std::ptrdiff_t>(std::min(skip, terms.size())));
  const auto scores = pipeline::score_terms(terms, load_boundary(models), nn::load_network(chars.value_or(models / kCharFile)), cfg);
  json list = json::array();
  for (const auto& t : scores.terms) {
    list.push_back({{"id", t.id}, {"truth", t.truth}, {"prediction", t.prediction}, {"distance", t.distance}});
  }
  write_json(out, {{"writer", writer},
                   {"terms", list},
                   {"total_levenshtein", scores.total},
                   {"mean_levenshtein", scores.mean()},
                   {"config", to_json(cfg)}});
  std::cout << "mean Levenshtein " << scores.mean() << " over " << scores.terms.size() << " terms\n";
  return !scores.terms.empty() && scores.mean() <= 8.0;
}

bool run_simulate(const Global& g, const std::optional<fs::path>& corpus_dir, bool no_adapt, const fs::path& out) {
  Config cfg = g.load();
  if (no_adapt) cfg.adapt.enabled = false;
  const Corpus corpus = corpus_dir ? load_corpus(*corpus_dir) : synth::generate_corpus(cfg.generator).corpus;
  const auto rep = pipeline::run_simulation(corpus, cfg);
  write_json(out, rep.to_json());
  std::cout << "held-out " << rep.held_out << ": mean Levenshtein " << rep.headline().mean() << " (unadapted "
            << rep.unadapted.mean() << ")\n";
  return rep.headline().mean() <= 8.0 && rep.adapted.mean() <= rep.unadapted.mean();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Segment and classify handwritten terms from pen sensor recordings"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "root seed (overrides the config)");
  app.add_flag("--check", g.check, "exit non-zero unless the stage meets its thresholds");

  std::function<bool()> action;

  auto* gen = app.add_subcommand("generate", "write a synthetic corpus");
  std::string gen_out;
  std::optional<int> writers, terms;
  std::optional<double> violations;
  gen->add_option("--out", gen_out)->required();
  gen->add_option("--writers", writers);
  gen->add_option("--terms", terms, "terms per writer");
  gen->add_option("--violation-rate", violations);
  gen->callback([&] { action = [&] { return run_generate(g, gen_out, writers, terms, violations); }; });

  std::string corpus, out, models, writer, input;
  std::optional<std::string> corpus_opt, chars;

  auto* split = app.add_subcommand("split", "infer stroke profiles and split labels");
  split->add_option("--corpus", corpus)->required()->check(CLI::ExistingDirectory);
  split->add_option("--out", out)->required();
  split->callback([&] { action = [&] { return run_split(g, corpus, out); }; });

  auto* tb = app.add_subcommand("train-boundary", "train the boundary extractor and forest");
  tb->add_option("--corpus", corpus)->required()->check(CLI::ExistingDirectory);
  tb->add_option("--out", out)->required();
  tb->callback([&] { action = [&] { return run_train_boundary(g, corpus, out); }; });

  auto* tc = app.add_subcommand("train-charclf", "train the character classifier");
  bool cv = false;
  tc->add_option("--corpus", corpus)->required()->check(CLI::ExistingDirectory);
  tc->add_option("--out", out)->required();
  tc->add_flag("--cross-validate", cv, "also run k-fold cross-validation");
  tc->callback([&] { action = [&] { return run_train_charclf(g, corpus, out, cv); }; });

  auto* ad = app.add_subcommand("adapt", "fine-tune the character classifier on one writer");
  ad->add_option("--models", models)->required()->check(CLI::ExistingDirectory);
  ad->add_option("--corpus", corpus)->required()->check(CLI::ExistingDirectory);
  ad->add_option("--writer", writer)->required();
  ad->add_option("--out", out)->required();
  ad->callback([&] { action = [&] { return run_adapt(g, models, corpus, writer, out); }; });

  auto* pr = app.add_subcommand("predict", "predict the term written in one recording");
  pr->add_option("--models", models)->required()->check(CLI::ExistingDirectory);
  pr->add_option("--charclf", chars, "character model overriding the one in --models");
  pr->add_option("--input", input)->required()->check(CLI::ExistingFile);
  pr->callback([&] {
    action = [&] {
      return run_predict(g, models, chars ? std::optional<fs::path>(*chars) : std::nullopt, input);
    };
  });

  auto* ev = app.add_subcommand("evaluate", "score one writer's labelled terms");
  std::size_t skip = 0;
  ev->add_option("--models", models)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--charclf", chars);
  ev->add_option("--corpus", corpus)->required()->check(CLI::ExistingDirectory);
  ev->add_option("--writer", writer)->required();
  ev->add_option("--skip", skip, "ignore the first N terms (e.g. those used for adaptation)");
  ev->add_option("--out", out)->required();
  ev->callback([&] {
    action = [&] {
      return run_evaluate(g, models, chars ? std::optional<fs::path>(*chars) : std::nullopt, corpus, writer, skip, out);
    };
  });

  auto* sim = app.add_subcommand("simulate", "hold out one writer and run the whole pipeline");
  bool no_adapt = false;
  sim->add_option("--corpus", corpus_opt, "corpus directory (default: generate from config)");
  sim->add_flag("--no-adapt", no_adapt);
  sim->add_option("--out", out)->required();
  sim->callback([&] {
    action = [&] {
      return run_simulate(g, corpus_opt ? std::optional<fs::path>(*corpus_opt) : std::nullopt, no_adapt, out);
    };
  });

  CLI11_PARSE(app, argc, argv);
  try {
    const bool ok = action();
    if (g.check && !ok) {
      std::cerr << "check failed\n";
      return 1;
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
