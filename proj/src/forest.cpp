#include "penseg/forest.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "penseg/errors.hpp"
#include "penseg/rng.hpp"

namespace penseg::forest {

int DecisionTree::predict(std::span<const double> row) const {
  int i = 0;
  while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
    const Node& n = nodes_[static_cast<std::size_t>(i)];
    i = row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return nodes_[static_cast<std::size_t>(i)].label;
}

std::size_t DecisionTree::depth() const {
  if (nodes_.empty()) return 0;
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t best = 0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes_[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

std::vector<int> RandomForest::votes(std::span<const double> row) const {
  std::vector<int> v(static_cast<std::size_t>(n_classes_), 0);
  for (const auto& t : trees_) ++v[static_cast<std::size_t>(t.predict(row))];
  return v;
}

int RandomForest::predict(std::span<const double> row) const {
  const auto v = votes(row);
  return static_cast<int>(std::max_element(v.begin(), v.end()) - v.begin());
}

std::vector<int> RandomForest::predict(const Matrix& rows) const {
  std::vector<int> out(static_cast<std::size_t>(rows.rows()));
  for (Eigen::Index r = 0; r < rows.rows(); ++r) {
    out[static_cast<std::size_t>(r)] = predict(std::span<const double>(rows.row(r).data(), static_cast<std::size_t>(rows.cols())));
  }
  return out;
}

double gini(std::span<const std::size_t> counts) {
  const double n = static_cast<double>(std::accumulate(counts.begin(), counts.end(), std::size_t{0}));
  if (n == 0) return 0.0;
  double s = 1.0;
  for (auto c : counts) {
    const double p = static_cast<double>(c) / n;
    s -= p * p;
  }
  return s;
}

namespace {

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double impurity = 0.0;  // weighted child impurity
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& x, std::span<const int> y, int n_classes, std::size_t max_features, std::size_t min_leaf,
              std::uint64_t seed)
      : x_(x), y_(y), n_classes_(n_classes), max_features_(max_features), min_leaf_(std::max<std::size_t>(1, min_leaf)),
        rng_(make_rng(seed)) {
    features_.resize(static_cast<std::size_t>(x.cols()));
    std::iota(features_.begin(), features_.end(), 0);
  }

  std::vector<Node> build(std::vector<std::size_t> rows) {
    nodes_.clear();
    rows_ = std::move(rows);
    nodes_.push_back({});
    // Explicit stack of (node, begin, end) over rows_.
    std::vector<std::array<std::size_t, 3>> stack{{0, 0, rows_.size()}};
    while (!stack.empty()) {
      const auto [node, begin, end] = stack.back();
      stack.pop_back();
      const auto counts = histogram(begin, end);
      nodes_[node].label = majority(counts);
      if (gini(counts) == 0.0 || end - begin < 2 * min_leaf_) continue;
      const Split split = best_split(begin, end, gini(counts));
      if (split.feature < 0) continue;
      const auto mid = std::partition(rows_.begin() + static_cast<std::ptrdiff_t>(begin),
                                      rows_.begin() + static_cast<std::ptrdiff_t>(end), [&](std::size_t r) {
                                        return x_(static_cast<Eigen::Index>(r), split.feature) <= split.threshold;
                                      }) -
                       rows_.begin();
      const auto m = static_cast<std::size_t>(mid);
      const int left = static_cast<int>(nodes_.size());
      nodes_.push_back({});
      nodes_.push_back({});
      nodes_[node].feature = split.feature;
      nodes_[node].threshold = split.threshold;
      nodes_[node].left = left;
      nodes_[node].right = left + 1;
      stack.push_back({static_cast<std::size_t>(left + 1), m, end});
      stack.push_back({static_cast<std::size_t>(left), begin, m});
    }
    return nodes_;
  }

 private:
  std::vector<std::size_t> histogram(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> c(static_cast<std::size_t>(n_classes_), 0);
    for (std::size_t i = begin; i < end; ++i) ++c[static_cast<std::size_t>(y_[rows_[i]])];
    return c;
  }

  static int majority(const std::vector<std::size_t>& c) {
    return static_cast<int>(std::max_element(c.begin(), c.end()) - c.begin());
  }

  Split best_split(std::size_t begin, std::size_t end, double parent_gini) {
    std::shuffle(features_.begin(), features_.end(), rng_);
    Split best;
    best.impurity = parent_gini;
    const std::size_t n = end - begin;
    std::vector<std::pair<double, int>> column(n);
    std::vector<std::size_t> left(static_cast<std::size_t>(n_classes_)), total(static_cast<std::size_t>(n_classes_));
    for (std::size_t i = begin; i < end; ++i) ++total[static_cast<std::size_t>(y_[rows_[i]])];
    std::size_t tried = 0;
    for (std::size_t fi = 0; fi < features_.size(); ++fi) {
      // Keep drawing past max_features only while nothing usable was found.
      if (tried >= max_features_ && best.feature >= 0) break;
      ++tried;
      const int f = features_[fi];
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = rows_[begin + i];
        column[i] = {x_(static_cast<Eigen::Index>(r), f), y_[r]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;
      std::fill(left.begin(), left.end(), 0);
      for (std::size_t i = 0; i + 1 < n; ++i) {
        ++left[static_cast<std::size_t>(column[i].second)];
        if (column[i].first == column[i + 1].first) continue;
        const std::size_t nl = i + 1, nr = n - nl;
        if (nl < min_leaf_ || nr < min_leaf_) continue;
        double gl = 1.0, gr = 1.0;
        for (std::size_t c = 0; c < left.size(); ++c) {
          const double pl = static_cast<double>(left[c]) / static_cast<double>(nl);
          const double pr = static_cast<double>(total[c] - left[c]) / static_cast<double>(nr);
          gl -= pl * pl;
          gr -= pr * pr;
        }
        const double imp = (static_cast<double>(nl) * gl + static_cast<double>(nr) * gr) / static_cast<double>(n);
        if (imp < best.impurity - 1e-12 || (best.feature < 0 && imp <= best.impurity)) {
          best.feature = f;
          best.threshold = 0.5 * (column[i].first + column[i + 1].first);
          // Midpoints can round onto the upper value; keep the split strict.
          if (best.threshold >= column[i + 1].first) best.threshold = column[i].first;
          best.impurity = imp;
        }
      }
    }
    return best;
  }

  const Matrix& x_;
  std::span<const int> y_;
  int n_classes_;
  std::size_t max_features_;
  std::size_t min_leaf_;
  Rng rng_;
  std::vector<int> features_;
  std::vector<std::size_t> rows_;
  std::vector<Node> nodes_;
};

}  // namespace

DecisionTree grow_tree(const Matrix& x, std::span<const int> y, std::vector<std::size_t> rows, int n_classes,
                       std::size_t max_features, std::size_t min_leaf, std::uint64_t seed) {
  if (rows.empty()) throw DegenerateData("cannot grow a tree on zero rows");
  TreeBuilder builder(x, y, n_classes, std::max<std::size_t>(1, max_features), min_leaf, seed);
  return DecisionTree(builder.build(std::move(rows)));
}

RandomForest train_forest(const Matrix& x, std::span<const int> y, const ForestConfig& cfg) {
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw DegenerateData("feature/label row count mismatch");
  if (y.empty()) throw DegenerateData("no training rows");
  if (cfg.n_estimators < 1) throw DegenerateData("forest needs at least one tree");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction <= 1.0)) throw DegenerateData("train_fraction must be in (0, 1]");
  const int n_classes = *std::max_element(y.begin(), y.end()) + 1;
  if (*std::min_element(y.begin(), y.end()) < 0) throw DegenerateData("negative class label");
  Rng rng = make_rng(derive_seed(cfg.seed, "forest/subsample"));
  std::vector<std::size_t> all(y.size());
  std::iota(all.begin(), all.end(), 0);
  std::shuffle(all.begin(), all.end(), rng);
  const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(cfg.train_fraction * static_cast<double>(y.size()))));
  all.resize(keep);
  std::sort(all.begin(), all.end());
  std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
  for (auto r : all) seen[static_cast<std::size_t>(y[r])] = true;
  if (std::count(seen.begin(), seen.end(), true) < 2) throw DegenerateData("training subsample holds a single class");

  const std::size_t n_features = static_cast<std::size_t>(x.cols());
  const std::size_t mtry = cfg.max_features > 0
                               ? cfg.max_features
                               : static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_features))));
  std::vector<DecisionTree> trees;
  trees.reserve(cfg.n_estimators);
  for (std::size_t t = 0; t < cfg.n_estimators; ++t) {
    Rng boot = make_rng(derive_seed(cfg.seed, "forest/bootstrap", t));
    std::uniform_int_distribution<std::size_t> pick(0, all.size() - 1);
    std::vector<std::size_t> rows(all.size());
    for (auto& r : rows) r = all[pick(boot)];
    trees.push_back(grow_tree(x, y, std::move(rows), n_classes, mtry, cfg.min_leaf, derive_seed(cfg.seed, "forest/tree", t)));
  }
  return RandomForest(std::move(trees), n_features, n_classes);
}

void save_forest(std::ostream& out, const RandomForest& forest) {
  out << "PSRF " << kForestVersion << '\n';
  out << forest.trees().size() << ' ' << forest.n_features() << ' ' << forest.n_classes() << '\n';
  char buf[64];
  for (const auto& tree : forest.trees()) {
    out << tree.nodes().size() << '\n';
    for (const auto& n : tree.nodes()) {
      std::snprintf(buf, sizeof buf, "%a", n.threshold);
      out << n.feature << ' ' << buf << ' ' << n.left << ' ' << n.right << ' ' << n.label << '\n';
    }
  }
  if (!out) throw CheckpointError("failed writing forest");
}

RandomForest load_forest(std::istream& in) {
  std::string magic;
  std::uint32_t version = 0;
  if (!(in >> magic >> version) || magic != "PSRF") throw CheckpointError("not a forest checkpoint");
  if (version != kForestVersion) throw CheckpointError("forest version " + std::to_string(version) + " unsupported");
  std::size_t n_trees = 0, n_features = 0;
  int n_classes = 0;
  if (!(in >> n_trees >> n_features >> n_classes)) throw CheckpointError("forest header truncated");
  std::vector<DecisionTree> trees;
  for (std::size_t t = 0; t < n_trees; ++t) {
    std::size_t n_nodes = 0;
    if (!(in >> n_nodes)) throw CheckpointError("forest truncated");
    std::vector<Node> nodes(n_nodes);
    for (auto& n : nodes) {
      std::string thr;
      if (!(in >> n.feature >> thr >> n.left >> n.right >> n.label)) throw CheckpointError("forest truncated");
      n.threshold = std::strtod(thr.c_str(), nullptr);
      const auto limit = static_cast<int>(n_nodes);
      if (n.feature >= 0 && (n.left <= 0 || n.right <= 0 || n.left >= limit || n.right >= limit ||
                             n.feature >= static_cast<int>(n_features))) {
        throw CheckpointError("forest node out of range");
      }
    }
    trees.emplace_back(std::move(nodes));
  }
  return RandomForest(std::move(trees), n_features, n_classes);
}

void save_forest(const std::filesystem::path& file, const RandomForest& forest) {
  std::ofstream out(file);
  if (!out) throw CheckpointError("cannot open " + file.string());
  save_forest(out, forest);
}

RandomForest load_forest(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw CheckpointError("cannot open " + file.string());
  return load_forest(in);
}

}  // namespace penseg::forest
