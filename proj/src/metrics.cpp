#include "penseg/metrics.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "penseg/alphabet.hpp"

namespace penseg::metrics {

std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

std::size_t levenshtein(std::string_view a, std::string_view b) { return levenshtein(decode_utf8(a), decode_utf8(b)); }

void ConfusionMatrix::add(int truth, int predicted, std::size_t count) {
  if (truth < 0 || predicted < 0 || static_cast<std::size_t>(truth) >= n_ || static_cast<std::size_t>(predicted) >= n_) {
    throw std::out_of_range("confusion index out of range");
  }
  cells_[static_cast<std::size_t>(truth) * n_ + static_cast<std::size_t>(predicted)] += count;
}

std::size_t ConfusionMatrix::at(int truth, int predicted) const {
  return cells_.at(static_cast<std::size_t>(truth) * n_ + static_cast<std::size_t>(predicted));
}

std::size_t ConfusionMatrix::total() const { return std::accumulate(cells_.begin(), cells_.end(), std::size_t{0}); }

std::size_t ConfusionMatrix::support(int truth) const {
  std::size_t s = 0;
  for (std::size_t p = 0; p < n_; ++p) s += at(truth, static_cast<int>(p));
  return s;
}

double ConfusionMatrix::accuracy() const {
  const std::size_t t = total();
  if (t == 0) return 0.0;
  std::size_t hit = 0;
  for (std::size_t c = 0; c < n_; ++c) hit += at(static_cast<int>(c), static_cast<int>(c));
  return static_cast<double>(hit) / static_cast<double>(t);
}

double ConfusionMatrix::f1(int cls) const {
  const double tp = static_cast<double>(at(cls, cls));
  double predicted = 0;
  for (std::size_t t = 0; t < n_; ++t) predicted += static_cast<double>(at(static_cast<int>(t), cls));
  const double actual = static_cast<double>(support(cls));
  if (predicted + actual == 0) return 0.0;
  return 2.0 * tp / (predicted + actual);
}

double ConfusionMatrix::macro_f1() const {
  double sum = 0;
  std::size_t used = 0;
  for (std::size_t c = 0; c < n_; ++c) {
    const int k = static_cast<int>(c);
    double predicted = 0;
    for (std::size_t t = 0; t < n_; ++t) predicted += static_cast<double>(at(static_cast<int>(t), k));
    if (support(k) == 0 && predicted == 0) continue;
    sum += f1(k);
    ++used;
  }
  return used == 0 ? 0.0 : sum / static_cast<double>(used);
}

std::string ConfusionMatrix::to_csv(const std::vector<std::string>& names) const {
  std::string out = "truth\\pred";
  for (std::size_t c = 0; c < n_; ++c) out += "," + (c < names.size() ? names[c] : std::to_string(c));
  out += '\n';
  for (std::size_t t = 0; t < n_; ++t) {
    out += t < names.size() ? names[t] : std::to_string(t);
    for (std::size_t p = 0; p < n_; ++p) out += "," + std::to_string(cells_[t * n_ + p]);
    out += '\n';
  }
  return out;
}

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("confusion: length mismatch");
  ConfusionMatrix m(classes);
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return m;
}

double binary_f1(const std::vector<bool>& truth, const std::vector<bool>& predicted) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("binary_f1: length mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] && predicted[i]) ++tp;
    else if (predicted[i]) ++fp;
    else if (truth[i]) ++fn;
  }
  if (tp + fp + fn == 0) return 0.0;
  return 2 * tp / (2 * tp + fp + fn);
}

std::size_t short_error_runs(const std::vector<bool>& truth, const std::vector<bool>& predicted, std::size_t max_len) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("short_error_runs: length mismatch");
  std::size_t runs = 0, len = 0;
  for (std::size_t i = 0; i <= truth.size(); ++i) {
    const bool wrong = i < truth.size() && truth[i] != predicted[i];
    if (wrong) {
      ++len;
    } else {
      if (len > 0 && len < max_len) ++runs;
      len = 0;
    }
  }
  return runs;
}

}  // namespace penseg::metrics
