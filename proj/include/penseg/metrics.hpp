#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace penseg::metrics {

/// Unit-cost edit distance over code points.
std::size_t levenshtein(std::u32string_view a, std::u32string_view b);
/// UTF-8 overload; '·' counts as one character.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// Square count matrix, rows = truth, cols = prediction.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(std::size_t classes) : n_(classes), cells_(classes * classes, 0) {}

  void add(int truth, int predicted, std::size_t count = 1);
  std::size_t at(int truth, int predicted) const;
  std::size_t classes() const { return n_; }
  std::size_t total() const;
  std::size_t support(int truth) const;

  double accuracy() const;
  /// F1 of one class; 0 when it has neither support nor predictions.
  double f1(int cls) const;
  /// Unweighted mean of f1 over classes that have support or predictions.
  double macro_f1() const;

  /// CSV with a header row of class names.
  std::string to_csv(const std::vector<std::string>& names) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> cells_;
};

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted, std::size_t classes);

/// F1 of the positive class for binary sequences.
double binary_f1(const std::vector<bool>& truth, const std::vector<bool>& predicted);

/// Number of maximal runs of consecutive errors (predicted != truth) whose
/// length is below `max_len`.
std::size_t short_error_runs(const std::vector<bool>& truth, const std::vector<bool>& predicted, std::size_t max_len = 5);

}  // namespace penseg::metrics
