#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "penseg/alphabet.hpp"
#include "penseg/recording.hpp"

namespace penseg::split {

/// Half-open pen-down interval in resampled sample indices.
struct Stroke {
  std::size_t start = 0;
  std::size_t end = 0;
  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct StrokeParams {
  double force_threshold = 0.1;  // on normalized force
  std::size_t min_stroke_len = 3;
  std::size_t merge_gap = 2;
};

/// Runs of normalized force above the threshold, debounced and length-filtered.
std::vector<Stroke> extract_strokes(const Recording& prepared, const StrokeParams& params = {});
/// Same scan over a bare force trace.
std::vector<Stroke> extract_strokes(const std::vector<double>& force, const StrokeParams& params = {});

inline constexpr int kUnknownCount = 0;
inline constexpr int kMaxStrokesPerGlyph = 3;

struct StrokeCountProfile {
  std::string writer_id;
  std::array<int, kNumClasses> counts{};  // 1..3, or kUnknownCount
  std::array<std::array<int, kMaxStrokesPerGlyph + 1>, kNumClasses> votes{};  // votes[c][n]

  bool known(CharClass c) const { return counts[c.index()] != kUnknownCount; }
  int count(CharClass c) const { return counts[c.index()]; }
  int support(CharClass c) const;
};

struct ProfileParams {
  double agreement = 0.75;
  int min_votes = 3;
};

/// One labelled term reduced to what inference needs.
struct TermEvidence {
  std::vector<CharClass> label;
  std::size_t strokes = 0;
};

/// Votes on per-glyph stroke counts. Throws NoEvidence if no term votes.
StrokeCountProfile infer_profile(const std::string& writer_id, const std::vector<TermEvidence>& terms,
                                 const ProfileParams& params = {});

/// Exact minimizer of sum_t |sum_c n_t(c) s(c) - S_t| over s in {1,2,3}^classes,
/// ties broken towards smaller counts (':' explored from 2). Classes absent from
/// every term stay 0.
std::array<int, kNumClasses> fit_stroke_counts(const std::vector<TermEvidence>& terms);

enum class RejectReason { CountMismatch, UnknownClass };
const char* to_string(RejectReason r);

struct Reject {
  RejectReason reason;
  std::size_t expected = 0;
  std::size_t found = 0;
};

using SplitOutcome = std::variant<std::vector<Segment>, Reject>;

/// Assigns strokes to characters left to right using the writer profile.
SplitOutcome split_term(const std::vector<Stroke>& strokes, const std::vector<CharClass>& label,
                        const StrokeCountProfile& profile);

double corpus_yield(std::size_t accepted, std::size_t attempted);
double corpus_yield(const std::vector<SplitOutcome>& outcomes);

/// Result of running the whole splitter over one writer.
struct WriterSplit {
  StrokeCountProfile profile;
  std::map<std::string, SplitOutcome> outcomes;  // recording id -> outcome
  std::size_t accepted() const;
};

struct SplitterConfig {
  StrokeParams strokes;
  ProfileParams profile;
  double period_ms = 10.0;
};

/// Resamples and normalizes each labelled recording, infers the profile, then splits.
WriterSplit split_writer(const std::vector<Recording>& recordings, const SplitterConfig& cfg = {});

void write_profile_tsv(std::ostream& out, const StrokeCountProfile& profile);

}  // namespace penseg::split
