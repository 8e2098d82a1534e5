#include "penseg/splitter.hpp"

#include <algorithm>
#include <cstdlib>
#include <limits>
#include <ostream>

#include "penseg/errors.hpp"
#include "penseg/preprocess.hpp"

namespace penseg::split {

std::vector<Stroke> extract_strokes(const std::vector<double>& force, const StrokeParams& p) {
  std::vector<Stroke> runs;
  std::size_t i = 0;
  while (i < force.size()) {
    if (force[i] > p.force_threshold) {
      std::size_t j = i;
      while (j < force.size() && force[j] > p.force_threshold) ++j;
      if (!runs.empty() && i - runs.back().end < p.merge_gap) {
        runs.back().end = j;
      } else {
        runs.push_back({i, j});
      }
      i = j;
    } else {
      ++i;
    }
  }
  std::erase_if(runs, [&](const Stroke& s) { return s.length() < p.min_stroke_len; });
  return runs;
}

std::vector<Stroke> extract_strokes(const Recording& prepared, const StrokeParams& p) {
  std::vector<double> force(prepared.samples.size());
  for (std::size_t i = 0; i < force.size(); ++i) force[i] = prepared.samples[i].channels[kForce];
  return extract_strokes(force, p);
}

int StrokeCountProfile::support(CharClass c) const {
  int total = 0;
  for (int v : votes[c.index()]) total += v;
  return total;
}

namespace {

struct SearchTerm {
  std::array<int, kNumClasses> n{};
  long target = 0;
  long min_rest = 0;  // strokes from unassigned classes at count 1
};

class CountSearch {
 public:
  CountSearch(const std::vector<TermEvidence>& terms) {
    std::array<bool, kNumClasses> present{};
    for (const auto& t : terms) {
      SearchTerm st;
      for (CharClass c : t.label) {
        ++st.n[c.index()];
        present[c.index()] = true;
      }
      st.target = static_cast<long>(t.strokes);
      terms_.push_back(st);
    }
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (present[c]) order_.push_back(static_cast<int>(c));
    }
    // Most frequent classes first tightens the bound early.
    std::stable_sort(order_.begin(), order_.end(), [&](int a, int b) { return frequency(a) > frequency(b); });
  }

  std::array<int, kNumClasses> solve() {
    std::array<int, kNumClasses> seed{};
    for (int c : order_) seed[c] = 1;
    const int colon = char_to_class(U':').index();
    if (seed[colon] != 0) seed[colon] = 2;
    best_ = seed;
    best_cost_ = cost(seed);
    current_.fill(0);
    partial_.assign(terms_.size(), 0);
    rest_.assign(terms_.size(), 0);
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      for (int c : order_) rest_[t] += terms_[t].n[c];
    }
    dfs(0);
    return best_;
  }

 private:
  long frequency(int c) const {
    long f = 0;
    for (const auto& t : terms_) f += t.n[c];
    return f;
  }

  long cost(const std::array<int, kNumClasses>& s) const {
    long total = 0;
    for (const auto& t : terms_) {
      long e = 0;
      for (std::size_t c = 0; c < kNumClasses; ++c) e += static_cast<long>(t.n[c]) * s[c];
      total += std::labs(e - t.target);
    }
    return total;
  }

  long bound() const {
    long total = 0;
    for (std::size_t t = 0; t < terms_.size(); ++t) {
      const long lo = partial_[t] + rest_[t];
      const long hi = partial_[t] + kMaxStrokesPerGlyph * rest_[t];
      const long target = terms_[t].target;
      if (target < lo) total += lo - target;
      else if (target > hi) total += target - hi;
    }
    return total;
  }

  bool better(long c) const {
    if (c != best_cost_) return c < best_cost_;
    // Equal cost: prefer the assignment closer to the all-ones (':' = 2) default.
    return deviation(current_) < deviation(best_);
  }

  static int deviation(const std::array<int, kNumClasses>& s) {
    const int colon = char_to_class(U':').index();
    int d = 0;
    for (std::size_t c = 0; c < kNumClasses; ++c) {
      if (s[c] == 0) continue;
      d += std::abs(s[c] - (static_cast<int>(c) == colon ? 2 : 1));
    }
    return d;
  }

  void dfs(std::size_t depth) {
    if (depth == order_.size()) {
      const long c = bound();
      if (better(c)) {
        best_cost_ = c;
        best_ = current_;
      }
      return;
    }
    const int cls = order_[depth];
    const int colon = char_to_class(U':').index();
    const int first = cls == colon ? 2 : 1;
    const int candidates[3] = {first, first == 2 ? 1 : 2, 3};
    for (int v : candidates) {
      current_[cls] = v;
      for (std::size_t t = 0; t < terms_.size(); ++t) {
        partial_[t] += static_cast<long>(terms_[t].n[cls]) * v;
        rest_[t] -= terms_[t].n[cls];
      }
      if (bound() <= best_cost_) dfs(depth + 1);
      for (std::size_t t = 0; t < terms_.size(); ++t) {
        partial_[t] -= static_cast<long>(terms_[t].n[cls]) * v;
        rest_[t] += terms_[t].n[cls];
      }
    }
    current_[cls] = 0;
  }

  std::vector<SearchTerm> terms_;
  std::vector<int> order_;
  std::array<int, kNumClasses> best_{};
  std::array<int, kNumClasses> current_{};
  long best_cost_ = std::numeric_limits<long>::max();
  std::vector<long> partial_;
  std::vector<long> rest_;
};

}  // namespace

std::array<int, kNumClasses> fit_stroke_counts(const std::vector<TermEvidence>& terms) {
  return CountSearch(terms).solve();
}

StrokeCountProfile infer_profile(const std::string& writer_id, const std::vector<TermEvidence>& terms,
                                 const ProfileParams& params) {
  StrokeCountProfile profile;
  profile.writer_id = writer_id;
  std::vector<TermEvidence> mismatched;
  bool any_vote = false;
  for (const auto& t : terms) {
    if (t.label.empty() || t.strokes == 0) continue;
    if (t.strokes == t.label.size()) {
      for (CharClass c : t.label) ++profile.votes[c.index()][1];
      any_vote = true;
    } else {
      mismatched.push_back(t);
    }
  }
  if (!mismatched.empty()) {
    std::vector<TermEvidence> all;
    for (const auto& t : terms) {
      if (!t.label.empty() && t.strokes > 0) all.push_back(t);
    }
    const auto fit = fit_stroke_counts(all);
    for (const auto& t : mismatched) {
      long expected = 0;
      for (CharClass c : t.label) expected += fit[c.index()];
      const long residual = static_cast<long>(t.strokes) - expected;
      std::array<int, kNumClasses> occurrences{};
      for (CharClass c : t.label) ++occurrences[c.index()];
      // Each character votes for the count that best explains this term with
      // every other class held at the writer-wide fit.
      for (CharClass c : t.label) {
        const int ci = c.index();
        int vote = fit[ci];
        long best = std::labs(residual);
        for (int v = 1; v <= kMaxStrokesPerGlyph; ++v) {
          const long r = std::labs(residual - static_cast<long>(occurrences[ci]) * (v - fit[ci]));
          if (r < best) {
            best = r;
            vote = v;
          }
        }
        ++profile.votes[ci][vote];
        any_vote = true;
      }
    }
  }
  if (!any_vote) throw NoEvidence(writer_id);
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const auto& v = profile.votes[c];
    int total = 0, top = 0, top_value = kUnknownCount;
    for (int n = 1; n <= kMaxStrokesPerGlyph; ++n) {
      total += v[n];
      if (v[n] > top) {
        top = v[n];
        top_value = n;
      }
    }
    const bool agreed = total >= params.min_votes && static_cast<double>(top) >= params.agreement * total;
    profile.counts[c] = agreed ? top_value : kUnknownCount;
  }
  return profile;
}

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::CountMismatch: return "count_mismatch";
    case RejectReason::UnknownClass: return "unknown_class";
  }
  return "?";
}

SplitOutcome split_term(const std::vector<Stroke>& strokes, const std::vector<CharClass>& label,
                        const StrokeCountProfile& profile) {
  std::size_t expected = 0;
  for (CharClass c : label) {
    if (!profile.known(c)) return Reject{RejectReason::UnknownClass, 0, strokes.size()};
    expected += static_cast<std::size_t>(profile.count(c));
  }
  if (expected != strokes.size()) return Reject{RejectReason::CountMismatch, expected, strokes.size()};
  std::vector<Segment> segments;
  std::size_t k = 0;
  for (CharClass c : label) {
    const std::size_t n = static_cast<std::size_t>(profile.count(c));
    segments.push_back({strokes[k].start, strokes[k + n - 1].end, c});
    k += n;
  }
  return segments;
}

double corpus_yield(std::size_t accepted, std::size_t attempted) {
  if (attempted == 0) throw Error("yield needs at least one split attempt");
  return static_cast<double>(accepted) / static_cast<double>(attempted);
}

double corpus_yield(const std::vector<SplitOutcome>& outcomes) {
  std::size_t ok = 0;
  for (const auto& o : outcomes) ok += std::holds_alternative<std::vector<Segment>>(o) ? 1 : 0;
  return corpus_yield(ok, outcomes.size());
}

std::size_t WriterSplit::accepted() const {
  std::size_t ok = 0;
  for (const auto& [id, o] : outcomes) ok += std::holds_alternative<std::vector<Segment>>(o) ? 1 : 0;
  return ok;
}

WriterSplit split_writer(const std::vector<Recording>& recordings, const SplitterConfig& cfg) {
  std::vector<const Recording*> labelled;
  std::vector<std::vector<Stroke>> strokes;
  std::vector<TermEvidence> evidence;
  std::string writer;
  for (const auto& rec : recordings) {
    if (!rec.label) continue;
    writer = rec.writer_id;
    const Recording prepared = prep::normalize(prep::resample(rec, cfg.period_ms));
    labelled.push_back(&rec);
    strokes.push_back(extract_strokes(prepared, cfg.strokes));
    evidence.push_back({decode_label(*rec.label), strokes.back().size()});
  }
  WriterSplit out;
  out.profile = infer_profile(writer, evidence, cfg.profile);
  for (std::size_t i = 0; i < labelled.size(); ++i) {
    out.outcomes.emplace(labelled[i]->id, split_term(strokes[i], evidence[i].label, out.profile));
  }
  return out;
}

void write_profile_tsv(std::ostream& out, const StrokeCountProfile& profile) {
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    const CharClass cls(static_cast<int>(c));
    if (profile.support(cls) == 0) continue;
    out << cls.utf8() << '\t';
    if (profile.known(cls)) out << profile.count(cls);
    else out << "unknown";
    out << '\t' << profile.support(cls) << '\n';
  }
}

}  // namespace penseg::split
