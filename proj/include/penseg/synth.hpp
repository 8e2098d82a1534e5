#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "penseg/alphabet.hpp"
#include "penseg/recording.hpp"
#include "penseg/rng.hpp"

namespace penseg::synth {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

using Polyline = std::vector<Point>;  // a single point is a dot

/// Per-glyph stroke lists in unit-square coordinates.
struct StrokeTemplate {
  std::array<std::vector<Polyline>, kNumClasses> strokes;

  const std::vector<Polyline>& operator[](CharClass c) const { return strokes[c.index()]; }
  std::size_t canonical_count(CharClass c) const { return strokes[c.index()].size(); }
};

/// The templates shipped in data/stroke_templates.txt.
const StrokeTemplate& default_templates();
/// Throws Error on malformed input.
StrokeTemplate parse_templates(const std::string& text);

/// Rewrites a glyph's stroke list to exactly `count` strokes by joining neighbours
/// (pen stays down) or splitting strokes / adding dots.
std::vector<Polyline> restroke(const std::vector<Polyline>& strokes, int count);

struct Jittered {
  double mean = 0.0;
  double jitter = 0.0;  // half-width of the uniform jitter
};

struct WriterStyle {
  std::array<int, kNumClasses> stroke_counts{};  // pen-down strokes per glyph
  double speed_scale = 1.0;                      // >1 writes faster
  Jittered inter_char_gap_ms{320.0, 80.0};
  Jittered intra_char_gap_ms{90.0, 20.0};
  double noise_acc = 0.03;
  double noise_gyro = 0.03;
  double noise_mag = 0.02;
  double noise_force = 0.05;
  double force_press = 1.0;
  double period_mean_ms = 10.0;  // sample period ~ N(mean, sd) clamped to [5, 30]
  double period_sd_ms = 2.0;
  double size = 1.0;       // glyph height scale
  double slant = 0.0;      // horizontal shear
  double rotation = 0.0;   // sensor frame rotation, radians
  std::array<double, 3> mag_field{0.3, -0.2, 0.5};

  int strokes(CharClass c) const { return stroke_counts[c.index()]; }
};

/// Throws Error when a WriterStyle invariant fails.
void validate(const WriterStyle& style);

/// Canonical counts everywhere, ':' as two dots.
WriterStyle default_style();

/// Parameter ranges for randomized writers.
struct StyleRanges {
  double speed_min = 0.85, speed_max = 1.2;
  double size_min = 0.85, size_max = 1.15;
  double slant_min = -0.25, slant_max = 0.25;
  double rotation_min = -0.35, rotation_max = 0.35;
  double period_mean_min = 8.0, period_mean_max = 12.0;
  double force_press_min = 1.0, force_press_max = 1.0;
  double noise_force = 0.05;
  double noise_acc_min = 0.02, noise_acc_max = 0.05;
};

struct GeneratorConfig {
  std::uint64_t seed = 42;
  int writers = 10;
  int terms_per_writer = 30;
  int min_len = 10;
  int max_len = 20;
  double violation_rate = 0.0;  // fraction of terms with a style-violating stroke count
  StyleRanges ranges;
};

WriterStyle random_style(Rng& rng, const StyleRanges& ranges);

/// Alternating digit-run / operator term of length in [min_len, max_len].
std::string sample_label(Rng& rng, int min_len = 10, int max_len = 20);

/// Noise-free channel model of one term, evaluated at arbitrary times.
class Trajectory {
 public:
  Trajectory(const WriterStyle& style, const std::vector<CharClass>& label, Rng& rng,
             const std::vector<int>& stroke_overrides = {});

  double duration_ms() const { return duration_ms_; }
  bool pen_down(double t_ms) const;
  /// Index of the character whose stroke covers t, if any.
  std::optional<std::size_t> stroke_char(double t_ms) const;
  /// Channels without noise; force is force_press or 0.
  std::array<double, kNumChannels> channels(double t_ms) const;

 private:
  struct Phase {
    double t0 = 0.0, t1 = 0.0;
    bool down = false;
    std::size_t char_index = 0;
    Polyline path;           // world coordinates; empty path for dwell
    std::vector<double> cum;  // cumulative arc length
    bool dot = false;
  };

  Point position(double t_ms) const;
  double lift(double t_ms) const;
  const Phase* phase_at(double t_ms) const;

  const WriterStyle style_;
  std::vector<Phase> phases_;
  double duration_ms_ = 0.0;
};

/// Samples a trajectory with jittered periods and additive noise. The result
/// carries truth segments in raw sample indices.
Recording generate_term(const WriterStyle& style, const std::string& label, Rng& rng,
                        const std::vector<int>& stroke_overrides = {});

struct SyntheticCorpus {
  Corpus corpus;
  std::map<std::string, WriterStyle> styles;
  std::set<std::pair<std::string, std::string>> violations;  // (writer, id)
};

SyntheticCorpus generate_corpus(const GeneratorConfig& cfg);

std::string writer_name(int index);

}  // namespace penseg::synth
