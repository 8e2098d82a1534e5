#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "penseg/alphabet.hpp"

namespace penseg {

inline constexpr std::size_t kNumChannels = 13;

/// Channel order inside SensorSample::channels.
enum Channel : std::size_t {
  kAccFrontX, kAccFrontY, kAccFrontZ,
  kAccRearX, kAccRearY, kAccRearZ,
  kGyroX, kGyroY, kGyroZ,
  kMagX, kMagY, kMagZ,
  kForce,
};

struct SensorSample {
  std::int64_t index = 0;
  std::int64_t millis_delta = 0;
  std::array<double, kNumChannels> channels{};

  friend bool operator==(const SensorSample&, const SensorSample&) = default;
};

/// Half-open sample interval [start, end).
struct Segment {
  std::size_t start = 0;
  std::size_t end = 0;
  std::optional<CharClass> label;

  std::size_t length() const noexcept { return end - start; }
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Recording {
  std::string writer_id;
  std::string id;  // file stem, e.g. "007"
  std::vector<SensorSample> samples;
  std::optional<std::string> label;  // UTF-8
  std::optional<std::vector<Segment>> truth_segments;  // labelled, raw indices

  std::size_t size() const noexcept { return samples.size(); }
  /// Cumulative millis_delta; the first sample sits at 0.
  std::vector<std::int64_t> absolute_millis() const;
  double channel(std::size_t sample, Channel c) const { return samples[sample].channels[c]; }

  friend bool operator==(const Recording&, const Recording&) = default;
};

/// writer id -> recordings ordered by file name.
using Corpus = std::map<std::string, std::vector<Recording>>;

inline constexpr std::string_view kCsvHeader =
    "index,millis_delta,afx,afy,afz,arx,ary,arz,gx,gy,gz,mx,my,mz,force";

/// Parses the 15-column sample CSV. Throws MalformedRow / EmptyRecording.
Recording parse_recording(std::istream& in, std::string writer_id, std::string id = {});
void emit_recording(std::ostream& out, const Recording& rec);

/// Checks the Recording invariants; throws Error describing the first violation.
void validate(const Recording& rec);

/// Reads `<root>/<writer>/<nnn>.csv` with labels.tsv and optional truth sidecars.
/// Throws CorpusError naming the offending file.
Corpus load_corpus(const std::filesystem::path& root);
void write_corpus(const std::filesystem::path& root, const Corpus& corpus);

/// `start end glyph` rows.
std::vector<Segment> parse_segments_tsv(std::istream& in);
void emit_segments_tsv(std::ostream& out, const std::vector<Segment>& segments);

}  // namespace penseg
