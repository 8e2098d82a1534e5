#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "penseg/alphabet.hpp"
#include "penseg/recording.hpp"

namespace penseg::prep {

inline constexpr std::size_t kWindowSize = 16;
inline constexpr std::size_t kWindowStride = 12;
inline constexpr double kDefaultPeriodMs = 10.0;

struct PreprocessConfig {
  double period_ms = kDefaultPeriodMs;
  std::size_t window_size = kWindowSize;
  std::size_t window_stride = kWindowStride;
};

/// Linear interpolation onto t = 0, period, 2*period, ... up to the last
/// original timestamp. Label and (raw) truth segments are dropped; use
/// resample_segment to map truth into the new index space.
Recording resample(const Recording& rec, double period_ms = kDefaultPeriodMs);

/// Maps a raw-index segment onto the resampled grid: the grid points inside
/// [t(start), t(end - 1)]. Returns nullopt if none fall inside.
std::optional<Segment> resample_segment(const Recording& raw, const Segment& s, double period_ms = kDefaultPeriodMs);

/// Per-recording min-max scaling of each channel; constant channels map to 0.
Recording normalize(const Recording& rec);

/// resample then normalize.
Recording prepare(const Recording& rec, const PreprocessConfig& cfg = {});

struct WindowSource {
  std::string recording;  // writer/id
  std::size_t segment = 0;
  std::size_t offset = 0;  // first sample index in the recording
};

struct Window {
  std::array<double, kWindowSize * kNumChannels> values{};  // row-major: time x channel
  WindowSource source;
  std::optional<CharClass> label;

  double at(std::size_t row, std::size_t channel) const { return values[row * kNumChannels + channel]; }
};

/// 0 if length < size, else 1 + (length - size) / stride.
std::size_t count_windows(std::size_t length, std::size_t size = kWindowSize, std::size_t stride = kWindowStride);

/// Windows over samples [seg.start, seg.end) at offsets start, start+stride, ...
std::vector<Window> make_windows(const Recording& normalized, const Segment& seg, std::size_t size = kWindowSize,
                                 std::size_t stride = kWindowStride);

}  // namespace penseg::prep
