#include "penseg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "penseg/errors.hpp"

namespace penseg::prep {

Recording resample(const Recording& rec, double period_ms) {
  if (rec.samples.size() < 2) throw TooShort();
  if (!(period_ms > 0)) throw Error("resample period must be positive");
  const auto t = rec.absolute_millis();
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (t[i] <= t[i - 1]) throw NonMonotonicTime(i);
  }
  Recording out;
  out.writer_id = rec.writer_id;
  out.id = rec.id;
  const double t_end = static_cast<double>(t.back());
  const auto n = static_cast<std::size_t>(std::floor(t_end / period_ms + 1e-9)) + 1;
  out.samples.reserve(n);
  std::size_t hi = 1;
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = static_cast<double>(k) * period_ms;
    while (hi + 1 < t.size() && static_cast<double>(t[hi]) < tk) ++hi;
    const std::size_t lo = hi - 1;
    const double t0 = static_cast<double>(t[lo]), t1 = static_cast<double>(t[hi]);
    SensorSample s;
    s.index = static_cast<std::int64_t>(k);
    s.millis_delta = k == 0 ? 0 : static_cast<std::int64_t>(std::llround(period_ms));
    if (tk == t0) {
      s.channels = rec.samples[lo].channels;
    } else if (tk == t1) {
      s.channels = rec.samples[hi].channels;
    } else {
      const double a = (tk - t0) / (t1 - t0);
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        const double v0 = rec.samples[lo].channels[c], v1 = rec.samples[hi].channels[c];
        s.channels[c] = v0 + a * (v1 - v0);
      }
    }
    out.samples.push_back(s);
  }
  return out;
}

std::optional<Segment> resample_segment(const Recording& raw, const Segment& s, double period_ms) {
  const auto t = raw.absolute_millis();
  if (s.start >= s.end || s.end > t.size()) throw Error("segment out of range");
  const double t0 = static_cast<double>(t[s.start]);
  const double t1 = static_cast<double>(t[s.end - 1]);
  const auto first = static_cast<std::size_t>(std::ceil(t0 / period_ms - 1e-9));
  const auto last = static_cast<std::size_t>(std::floor(t1 / period_ms + 1e-9));
  if (last < first) return std::nullopt;
  return Segment{first, last + 1, s.label};
}

Recording normalize(const Recording& rec) {
  Recording out = rec;
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& s : rec.samples) {
      lo = std::min(lo, s.channels[c]);
      hi = std::max(hi, s.channels[c]);
    }
    const double range = hi - lo;
    for (auto& s : out.samples) {
      s.channels[c] = range > 0 ? std::clamp((s.channels[c] - lo) / range, 0.0, 1.0) : 0.0;
    }
  }
  return out;
}

Recording prepare(const Recording& rec, const PreprocessConfig& cfg) {
  return normalize(resample(rec, cfg.period_ms));
}

std::size_t count_windows(std::size_t length, std::size_t size, std::size_t stride) {
  if (size == 0 || stride == 0) throw Error("window size and stride must be positive");
  if (length < size) return 0;
  return 1 + (length - size) / stride;
}

std::vector<Window> make_windows(const Recording& rec, const Segment& seg, std::size_t size, std::size_t stride) {
  if (size != kWindowSize) throw Error("window size is fixed at " + std::to_string(kWindowSize));
  if (seg.end > rec.samples.size() || seg.start > seg.end) throw Error("segment out of range");
  std::vector<Window> out;
  const std::size_t n = count_windows(seg.length(), size, stride);
  out.reserve(n);
  for (std::size_t w = 0; w < n; ++w) {
    Window win;
    win.label = seg.label;
    win.source = {rec.writer_id + "/" + rec.id, 0, seg.start + w * stride};
    for (std::size_t r = 0; r < size; ++r) {
      const auto& ch = rec.samples[win.source.offset + r].channels;
      std::copy(ch.begin(), ch.end(), win.values.begin() + static_cast<std::ptrdiff_t>(r * kNumChannels));
    }
    out.push_back(win);
  }
  return out;
}

}  // namespace penseg::prep
