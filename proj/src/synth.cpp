#include "penseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "penseg/errors.hpp"

namespace penseg::synth {

namespace {

constexpr char kTemplateText[] =
#include "stroke_templates.inc"
    ;

constexpr double kMsPerUnit = 170.0;      // pen-down writing pace
constexpr double kMinStrokeMs = 200.0;
constexpr double kDotMs = 180.0;
constexpr double kDotRadius = 0.05;
constexpr double kAdvance = 1.25;         // horizontal glyph pitch
constexpr double kMinIntraGapMs = 50.0;
constexpr double kMinInterGapMs = 150.0;
constexpr double kDiffStepS = 0.004;      // finite-difference step
constexpr double kAccScale = 0.01;
constexpr double kGyroScale = 0.1;

double smoothstep(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * (3.0 - 2.0 * u);
}

double arc_length(const Polyline& p) {
  double len = 0.0;
  for (std::size_t i = 1; i < p.size(); ++i) len += std::hypot(p[i].x - p[i - 1].x, p[i].y - p[i - 1].y);
  return len;
}

double quantize(double v) { return std::round(v * 1e6) / 1e6; }

}  // namespace

StrokeTemplate parse_templates(const std::string& text) {
  StrokeTemplate tpl;
  std::array<bool, kNumClasses> seen{};
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto decoded = decode_utf8(line);
    if (decoded.size() < 4 || decoded[1] != U' ' || decoded[2] != U':') {
      throw Error("stroke templates line " + std::to_string(line_no) + ": expected '<glyph> : <strokes>'");
    }
    const CharClass c = char_to_class(decoded[0]);
    const std::string body = encode_utf8(decoded.substr(3));
    std::vector<Polyline> strokes;
    std::istringstream bs(body);
    std::string chunk;
    while (std::getline(bs, chunk, '|')) {
      Polyline poly;
      std::istringstream ps(chunk);
      std::string pt;
      while (ps >> pt) {
        const auto comma = pt.find(',');
        if (comma == std::string::npos) throw Error("stroke templates line " + std::to_string(line_no) + ": bad point");
        poly.push_back({std::stod(pt.substr(0, comma)), std::stod(pt.substr(comma + 1))});
      }
      if (poly.empty()) throw Error("stroke templates line " + std::to_string(line_no) + ": empty stroke");
      strokes.push_back(std::move(poly));
    }
    tpl.strokes[c.index()] = std::move(strokes);
    seen[c.index()] = true;
  }
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (!seen[i]) throw Error("stroke templates: missing glyph " + CharClass(static_cast<int>(i)).utf8());
  }
  return tpl;
}

const StrokeTemplate& default_templates() {
  static const StrokeTemplate tpl = parse_templates(kTemplateText);
  return tpl;
}

std::vector<Polyline> restroke(const std::vector<Polyline>& strokes, int count) {
  if (count < 1) throw Error("stroke count must be positive");
  std::vector<Polyline> out = strokes;
  while (static_cast<int>(out.size()) > count) {
    Polyline tail = std::move(out.back());
    out.pop_back();
    out.back().insert(out.back().end(), tail.begin(), tail.end());
  }
  while (static_cast<int>(out.size()) < count) {
    auto longest = std::max_element(out.begin(), out.end(),
                                    [](const Polyline& a, const Polyline& b) { return a.size() < b.size(); });
    if (longest->size() == 1) {
      const Point last = out.back().front();
      out.push_back({{last.x + 0.1, last.y - 0.2}});
      continue;
    }
    Polyline& p = *longest;
    if (p.size() == 2) p.insert(p.begin() + 1, Point{(p[0].x + p[1].x) / 2, (p[0].y + p[1].y) / 2});
    const std::size_t mid = p.size() / 2;
    Polyline second(p.begin() + static_cast<std::ptrdiff_t>(mid), p.end());
    p.erase(p.begin() + static_cast<std::ptrdiff_t>(mid) + 1, p.end());
    out.insert(longest + 1, std::move(second));
  }
  return out;
}

void validate(const WriterStyle& style) {
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    if (style.stroke_counts[i] < 1) throw Error("stroke counts must be positive");
  }
  if (style.strokes(char_to_class(U':')) < 2) throw Error("':' needs at least two strokes");
  if (!(style.intra_char_gap_ms.mean < style.inter_char_gap_ms.mean)) {
    throw Error("intra-character gap must be shorter than inter-character gap");
  }
  if (style.noise_acc < 0 || style.noise_gyro < 0 || style.noise_mag < 0 || style.noise_force < 0) {
    throw Error("noise sigmas must be non-negative");
  }
  if (style.speed_scale <= 0 || style.force_press <= 0) throw Error("speed and force must be positive");
}

WriterStyle default_style() {
  WriterStyle s;
  const auto& tpl = default_templates();
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    s.stroke_counts[i] = static_cast<int>(tpl.canonical_count(CharClass(static_cast<int>(i))));
  }
  return s;
}

WriterStyle random_style(Rng& rng, const StyleRanges& r) {
  WriterStyle s = default_style();
  for (char32_t g : {U'0', U'1', U'2', U'3', U'6', U'8', U'9', U'-', U'·'}) s.stroke_counts[char_to_class(g).index()] = 1;
  s.stroke_counts[char_to_class(U':').index()] = 2;
  std::bernoulli_distribution coin(0.5);
  for (char32_t g : {U'=', U'+', U'4', U'5', U'7'}) s.stroke_counts[char_to_class(g).index()] = coin(rng) ? 2 : 1;
  s.speed_scale = uniform(rng, r.speed_min, r.speed_max);
  s.size = uniform(rng, r.size_min, r.size_max);
  s.slant = uniform(rng, r.slant_min, r.slant_max);
  s.rotation = uniform(rng, r.rotation_min, r.rotation_max);
  s.period_mean_ms = uniform(rng, r.period_mean_min, r.period_mean_max);
  s.force_press = r.force_press_min == r.force_press_max ? r.force_press_min
                                                         : uniform(rng, r.force_press_min, r.force_press_max);
  s.noise_force = r.noise_force;
  s.noise_acc = uniform(rng, r.noise_acc_min, r.noise_acc_max);
  s.noise_gyro = s.noise_acc;
  s.mag_field = {uniform(rng, 0.1, 0.5), uniform(rng, -0.4, 0.0), uniform(rng, 0.3, 0.7)};
  s.inter_char_gap_ms = {uniform(rng, 260.0, 380.0), 80.0};
  s.intra_char_gap_ms = {uniform(rng, 75.0, 110.0), 20.0};
  return s;
}

std::string sample_label(Rng& rng, int min_len, int max_len) {
  if (min_len > max_len || min_len < 1) throw Error("sample_label: need 1 <= min_len <= max_len");
  static const std::u32string kOps = U"+-·:";
  const int target = std::uniform_int_distribution<int>(min_len, max_len)(rng);
  std::uniform_int_distribution<int> digit(0, 9);
  std::uniform_int_distribution<int> run_len(1, 3);
  std::uniform_int_distribution<std::size_t> op(0, kOps.size() - 1);
  const bool with_equals = std::bernoulli_distribution(0.6)(rng);
  std::u32string out;
  bool equals_used = false;
  while (static_cast<int>(out.size()) < target) {
    const int rem = target - static_cast<int>(out.size());
    int run = std::min(rem, run_len(rng));
    // A term never ends on an operator: absorb a single leftover slot into the run.
    if (rem - run == 1) ++run;
    for (int i = 0; i < run; ++i) out.push_back(static_cast<char32_t>(U'0' + digit(rng)));
    const int left = target - static_cast<int>(out.size());
    if (left >= 2) {
      if (with_equals && !equals_used && left <= 4) {
        out.push_back(U'=');
        equals_used = true;
      } else {
        out.push_back(kOps[op(rng)]);
      }
    }
  }
  return encode_utf8(out);
}

Trajectory::Trajectory(const WriterStyle& style, const std::vector<CharClass>& label, Rng& rng,
                       const std::vector<int>& overrides)
    : style_(style) {
  if (label.empty()) throw Error("cannot render an empty label");
  if (!overrides.empty() && overrides.size() != label.size()) throw Error("stroke override size mismatch");
  const auto& tpl = default_templates();
  const double speed = style.speed_scale;
  auto to_world = [&](std::size_t char_index, Point p) {
    const double x0 = static_cast<double>(char_index) * kAdvance * style.size;
    return Point{x0 + style.size * 0.8 * (p.x + style.slant * p.y), style.size * p.y};
  };
  auto jittered = [&](const Jittered& j, double floor) {
    return std::max(floor, j.mean + uniform(rng, -j.jitter, j.jitter));
  };

  std::vector<std::vector<Polyline>> glyphs;
  for (std::size_t i = 0; i < label.size(); ++i) {
    const int count = overrides.empty() ? style.strokes(label[i]) : overrides[i];
    auto strokes = restroke(tpl[label[i]], count);
    for (auto& s : strokes) {
      for (auto& p : s) p = to_world(i, p);
    }
    glyphs.push_back(std::move(strokes));
  }

  double t = 0.0;
  auto push = [&](double duration, bool down, std::size_t ci, Polyline path, bool dot) {
    Phase ph;
    ph.t0 = t;
    ph.t1 = t + duration;
    ph.down = down;
    ph.char_index = ci;
    ph.dot = dot;
    ph.path = std::move(path);
    ph.cum.assign(ph.path.size(), 0.0);
    for (std::size_t k = 1; k < ph.path.size(); ++k) {
      ph.cum[k] = ph.cum[k - 1] + std::hypot(ph.path[k].x - ph.path[k - 1].x, ph.path[k].y - ph.path[k - 1].y);
    }
    phases_.push_back(std::move(ph));
    t += duration;
  };

  push(uniform(rng, 250.0, 500.0), false, 0, {glyphs[0][0].front()}, false);
  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    for (std::size_t j = 0; j < glyphs[i].size(); ++j) {
      const Polyline& stroke = glyphs[i][j];
      if (j > 0) {
        push(jittered(style.intra_char_gap_ms, kMinIntraGapMs), false, i,
             {glyphs[i][j - 1].back(), stroke.front()}, false);
      }
      if (stroke.size() == 1) {
        Polyline circle;
        const double r = kDotRadius * style.size;
        for (int k = 0; k <= 12; ++k) {
          const double a = 2.0 * std::numbers::pi * k / 12.0;
          circle.push_back({stroke[0].x + r * std::sin(a), stroke[0].y + r * (1.0 - std::cos(a))});
        }
        push(kDotMs / speed * uniform(rng, 0.9, 1.1), true, i, std::move(circle), true);
      } else {
        const double ms = std::max(kMinStrokeMs, arc_length(stroke) * kMsPerUnit) / speed;
        push(ms * uniform(rng, 0.9, 1.1), true, i, stroke, false);
      }
    }
    if (i + 1 < glyphs.size()) {
      push(jittered(style.inter_char_gap_ms, kMinInterGapMs), false, i,
           {glyphs[i].back().back(), glyphs[i + 1].front().front()}, false);
    }
  }
  push(uniform(rng, 250.0, 500.0), false, glyphs.size() - 1, {glyphs.back().back().back()}, false);
  duration_ms_ = t;
}

const Trajectory::Phase* Trajectory::phase_at(double t_ms) const {
  t_ms = std::clamp(t_ms, 0.0, duration_ms_);
  auto it = std::upper_bound(phases_.begin(), phases_.end(), t_ms,
                             [](double t, const Phase& p) { return t < p.t0; });
  if (it == phases_.begin()) return &phases_.front();
  return &*(it - 1);
}

bool Trajectory::pen_down(double t_ms) const {
  if (t_ms < 0.0 || t_ms > duration_ms_) return false;
  return phase_at(t_ms)->down;
}

std::optional<std::size_t> Trajectory::stroke_char(double t_ms) const {
  if (!pen_down(t_ms)) return std::nullopt;
  return phase_at(t_ms)->char_index;
}

Point Trajectory::position(double t_ms) const {
  const Phase& ph = *phase_at(t_ms);
  if (ph.path.size() == 1) return ph.path.front();
  const double u = (std::clamp(t_ms, 0.0, duration_ms_) - ph.t0) / (ph.t1 - ph.t0);
  const double target = smoothstep(u) * ph.cum.back();
  auto it = std::lower_bound(ph.cum.begin(), ph.cum.end(), target);
  std::size_t k = static_cast<std::size_t>(it - ph.cum.begin());
  if (k == 0) return ph.path.front();
  if (k >= ph.path.size()) return ph.path.back();
  const double seg = ph.cum[k] - ph.cum[k - 1];
  const double a = seg > 0 ? (target - ph.cum[k - 1]) / seg : 0.0;
  return {ph.path[k - 1].x + a * (ph.path[k].x - ph.path[k - 1].x),
          ph.path[k - 1].y + a * (ph.path[k].y - ph.path[k - 1].y)};
}

double Trajectory::lift(double t_ms) const {
  const Phase& ph = *phase_at(t_ms);
  if (ph.down || ph.path.size() < 2) return 0.0;
  const double u = std::clamp((t_ms - ph.t0) / (ph.t1 - ph.t0), 0.0, 1.0);
  return 0.3 * std::sin(std::numbers::pi * u);
}

std::array<double, kNumChannels> Trajectory::channels(double t_ms) const {
  const double h_ms = kDiffStepS * 1000.0;
  const Point pm = position(t_ms - h_ms), p0 = position(t_ms), pp = position(t_ms + h_ms);
  const double zm = lift(t_ms - h_ms), z0 = lift(t_ms), zp = lift(t_ms + h_ms);
  const double h = kDiffStepS;
  const double vx = (pp.x - pm.x) / (2 * h), vy = (pp.y - pm.y) / (2 * h);
  const double ax = (pp.x - 2 * p0.x + pm.x) / (h * h), ay = (pp.y - 2 * p0.y + pm.y) / (h * h);
  const double az = (zp - 2 * z0 + zm) / (h * h);
  const double c = std::cos(style_.rotation), s = std::sin(style_.rotation);
  const double axr = c * ax - s * ay, ayr = s * ax + c * ay;
  const double vxr = c * vx - s * vy, vyr = s * vx + c * vy;
  const double turn = (vx * ay - vy * ax) / (vx * vx + vy * vy + 4.0);

  std::array<double, kNumChannels> ch{};
  ch[kAccFrontX] = kAccScale * axr;
  ch[kAccFrontY] = kAccScale * ayr;
  ch[kAccFrontZ] = 1.0 + kAccScale * az;
  ch[kAccRearX] = -0.5 * kAccScale * axr;
  ch[kAccRearY] = -0.5 * kAccScale * ayr;
  ch[kAccRearZ] = 0.98 + 0.5 * kAccScale * az;
  ch[kGyroX] = -kGyroScale * vyr;
  ch[kGyroY] = kGyroScale * vxr;
  ch[kGyroZ] = 0.05 * turn;
  ch[kMagX] = style_.mag_field[0];
  ch[kMagY] = style_.mag_field[1];
  ch[kMagZ] = style_.mag_field[2];
  ch[kForce] = pen_down(t_ms) ? style_.force_press : 0.0;
  return ch;
}

Recording generate_term(const WriterStyle& style, const std::string& label, Rng& rng,
                        const std::vector<int>& overrides) {
  const auto classes = decode_label(label);
  const Trajectory traj(style, classes, rng, overrides);
  std::normal_distribution<double> period(style.period_mean_ms, style.period_sd_ms);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Recording rec;
  rec.label = label;
  std::vector<std::size_t> first(classes.size(), SIZE_MAX), last(classes.size(), 0);
  double t = 0.0;
  std::int64_t delta = 0;
  for (std::int64_t idx = 0; t <= traj.duration_ms(); ++idx) {
    SensorSample smp;
    smp.index = idx;
    smp.millis_delta = delta;
    auto ch = traj.channels(t);
    for (std::size_t k = 0; k < kNumChannels; ++k) {
      double sigma = 0.0;
      if (k <= kAccRearZ) sigma = style.noise_acc;
      else if (k <= kGyroZ) sigma = style.noise_gyro;
      else if (k <= kMagZ) sigma = style.noise_mag;
      if (k == kForce) {
        const double n = style.noise_force * truncated_normal(rng, 2.0);
        ch[k] = ch[k] > 0.0 ? ch[k] + n : std::abs(n);
      } else {
        ch[k] += sigma * gauss(rng);
      }
      smp.channels[k] = quantize(ch[k]);
    }
    if (auto ci = traj.stroke_char(t)) {
      first[*ci] = std::min(first[*ci], static_cast<std::size_t>(idx));
      last[*ci] = static_cast<std::size_t>(idx);
    }
    rec.samples.push_back(smp);
    delta = std::clamp<std::int64_t>(std::llround(period(rng)), 5, 30);
    t += static_cast<double>(delta);
  }
  std::vector<Segment> truth;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (first[i] == SIZE_MAX) throw Error("character " + std::to_string(i) + " has no pen-down samples");
    truth.push_back({first[i], last[i] + 1, classes[i]});
  }
  rec.truth_segments = std::move(truth);
  return rec;
}

std::string writer_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "w%02d", index);
  return buf;
}

SyntheticCorpus generate_corpus(const GeneratorConfig& cfg) {
  if (cfg.writers < 1 || cfg.terms_per_writer < 1) throw Error("generate_corpus: counts must be positive");
  SyntheticCorpus out;
  for (int w = 0; w < cfg.writers; ++w) {
    const std::string writer = writer_name(w);
    Rng style_rng = make_rng(derive_seed(cfg.seed, "style", static_cast<std::uint64_t>(w)));
    const WriterStyle style = random_style(style_rng, cfg.ranges);
    validate(style);
    out.styles.emplace(writer, style);
    auto& recs = out.corpus[writer];
    for (int k = 0; k < cfg.terms_per_writer; ++k) {
      Rng rng = make_rng(derive_seed(cfg.seed, "term/" + writer, static_cast<std::uint64_t>(k)));
      const std::string label = sample_label(rng, cfg.min_len, cfg.max_len);
      std::vector<int> overrides;
      if (cfg.violation_rate > 0.0 && std::bernoulli_distribution(cfg.violation_rate)(rng)) {
        const auto classes = decode_label(label);
        for (CharClass c : classes) overrides.push_back(style.strokes(c));
        const auto pos = std::uniform_int_distribution<std::size_t>(0, classes.size() - 1)(rng);
        overrides[pos] = overrides[pos] < 3 ? overrides[pos] + 1 : overrides[pos] - 1;
      }
      Recording rec = generate_term(style, label, rng, overrides);
      rec.writer_id = writer;
      char id[16];
      std::snprintf(id, sizeof id, "%03d", k);
      rec.id = id;
      if (!overrides.empty()) out.violations.emplace(writer, rec.id);
      recs.push_back(std::move(rec));
    }
  }
  return out;
}

}  // namespace penseg::synth
