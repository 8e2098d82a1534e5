#include "penseg/recording.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "penseg/errors.hpp"

namespace penseg {

namespace fs = std::filesystem;

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  field = trim(field);
  if (field.empty()) return false;
  const char* first = field.data();
  if (*first == '+') ++first;
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

}  // namespace

std::vector<std::int64_t> Recording::absolute_millis() const {
  std::vector<std::int64_t> t(samples.size());
  std::int64_t acc = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (i > 0) acc += samples[i].millis_delta;
    t[i] = acc;
  }
  return t;
}

Recording parse_recording(std::istream& in, std::string writer_id, std::string id) {
  Recording rec;
  rec.writer_id = std::move(writer_id);
  rec.id = std::move(id);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    if (!header_seen) {
      if (view != kCsvHeader) throw MalformedRow(line_no, "expected header '" + std::string(kCsvHeader) + "'");
      header_seen = true;
      continue;
    }
    const auto fields = split_fields(view, ',');
    if (fields.size() != kNumChannels + 2) {
      throw MalformedRow(line_no, "expected " + std::to_string(kNumChannels + 2) + " columns, got " +
                                      std::to_string(fields.size()));
    }
    SensorSample s;
    if (!parse_number(fields[0], s.index)) throw MalformedRow(line_no, "non-numeric index");
    if (!parse_number(fields[1], s.millis_delta) || s.millis_delta < 0) {
      throw MalformedRow(line_no, "millis_delta must be a non-negative integer");
    }
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      if (!parse_number(fields[c + 2], s.channels[c])) {
        throw MalformedRow(line_no, "non-numeric value in column " + std::to_string(c + 3));
      }
    }
    if (rec.samples.empty()) s.millis_delta = 0;
    rec.samples.push_back(s);
  }
  if (!header_seen) throw MalformedRow(1, "missing header");
  if (rec.samples.empty()) throw EmptyRecording();
  return rec;
}

void emit_recording(std::ostream& out, const Recording& rec) {
  out << kCsvHeader << '\n';
  char buf[64];
  for (const auto& s : rec.samples) {
    out << s.index << ',' << s.millis_delta;
    for (double v : s.channels) {
      std::snprintf(buf, sizeof buf, ",%.6f", v);
      out << buf;
    }
    out << '\n';
  }
}

void validate(const Recording& rec) {
  if (rec.samples.empty()) throw EmptyRecording();
  if (rec.samples.front().millis_delta != 0) throw Error("first millis_delta must be 0");
  for (const auto& s : rec.samples) {
    if (s.millis_delta < 0) throw Error("negative millis_delta");
    if (s.channels[kForce] < 0) throw Error("negative force");
  }
  std::vector<CharClass> classes;
  if (rec.label) {
    classes = decode_label(*rec.label);
    if (classes.empty() || classes.size() > 20) throw Error("label length must be in [1, 20]");
  }
  if (rec.truth_segments) {
    if (!rec.label) throw Error("truth segments without label");
    const auto& segs = *rec.truth_segments;
    if (segs.size() != classes.size()) throw Error("truth segment count differs from label length");
    std::size_t prev_end = 0;
    for (std::size_t i = 0; i < segs.size(); ++i) {
      const auto& sg = segs[i];
      if (sg.start >= sg.end || sg.end > rec.samples.size()) throw Error("truth segment out of range");
      if (i > 0 && sg.start < prev_end) throw Error("truth segments overlap or are unordered");
      if (sg.label && *sg.label != classes[i]) throw Error("truth segment glyph differs from label");
      prev_end = sg.end;
    }
  }
}

std::vector<Segment> parse_segments_tsv(std::istream& in) {
  std::vector<Segment> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, '\t');
    if (fields.size() != 3) throw MalformedRow(line_no, "expected start<TAB>end<TAB>glyph");
    Segment s;
    if (!parse_number(fields[0], s.start) || !parse_number(fields[1], s.end) || s.start >= s.end) {
      throw MalformedRow(line_no, "bad segment bounds");
    }
    const auto glyph = decode_utf8(trim(fields[2]));
    if (glyph.size() != 1) throw MalformedRow(line_no, "expected a single glyph");
    s.label = char_to_class(glyph[0]);
    out.push_back(s);
  }
  return out;
}

void emit_segments_tsv(std::ostream& out, const std::vector<Segment>& segments) {
  for (const auto& s : segments) {
    out << s.start << '\t' << s.end << '\t' << (s.label ? s.label->utf8() : std::string("?")) << '\n';
  }
}

namespace {

std::map<std::string, std::string> read_labels(const fs::path& file) {
  std::map<std::string, std::string> labels;
  std::ifstream in(file);
  if (!in) throw CorpusError(file.string(), "cannot open");
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_fields(view, '\t');
    if (fields.size() != 2) {
      throw CorpusError(file.string(), MalformedRow(line_no, "expected id<TAB>label").what());
    }
    labels.emplace(std::string(trim(fields[0])), std::string(trim(fields[1])));
  }
  return labels;
}

}  // namespace

Corpus load_corpus(const fs::path& root) {
  Corpus corpus;
  if (!fs::exists(root)) throw CorpusError(root.string(), "corpus root does not exist");
  std::vector<fs::path> writer_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) writer_dirs.push_back(entry.path());
  }
  std::sort(writer_dirs.begin(), writer_dirs.end());
  for (const auto& dir : writer_dirs) {
    const std::string writer = dir.filename().string();
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
      const auto& p = entry.path();
      if (entry.is_regular_file() && p.extension() == ".csv") files.push_back(p);
    }
    std::sort(files.begin(), files.end());
    std::map<std::string, std::string> labels;
    if (fs::exists(dir / "labels.tsv")) labels = read_labels(dir / "labels.tsv");
    auto& recs = corpus[writer];
    for (const auto& file : files) {
      const std::string stem = file.stem().string();
      try {
        std::ifstream in(file);
        if (!in) throw Error("cannot open");
        Recording rec = parse_recording(in, writer, stem);
        if (auto it = labels.find(stem); it != labels.end()) rec.label = it->second;
        const auto truth = dir / (stem + ".truth.tsv");
        if (fs::exists(truth)) {
          std::ifstream tin(truth);
          rec.truth_segments = parse_segments_tsv(tin);
        }
        validate(rec);
        recs.push_back(std::move(rec));
      } catch (const CorpusError&) {
        throw;
      } catch (const std::exception& e) {
        throw CorpusError(file.string(), e.what());
      }
    }
  }
  return corpus;
}

void write_corpus(const fs::path& root, const Corpus& corpus) {
  for (const auto& [writer, recs] : corpus) {
    const auto dir = root / writer;
    fs::create_directories(dir);
    std::ofstream labels(dir / "labels.tsv");
    for (const auto& rec : recs) {
      std::ofstream out(dir / (rec.id + ".csv"));
      emit_recording(out, rec);
      if (rec.label) labels << rec.id << '\t' << *rec.label << '\n';
      if (rec.truth_segments) {
        std::ofstream tout(dir / (rec.id + ".truth.tsv"));
        emit_segments_tsv(tout, *rec.truth_segments);
      }
    }
  }
}

}  // namespace penseg
