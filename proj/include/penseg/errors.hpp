#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace penseg {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownGlyph : public Error {
 public:
  explicit UnknownGlyph(char32_t glyph);
  char32_t glyph() const noexcept { return glyph_; }

 private:
  char32_t glyph_;
};

class MalformedRow : public Error {
 public:
  MalformedRow(std::size_t line, const std::string& what);
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyRecording : public Error {
 public:
  EmptyRecording() : Error("recording has no samples") {}
};

/// Wraps a parse failure with the path of the offending file.
class CorpusError : public Error {
 public:
  CorpusError(const std::string& path, const std::string& what)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

class TooShort : public Error {
 public:
  TooShort() : Error("resampling needs at least two samples") {}
};

class NonMonotonicTime : public Error {
 public:
  explicit NonMonotonicTime(std::size_t index)
      : Error("timestamps not strictly increasing at sample " + std::to_string(index)) {}
};

class NoEvidence : public Error {
 public:
  explicit NoEvidence(const std::string& writer)
      : Error("no stroke-count evidence for writer '" + writer + "'") {}
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class Diverged : public Error {
 public:
  explicit Diverged(std::size_t epoch)
      : Error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)) {}
};

class DegenerateData : public Error {
 public:
  using Error::Error;
};

class NoWindows : public Error {
 public:
  NoWindows() : Error("segment produced no windows") {}
};

class NoAdaptationWindows : public Error {
 public:
  NoAdaptationWindows() : Error("none of the adaptation terms produced usable windows") {}
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace penseg
