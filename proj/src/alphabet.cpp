#include "penseg/alphabet.hpp"

#include <stdexcept>

#include "penseg/errors.hpp"

namespace penseg {

namespace {

std::string describe(char32_t glyph) {
  std::string out = "unknown glyph U+";
  const char* hex = "0123456789ABCDEF";
  for (int shift = 20; shift >= 0; shift -= 4) {
    out.push_back(hex[(glyph >> shift) & 0xF]);
  }
  return out;
}

}  // namespace

UnknownGlyph::UnknownGlyph(char32_t glyph) : Error(describe(glyph)), glyph_(glyph) {}

MalformedRow::MalformedRow(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

CharClass::CharClass(int index) : index_(index) {
  if (index < 0 || index >= static_cast<int>(kNumClasses)) {
    throw std::out_of_range("class index " + std::to_string(index));
  }
}

char32_t CharClass::glyph() const noexcept { return kGlyphs[static_cast<std::size_t>(index_)]; }

std::string CharClass::utf8() const { return encode_utf8(std::u32string(1, glyph())); }

bool in_alphabet(char32_t glyph) noexcept {
  for (char32_t g : kGlyphs) {
    if (g == glyph) return true;
  }
  return false;
}

CharClass char_to_class(char32_t glyph) {
  for (std::size_t i = 0; i < kGlyphs.size(); ++i) {
    if (kGlyphs[i] == glyph) return CharClass(static_cast<int>(i));
  }
  throw UnknownGlyph(glyph);
}

std::array<double, kNumClasses> one_hot(CharClass c) {
  std::array<double, kNumClasses> v{};
  v[static_cast<std::size_t>(c.index())] = 1.0;
  return v;
}

std::u32string decode_utf8(std::string_view text) {
  std::u32string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    char32_t cp = 0;
    if (lead < 0x80) {
      cp = lead;
    } else if ((lead & 0xE0) == 0xC0) {
      cp = lead & 0x1F;
      extra = 1;
    } else if ((lead & 0xF0) == 0xE0) {
      cp = lead & 0x0F;
      extra = 2;
    } else if ((lead & 0xF8) == 0xF0) {
      cp = lead & 0x07;
      extra = 3;
    } else {
      throw Error("invalid UTF-8 lead byte at offset " + std::to_string(i));
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      if (i + k >= text.size()) throw Error("truncated UTF-8 sequence at offset " + std::to_string(i));
      const auto cont = static_cast<unsigned char>(text[i + k]);
      if ((cont & 0xC0) != 0x80) throw Error("invalid UTF-8 continuation at offset " + std::to_string(i + k));
      cp = (cp << 6) | (cont & 0x3F);
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode_utf8(std::u32string_view text) {
  std::string out;
  for (char32_t cp : text) {
    if (cp < 0x80) {
      out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
      out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
      out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
      out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
      out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
  }
  return out;
}

std::vector<CharClass> decode_label(std::string_view utf8_label) {
  std::vector<CharClass> out;
  for (char32_t cp : decode_utf8(utf8_label)) out.push_back(char_to_class(cp));
  return out;
}

std::string encode_label(const std::vector<CharClass>& classes) {
  std::u32string text;
  for (CharClass c : classes) text.push_back(c.glyph());
  return encode_utf8(text);
}

}  // namespace penseg
