#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace penseg {

inline constexpr std::size_t kNumClasses = 15;

/// One of the 15 glyph classes: digits 0-9 then + - · : =.
class CharClass {
 public:
  constexpr CharClass() = default;
  /// Throws std::out_of_range unless index < kNumClasses.
  explicit CharClass(int index);

  constexpr int index() const noexcept { return index_; }
  char32_t glyph() const noexcept;
  /// UTF-8 encoding of the glyph.
  std::string utf8() const;

  friend constexpr bool operator==(CharClass, CharClass) = default;
  friend constexpr auto operator<=>(CharClass, CharClass) = default;

 private:
  int index_ = 0;
};

/// Glyphs ordered by class index.
inline constexpr std::array<char32_t, kNumClasses> kGlyphs = {
    U'0', U'1', U'2', U'3', U'4', U'5', U'6', U'7',
    U'8', U'9', U'+', U'-', U'·', U':', U'='};

/// Throws UnknownGlyph for characters outside the alphabet.
CharClass char_to_class(char32_t glyph);
bool in_alphabet(char32_t glyph) noexcept;

std::array<double, kNumClasses> one_hot(CharClass c);

/// Decodes UTF-8. Throws Error on invalid byte sequences.
std::u32string decode_utf8(std::string_view text);
std::string encode_utf8(std::u32string_view text);

/// Label string to class sequence; throws UnknownGlyph.
std::vector<CharClass> decode_label(std::string_view utf8_label);
std::string encode_label(const std::vector<CharClass>& classes);

}  // namespace penseg
