#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace domforge::unicode {

inline constexpr char32_t kReplacement = 0xFFFD;

struct DecodedChar {
  char32_t code_point = kReplacement;
  std::size_t length = 1;  // bytes consumed, always >= 1
  bool valid = false;
};

// Decodes the UTF-8 sequence starting at `pos`. Invalid or truncated input
// yields U+FFFD with `valid == false` and consumes exactly one byte, so
// iteration always makes progress.
DecodedChar decode_at(std::string_view text, std::size_t pos);

// Byte offset of the first invalid sequence, or nullopt for valid UTF-8.
std::optional<std::size_t> find_invalid_utf8(std::string_view text);

void append_utf8(std::string& out, char32_t code_point);

// Number of code points. Each invalid byte counts as one.
std::size_t length(std::string_view text);

// Byte offset of the `index`-th code point (text.size() for one-past-end).
std::size_t byte_offset(std::string_view text, std::size_t index);

// White_Space property.
bool is_space(char32_t cp);

// Letters, digits, letter-like numbers and combining marks. Everything that
// is neither space nor alphanumeric is treated as punctuation/symbol.
bool is_alnum(char32_t cp);

// Simple one-to-one lowercase mapping for Latin, Greek and Cyrillic.
char32_t to_lower(char32_t cp);
std::string to_lower(std::string_view text);

}  // namespace domforge::unicode
