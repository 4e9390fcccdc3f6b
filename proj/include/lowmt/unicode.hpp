#pragma once

#include <string>
#include <string_view>

// Thin wrappers over ICU. All text in the toolkit travels as UTF-8
// std::string; code-point level work uses std::u32string.
namespace lowmt::unicode {

bool is_valid_utf8(std::string_view text);

// Throws Error(encoding) on malformed input.
std::u32string to_u32(std::string_view utf8);
std::string to_utf8(std::u32string_view text);
std::string to_utf8(char32_t c);

bool is_whitespace(char32_t c);
// Any code point in a Unicode punctuation general category (Pc Pd Ps Pe Pi Pf Po).
bool is_punctuation(char32_t c);

std::string casefold(std::string_view utf8);
std::string nfc(std::string_view utf8);

std::size_t length(std::string_view utf8);

}  // namespace lowmt::unicode
