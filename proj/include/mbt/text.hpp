#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace mbt::text {

constexpr bool is_space(char c) noexcept {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

std::string_view trim(std::string_view s) noexcept;

/// Collapses every run of whitespace to one space and trims both ends.
std::string collapse_whitespace(std::string_view s);

/// Number of UTF-8 code points (every byte that is not a continuation byte).
std::size_t utf8_length(std::string_view s) noexcept;

/// Largest index <= n that does not split a UTF-8 sequence.
std::size_t utf8_floor(std::string_view s, std::size_t n) noexcept;

std::string to_lower_ascii(std::string_view s);

}  // namespace mbt::text
