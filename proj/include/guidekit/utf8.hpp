#pragma once

// Minimal UTF-8 support. Every length, offset and limit in the toolkit is
// measured in Unicode scalar values, never bytes.

#include <cstddef>
#include <string>
#include <string_view>

namespace guidekit::utf8 {

[[nodiscard]] bool is_valid(std::string_view bytes) noexcept;

/// Throws Error(InvalidEncoding) on malformed input.
[[nodiscard]] std::u32string decode(std::string_view bytes);
[[nodiscard]] std::string encode(std::u32string_view text);
void append(std::string& out, char32_t cp);

/// Number of scalar values. Input must be valid UTF-8.
[[nodiscard]] std::size_t length(std::string_view bytes) noexcept;

/// The first `n_chars` scalar values of `bytes` (all of it if shorter).
[[nodiscard]] std::string_view prefix(std::string_view bytes,
                                      std::size_t n_chars) noexcept;

// Simple case mapping for Latin, Greek and Cyrillic blocks.
[[nodiscard]] char32_t to_lower(char32_t cp) noexcept;

// Letters and digits of the blocks above, plus combining diacritical marks so
// decomposed accents stay inside their word.
[[nodiscard]] bool is_alnum(char32_t cp) noexcept;

[[nodiscard]] bool is_combining_mark(char32_t cp) noexcept;

/// Base letter of a lowercase Latin-1 accented letter ('ç' -> 'c'); other
/// code points are returned unchanged.
[[nodiscard]] char32_t strip_accent(char32_t cp) noexcept;

[[nodiscard]] bool is_space(char32_t cp) noexcept;

}  // namespace guidekit::utf8
