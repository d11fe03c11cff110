#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace rasr::unicode {

/// Decodes UTF-8 into Unicode scalar values. Throws EncodingError on
/// malformed sequences (overlong encodings, surrogates, truncation).
std::u32string decode_utf8(std::string_view utf8);

std::string encode_utf8(std::u32string_view scalars);

/// Number of Unicode scalar values in a UTF-8 string.
std::size_t scalar_count(std::string_view utf8);

/// First min(n, length) scalar values, returned as UTF-8.
std::string scalar_prefix(std::string_view utf8, std::size_t n);

/// Substring by scalar offsets [begin, end), returned as UTF-8.
std::string scalar_substr(std::string_view utf8, std::size_t begin, std::size_t end);

/// NFKC normalization (ICU-backed).
std::string nfkc(std::string_view utf8);

/// White_Space property, per the Unicode character database.
bool is_whitespace(char32_t cp);

/// Collapses runs of whitespace scalars to a single U+0020 and strips
/// leading/trailing whitespace.
std::string collapse_whitespace(std::string_view utf8);

}  // namespace rasr::unicode
