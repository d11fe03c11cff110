#include "rasr/unicode.hpp"

#include <unicode/normalizer2.h>
#include <unicode/unistr.h>

#include "rasr/errors.hpp"

namespace rasr::unicode {

namespace {

// Returns the scalar at p and advances p. `end` is the end of the buffer.
char32_t decode_one(const unsigned char*& p, const unsigned char* end) {
  const unsigned char b0 = *p++;
  if (b0 < 0x80) return b0;

  int extra;
  char32_t cp;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    throw EncodingError("invalid UTF-8 lead byte");
  }
  if (end - p < extra) throw EncodingError("truncated UTF-8 sequence");
  for (int i = 0; i < extra; ++i) {
    const unsigned char b = *p++;
    if ((b & 0xC0) != 0x80) throw EncodingError("invalid UTF-8 continuation byte");
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t kMinByLen[4] = {0, 0x80, 0x800, 0x10000};
  if (cp < kMinByLen[extra]) throw EncodingError("overlong UTF-8 encoding");
  if (cp >= 0xD800 && cp <= 0xDFFF) throw EncodingError("surrogate code point in UTF-8");
  if (cp > 0x10FFFF) throw EncodingError("code point out of range");
  return cp;
}

void encode_one(char32_t cp, std::string& out) {
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

}  // namespace

std::u32string decode_utf8(std::string_view utf8) {
  std::u32string out;
  out.reserve(utf8.size());
  const auto* p = reinterpret_cast<const unsigned char*>(utf8.data());
  const auto* end = p + utf8.size();
  while (p < end) out.push_back(decode_one(p, end));
  return out;
}

std::string encode_utf8(std::u32string_view scalars) {
  std::string out;
  out.reserve(scalars.size());
  for (char32_t cp : scalars) encode_one(cp, out);
  return out;
}

std::size_t scalar_count(std::string_view utf8) {
  std::size_t n = 0;
  const auto* p = reinterpret_cast<const unsigned char*>(utf8.data());
  const auto* end = p + utf8.size();
  while (p < end) {
    decode_one(p, end);
    ++n;
  }
  return n;
}

std::string scalar_prefix(std::string_view utf8, std::size_t n) {
  const auto* begin = reinterpret_cast<const unsigned char*>(utf8.data());
  const auto* end = begin + utf8.size();
  const auto* p = begin;
  std::size_t seen = 0;
  while (p < end && seen < n) {
    decode_one(p, end);
    ++seen;
  }
  return std::string(utf8.substr(0, static_cast<std::size_t>(
                                        p - begin)));
}

std::string scalar_substr(std::string_view utf8, std::size_t begin, std::size_t end) {
  if (end < begin) throw Error("scalar_substr: end < begin");
  const auto* base = reinterpret_cast<const unsigned char*>(utf8.data());
  const auto* stop = base + utf8.size();
  const auto* p = base;
  std::size_t seen = 0;
  while (p < stop && seen < begin) {
    decode_one(p, stop);
    ++seen;
  }
  const auto* from = p;
  while (p < stop && seen < end) {
    decode_one(p, stop);
    ++seen;
  }
  return std::string(reinterpret_cast<const char*>(from),
                     static_cast<std::size_t>(p - from));
}

std::string nfkc(std::string_view utf8) {
  UErrorCode ec = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(ec);
  if (U_FAILURE(ec)) throw Error("ICU NFKC instance unavailable");

  // Validate first: ICU silently substitutes malformed input.
  decode_utf8(utf8);

  icu::UnicodeString in = icu::UnicodeString::fromUTF8(
      icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size())));
  icu::UnicodeString normalized = norm->normalize(in, ec);
  if (U_FAILURE(ec)) throw Error("ICU NFKC normalization failed");
  std::string out;
  normalized.toUTF8String(out);
  return out;
}

bool is_whitespace(char32_t cp) {
  switch (cp) {
    case 0x09:
    case 0x0A:
    case 0x0B:
    case 0x0C:
    case 0x0D:
    case 0x20:
    case 0x85:
    case 0xA0:
    case 0x1680:
    case 0x2028:
    case 0x2029:
    case 0x202F:
    case 0x205F:
    case 0x3000:
      return true;
    default:
      return (cp >= 0x2000 && cp <= 0x200A);
  }
}

std::string collapse_whitespace(std::string_view utf8) {
  std::u32string scalars = decode_utf8(utf8);
  std::string out;
  out.reserve(utf8.size());
  bool pending_sep = false;
  bool emitted_any = false;
  for (char32_t cp : scalars) {
    if (is_whitespace(cp)) {
      pending_sep = emitted_any;
      continue;
    }
    if (pending_sep) {
      out.push_back(' ');
      pending_sep = false;
    }
    encode_one(cp, out);
    emitted_any = true;
  }
  return out;
}

}  // namespace rasr::unicode
