#include "guidekit/utf8.hpp"

#include "guidekit/error.hpp"

namespace guidekit::utf8 {

namespace {

// Returns the sequence length starting at `i`, or 0 if malformed.
std::size_t sequence_length(std::string_view s, std::size_t i,
                            char32_t& cp) noexcept {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    cp = b0;
    return 1;
  }
  std::size_t len = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2;
    cp = b0 & 0x1F;
    min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3;
    cp = b0 & 0x0F;
    min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4;
    cp = b0 & 0x07;
    min = 0x10000;
  } else {
    return 0;
  }
  if (i + len > s.size()) return 0;
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) return 0;
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return 0;
  return len;
}

}  // namespace

bool is_valid(std::string_view bytes) noexcept {
  std::size_t i = 0;
  char32_t cp = 0;
  while (i < bytes.size()) {
    const auto n = sequence_length(bytes, i, cp);
    if (n == 0) return false;
    i += n;
  }
  return true;
}

std::u32string decode(std::string_view bytes) {
  std::u32string out;
  out.reserve(bytes.size());
  std::size_t i = 0;
  char32_t cp = 0;
  while (i < bytes.size()) {
    const auto n = sequence_length(bytes, i, cp);
    if (n == 0) {
      throw Error(ErrorCode::InvalidEncoding,
                  "invalid UTF-8 at byte offset " + std::to_string(i));
    }
    out.push_back(cp);
    i += n;
  }
  return out;
}

void append(std::string& out, char32_t cp) {
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

std::string encode(std::u32string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char32_t cp : text) append(out, cp);
  return out;
}

std::size_t length(std::string_view bytes) noexcept {
  std::size_t n = 0;
  for (char c : bytes) {
    if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
  }
  return n;
}

std::string_view prefix(std::string_view bytes, std::size_t n_chars) noexcept {
  std::size_t seen = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    if ((static_cast<unsigned char>(bytes[i]) & 0xC0) != 0x80) {
      if (seen == n_chars) return bytes.substr(0, i);
      ++seen;
    }
  }
  return bytes;
}

char32_t to_lower(char32_t cp) noexcept {
  if (cp >= U'A' && cp <= U'Z') return cp + 0x20;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 0x20;
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
  return cp;
}

bool is_combining_mark(char32_t cp) noexcept {
  return cp >= 0x300 && cp <= 0x36F;
}

bool is_alnum(char32_t cp) noexcept {
  if (cp < 0x80) {
    return (cp >= U'0' && cp <= U'9') || (cp >= U'a' && cp <= U'z') ||
           (cp >= U'A' && cp <= U'Z');
  }
  if (cp == 0xAA || cp == 0xB5 || cp == 0xBA) return true;
  if (cp >= 0xC0 && cp <= 0xFF) return cp != 0xD7 && cp != 0xF7;
  if (cp >= 0x100 && cp <= 0x24F) return true;
  if (is_combining_mark(cp)) return true;
  if (cp >= 0x370 && cp <= 0x3FF) return cp != 0x37E && cp != 0x387;
  if (cp >= 0x400 && cp <= 0x4FF) return true;
  return false;
}

char32_t strip_accent(char32_t cp) noexcept {
  if (cp < 0xE0 || cp > 0xFF) return cp;
  static constexpr char32_t kBase[32] = {
      U'a', U'a', U'a', U'a', U'a', U'a', U'æ', U'c',   // e0-e7
      U'e', U'e', U'e', U'e', U'i', U'i', U'i', U'i',   // e8-ef
      U'ð', U'n', U'o', U'o', U'o', U'o', U'o', U'÷',   // f0-f7
      U'ø', U'u', U'u', U'u', U'u', U'y', U'þ', U'y'};  // f8-ff
  return kBase[cp - 0xE0];
}

bool is_space(char32_t cp) noexcept {
  return cp == U' ' || cp == U'\t' || cp == U'\n' || cp == U'\r' ||
         cp == U'\v' || cp == U'\f' || cp == 0xA0 || cp == 0x2028 ||
         cp == 0x2029 || (cp >= 0x2000 && cp <= 0x200A) || cp == 0x3000;
}

}  // namespace guidekit::utf8
