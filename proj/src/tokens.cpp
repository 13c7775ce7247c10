#include "guidekit/tokens.hpp"

#include "guidekit/utf8.hpp"

namespace guidekit {

std::size_t estimate_tokens(std::string_view text) noexcept {
  const std::size_t chars = utf8::length(text);
  return (chars * 10 + 30) / 31;
}

}  // namespace guidekit
