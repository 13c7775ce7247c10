#pragma once

#include <cstddef>
#include <functional>
#include <string_view>

namespace guidekit {

/// Maps a text to an estimated token count. Stages take one of these so a
/// model-specific tokenizer can replace the default.
using TokenEstimator = std::function<std::size_t(std::string_view)>;

/// ceil(chars / 3.1), computed exactly in integers as ceil(10 * chars / 31).
/// 3.1 characters per token maps 16.6M characters to about 5.4M tokens.
[[nodiscard]] std::size_t estimate_tokens(std::string_view text) noexcept;

[[nodiscard]] inline TokenEstimator default_token_estimator() {
  return [](std::string_view text) { return estimate_tokens(text); };
}

}  // namespace guidekit
