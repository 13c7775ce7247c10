#include "guidekit/random.hpp"

#include <cstdio>

namespace guidekit {

std::uint64_t fnv1a64(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : bytes) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(value));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t root, std::string_view stage) noexcept {
  std::string key = std::to_string(root);
  key.push_back(':');
  key.append(stage);
  SplitMix64 rng(fnv1a64(key));
  return rng.next();
}

}  // namespace guidekit
