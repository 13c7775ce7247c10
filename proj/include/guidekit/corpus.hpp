#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guidekit/io.hpp"
#include "guidekit/tokens.hpp"

namespace guidekit::corpus {

inline constexpr std::size_t kDefaultTruncationLimit = 120'000;

enum class Category {
  PCDT,
  ProtocolOfUse,
  OncologyGuideline,
  NationalGuideline,
  CarePathway,
};

enum class Split { Train, Test };

[[nodiscard]] std::string_view to_string(Category c) noexcept;
[[nodiscard]] std::string_view to_string(Split s) noexcept;
/// Case-insensitive; throws Error(UnknownCategory).
[[nodiscard]] Category parse_category(std::string_view name);
/// Accepts "train" / "test" in any case; throws Error(Parse).
[[nodiscard]] Split parse_split(std::string_view name);

struct Guideline {
  std::string id;
  std::string title;
  Category category = Category::PCDT;
  std::string raw_text;
  std::size_t char_count = 0;  // scalar values in raw_text
};

struct TruncatedGuideline {
  std::string id;
  std::string text;
  bool was_truncated = false;
};

using SplitMap = std::map<std::string, Split, std::less<>>;

class SplitAssignment {
 public:
  SplitAssignment() = default;
  SplitAssignment(SplitMap assignment, std::uint64_t seed)
      : assignment_(std::move(assignment)), seed_(seed) {}

  /// Throws Error(UnknownGuideline).
  [[nodiscard]] Split at(std::string_view guideline_id) const;
  [[nodiscard]] bool contains(std::string_view guideline_id) const;
  [[nodiscard]] std::size_t count(Split s) const;
  [[nodiscard]] std::vector<std::string> ids(Split s) const;
  [[nodiscard]] std::size_t size() const noexcept { return assignment_.size(); }
  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] const SplitMap& entries() const noexcept {
    return assignment_;
  }

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static SplitAssignment from_json(const Json& j);

 private:
  SplitMap assignment_;
  std::uint64_t seed_ = 0;
};

struct CharSummary {
  std::size_t min = 0;
  double median = 0.0;
  std::size_t max = 0;
};

struct CorpusStats {
  std::size_t n_guidelines = 0;
  std::size_t n_truncated = 0;
  std::size_t total_chars_raw = 0;
  std::size_t total_chars_truncated = 0;
  CharSummary raw_chars;
  CharSummary truncated_chars;
  std::size_t estimated_tokens = 0;  // over the truncated texts

  [[nodiscard]] Json to_json() const;
};

/// Manifest is JSONL with fields id, title, category, file (relative to
/// `directory`). Guidelines come back in manifest order.
[[nodiscard]] std::vector<Guideline> ingest_corpus(
    const std::filesystem::path& directory,
    const std::filesystem::path& manifest);

/// Builds a validated Guideline from in-memory text.
[[nodiscard]] Guideline make_guideline(std::string id, std::string title,
                                       Category category, std::string raw_text);

[[nodiscard]] TruncatedGuideline truncate_guideline(
    const Guideline& g, std::size_t limit = kDefaultTruncationLimit);

/// Sorts ids, shuffles them with SplitMix64(seed) and assigns the first
/// ceil(n/2) to Train.
[[nodiscard]] SplitAssignment assign_splits(std::vector<std::string> ids,
                                            std::uint64_t seed);
[[nodiscard]] SplitAssignment assign_splits(std::span<const Guideline> guidelines,
                                            std::uint64_t seed);

[[nodiscard]] CorpusStats corpus_stats(
    std::span<const Guideline> guidelines,
    std::span<const TruncatedGuideline> truncated,
    const TokenEstimator& estimator = default_token_estimator());

/// One guidelines.jsonl record: id, title, category, split, was_truncated,
/// char_count, text.
[[nodiscard]] Json guideline_record(const Guideline& g,
                                    const TruncatedGuideline& t, Split split);

/// What later stages need back from guidelines.jsonl.
struct CorpusRecord {
  TruncatedGuideline guideline;
  Category category = Category::PCDT;
  Split split = Split::Train;
};

[[nodiscard]] std::vector<CorpusRecord> read_guidelines_jsonl(
    const std::filesystem::path& path);

}  // namespace guidekit::corpus
