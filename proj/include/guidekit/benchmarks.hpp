#pragma once

// HealthBench-BR (paired true/false assertions) and PCDT-QA (open questions
// with reference answers), generated per guideline by a benchmark-generator
// backend and validated for balance and per-guideline quotas.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guidekit/corpus.hpp"
#include "guidekit/io.hpp"
#include "guidekit/llm_gateway.hpp"

namespace guidekit::bench {

using corpus::Split;

enum class Label { True, False };
enum class PerturbedDetail { Dosage, Route, Interval, Other };
enum class QuestionKind { Broad, Specific };

[[nodiscard]] std::string_view to_string(Label l) noexcept;
[[nodiscard]] std::string_view to_string(PerturbedDetail d) noexcept;
[[nodiscard]] std::string_view to_string(QuestionKind k) noexcept;
[[nodiscard]] Label parse_label(std::string_view s);
[[nodiscard]] QuestionKind parse_kind(std::string_view s);
/// Lenient: unknown names fall back to Other.
[[nodiscard]] PerturbedDetail parse_detail(std::string_view s) noexcept;

struct AssertionPair {
  std::string pair_id;
  std::string guideline_id;
  std::string true_statement;
  std::string false_statement;
  PerturbedDetail perturbed_detail = PerturbedDetail::Other;

  /// Throws Error(InvariantViolation) for empty or identical statements.
  void validate() const;
};

struct AssertionItem {
  std::string item_id;
  std::string pair_id;
  std::string guideline_id;
  Split split = Split::Train;
  std::string statement;
  Label label = Label::True;

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static AssertionItem from_json(const Json& j);
};

struct QAItem {
  std::string item_id;
  std::string guideline_id;
  Split split = Split::Train;
  std::string question;
  std::string reference_answer;
  QuestionKind kind = QuestionKind::Specific;

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static QAItem from_json(const Json& j);
};

struct SplitCounts {
  std::size_t n_guidelines = 0;
  std::size_t n_assertions = 0;
  std::size_t n_true = 0;
  std::size_t n_false = 0;
  std::size_t n_questions = 0;
  std::size_t n_broad = 0;
  std::size_t n_specific = 0;
};

struct BenchmarkManifest {
  SplitCounts train;
  SplitCounts test;
  std::string generator_model_id;
  std::uint64_t seed = 0;

  [[nodiscard]] Json to_json() const;
};

struct Quotas {
  std::size_t assertions_per_guideline = 10;
  std::size_t questions_per_guideline = 5;
};

struct GeneratorOptions {
  std::string model_id = "gpt-5.2";
  std::size_t max_output_tokens = 4096;
  std::size_t n_pairs = 5;
  std::size_t n_questions = 5;
  std::size_t n_broad = 2;  // the rest are Specific
  std::uint64_t seed = 0;
  std::size_t max_in_flight = 0;
};

/// Strict parse of "[PAIR k]" blocks with TRUE:/FALSE:/DETAIL: fields.
/// Throws UnparseableGeneration unless exactly n_pairs blocks numbered 1..n
/// are well formed, and InvariantViolation for identical statements.
[[nodiscard]] std::vector<AssertionPair> parse_assertion_pairs(std::string_view response,
                                                               std::string_view guideline_id,
                                                               std::size_t n_pairs);

/// Strict parse of "[QUESTION k]" blocks with KIND:/QUESTION:/ANSWER: fields.
/// Requires exactly n questions of which n_broad are BROAD. An empty answer
/// raises InvariantViolation.
[[nodiscard]] std::vector<QAItem> parse_qa_items(std::string_view response,
                                                 std::string_view guideline_id, Split split,
                                                 std::size_t n, std::size_t n_broad);

[[nodiscard]] llm::ChatRequest render_pairs_request(const corpus::TruncatedGuideline& g,
                                                    std::string_view tmpl,
                                                    const GeneratorOptions& opts,
                                                    std::size_t attempt = 0);
[[nodiscard]] llm::ChatRequest render_questions_request(const corpus::TruncatedGuideline& g,
                                                        std::string_view tmpl,
                                                        const GeneratorOptions& opts,
                                                        std::size_t attempt = 0);

/// A generation that fails to parse is re-requested once.
[[nodiscard]] std::vector<AssertionPair> generate_assertion_pairs(
    const corpus::TruncatedGuideline& g, const llm::Backend& backend, std::string_view tmpl,
    const GeneratorOptions& opts = {});

[[nodiscard]] std::vector<QAItem> generate_qa_items(const corpus::TruncatedGuideline& g,
                                                    Split split, const llm::Backend& backend,
                                                    std::string_view tmpl,
                                                    const GeneratorOptions& opts = {});

/// Two items per pair (ids "<pair_id>-1"/"-2", which one is true decided by
/// the seed) in a seeded global permutation.
[[nodiscard]] std::vector<AssertionItem> flatten_and_shuffle(std::span<const AssertionPair> pairs,
                                                             const corpus::SplitAssignment& split,
                                                             std::uint64_t seed);

/// Either list may be empty (its checks are skipped) but not both. Checks, in
/// order: known guidelines and unique ids, split labels, True/False balance
/// per split (ImbalancedDataset), per-guideline quotas for every guideline in
/// the split (QuotaViolation), pairing (InvariantViolation).
[[nodiscard]] BenchmarkManifest validate_benchmark(std::span<const AssertionItem> assertions,
                                                   std::span<const QAItem> questions,
                                                   const corpus::SplitAssignment& split,
                                                   const Quotas& quotas = {},
                                                   std::string generator_model_id = "",
                                                   std::uint64_t seed = 0);

struct BuildResult {
  std::vector<AssertionItem> assertions;
  std::vector<QAItem> questions;
  BenchmarkManifest manifest;
};

/// Generates both benchmarks for every guideline, re-requesting a failed
/// parse once, then flattens, shuffles and validates.
[[nodiscard]] BuildResult build_benchmarks(std::span<const corpus::TruncatedGuideline> guidelines,
                                           const corpus::SplitAssignment& split,
                                           const llm::Backend& backend,
                                           std::string_view pairs_template,
                                           std::string_view questions_template,
                                           const GeneratorOptions& opts);

[[nodiscard]] std::vector<AssertionItem> read_assertions_jsonl(const std::filesystem::path& p);
[[nodiscard]] std::vector<QAItem> read_questions_jsonl(const std::filesystem::path& p);
void write_assertions_jsonl(const std::filesystem::path& p, std::span<const AssertionItem> items);
void write_questions_jsonl(const std::filesystem::path& p, std::span<const QAItem> items);

}  // namespace guidekit::bench
