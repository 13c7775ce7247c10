#pragma once

// Candidate-model evaluation over both benchmarks: verdict extraction for
// true/false items, judged open answers, and accuracy/abstention/calibration
// bookkeeping.

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guidekit/benchmarks.hpp"
#include "guidekit/io.hpp"
#include "guidekit/llm_gateway.hpp"

namespace guidekit::eval {

enum class Verdict { True, False, Abstain };

[[nodiscard]] std::string_view to_string(Verdict v) noexcept;
[[nodiscard]] Verdict parse_verdict(std::string_view s);

struct VerdictAudit {
  bool both_stems = false;  // the text names both verdicts
  bool negated = false;     // the deciding stem follows a "não"

  [[nodiscard]] bool flagged() const noexcept { return both_stems || negated; }
};

struct VerdictDetail {
  Verdict verdict = Verdict::Abstain;
  VerdictAudit audit;
  std::size_t position = std::u32string::npos;  // scalar offset of the deciding stem
};

/// Case- and accent-insensitive search for the stems "verdadeir" and "fals"
/// at the start of a word; the last occurrence decides. Total: malformed
/// UTF-8 is read leniently.
[[nodiscard]] Verdict extract_verdict(std::string_view text) noexcept;
[[nodiscard]] VerdictDetail extract_verdict_detailed(std::string_view text) noexcept;

struct ModelAnswer {
  std::string item_id;
  std::string raw_text;
  std::optional<Verdict> verdict;  // set for true/false items only
  double latency_seconds = 0.0;    // informational, never serialized
  std::optional<std::string> error;
  VerdictAudit audit;

  [[nodiscard]] Json to_json() const;
  /// The verdict is re-derived from raw_text.
  [[nodiscard]] static ModelAnswer from_json(const Json& j);
};

struct EvalOptions {
  std::string model_id;
  double temperature = 0.0;  // anything else is overridden with a warning
  std::size_t max_output_tokens = 1024;
  std::optional<std::int64_t> seed;
  std::size_t max_in_flight = 0;
};

/// Turns a rendered prompt into its final form, e.g. by prepending retrieved
/// excerpts. Receives the raw query (statement or question) and the prompt.
using PromptAugmenter = std::function<std::string(std::string_view query, std::string_view prompt)>;

/// One answer per item, in item order. The template must contain
/// {statement}. Gateway failures become Abstain answers carrying the error.
[[nodiscard]] std::vector<ModelAnswer> run_assertion_eval(
    std::span<const bench::AssertionItem> items, const llm::Backend& backend,
    std::string_view prompt_template, const EvalOptions& opts,
    const PromptAugmenter& augment = {});

/// Open answers for QA items. The template must contain {question}.
[[nodiscard]] std::vector<ModelAnswer> run_qa_eval(std::span<const bench::QAItem> items,
                                                   const llm::Backend& backend,
                                                   std::string_view prompt_template,
                                                   const EvalOptions& opts,
                                                   const PromptAugmenter& augment = {});

enum class JudgeOutcome { Correct, Incorrect, Unparseable };

[[nodiscard]] std::string_view to_string(JudgeOutcome o) noexcept;
[[nodiscard]] JudgeOutcome parse_judge_outcome(std::string_view s);

struct JudgeVerdict {
  std::string item_id;
  JudgeOutcome verdict = JudgeOutcome::Unparseable;
  std::string judge_raw;
  std::optional<std::string> error;

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static JudgeVerdict from_json(const Json& j);
};

/// Last whole-word CORRECT/INCORRECT (or CORRETO/INCORRETO, CORRETA/INCORRETA),
/// case-insensitive; neither gives Unparseable.
[[nodiscard]] JudgeOutcome parse_judge_output(std::string_view text) noexcept;

struct JudgeOptions {
  std::string model_id = "gpt-4.1";
  std::size_t max_output_tokens = 512;
  std::size_t max_in_flight = 0;
};

/// The template must contain {question}, {reference} and {answer}.
[[nodiscard]] llm::ChatRequest render_judge_request(const bench::QAItem& item,
                                                    std::string_view answer_text,
                                                    std::string_view judge_template,
                                                    const JudgeOptions& opts);

/// An empty answer is Incorrect and the judge is not called. Gateway errors
/// give Unparseable.
[[nodiscard]] JudgeVerdict judge_open_answer(const bench::QAItem& item,
                                             std::string_view answer_text,
                                             const llm::Backend& judge,
                                             std::string_view judge_template,
                                             const JudgeOptions& opts = {});

/// Batch form, one verdict per item in item order. Items with no answer, or
/// whose answer carries a gateway error, are Unparseable without a judge call.
[[nodiscard]] std::vector<JudgeVerdict> judge_answers(std::span<const bench::QAItem> items,
                                                      std::span<const ModelAnswer> answers,
                                                      const llm::Backend& judge,
                                                      std::string_view judge_template,
                                                      const JudgeOptions& opts = {});

enum class AbstentionPolicy { ExcludeFromDenominator, CountAsIncorrect };

[[nodiscard]] std::string_view to_string(AbstentionPolicy p) noexcept;
[[nodiscard]] AbstentionPolicy parse_abstention_policy(std::string_view s);

struct SplitReport {
  std::size_t n_items = 0;
  std::size_t n_answered = 0;
  std::size_t n_correct = 0;
  std::size_t n_incorrect = 0;
  std::size_t n_abstained = 0;
  double accuracy_excluding = 0.0;  // correct / answered
  double accuracy_counting = 0.0;   // correct / items
  double abstention_rate = 0.0;
  std::optional<double> predicted_true_rate;  // true/false task only

  [[nodiscard]] double accuracy(AbstentionPolicy p) const noexcept {
    return p == AbstentionPolicy::ExcludeFromDenominator ? accuracy_excluding : accuracy_counting;
  }
  [[nodiscard]] Json to_json(AbstentionPolicy p) const;
  [[nodiscard]] static SplitReport from_json(const Json& j);
};

enum class Task { Assertions, OpenQA };

struct EvalReport {
  Task task = Task::Assertions;
  AbstentionPolicy policy = AbstentionPolicy::ExcludeFromDenominator;
  SplitReport train;
  SplitReport test;
  SplitReport all;

  [[nodiscard]] double accuracy(corpus::Split s) const noexcept {
    return (s == corpus::Split::Train ? train : test).accuracy(policy);
  }
  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static EvalReport from_json(const Json& j);
};

/// Items without an answer count as abstentions. Throws UnknownItem for an
/// answer naming no item and DuplicateId for two answers to one item.
[[nodiscard]] EvalReport score_assertions(std::span<const ModelAnswer> answers,
                                          std::span<const bench::AssertionItem> items,
                                          AbstentionPolicy policy =
                                              AbstentionPolicy::ExcludeFromDenominator);

/// Unparseable verdicts count as abstentions.
[[nodiscard]] EvalReport score_judgements(std::span<const JudgeVerdict> verdicts,
                                          std::span<const bench::QAItem> items,
                                          AbstentionPolicy policy =
                                              AbstentionPolicy::ExcludeFromDenominator);

struct ResultRow {
  std::string name;
  std::optional<EvalReport> assertions;
  std::optional<EvalReport> open_qa;
};

/// Fixed-width table: one row per run, Train/Test columns for each benchmark,
/// accuracies in percent under each report's own policy ("-" when absent).
[[nodiscard]] std::string format_results_table(std::span<const ResultRow> rows);

void write_answers_jsonl(const std::filesystem::path& p, std::span<const ModelAnswer> answers);
[[nodiscard]] std::vector<ModelAnswer> read_answers_jsonl(const std::filesystem::path& p);
void write_judgements_jsonl(const std::filesystem::path& p,
                            std::span<const JudgeVerdict> verdicts);
[[nodiscard]] std::vector<JudgeVerdict> read_judgements_jsonl(const std::filesystem::path& p);

}  // namespace guidekit::eval
