#pragma once

// Trainer-ready artifacts: packed CPT sequences, loss-masked SFT examples,
// replay mixing, GRPO rewards/advantages and exported hyperparameters.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "guidekit/benchmarks.hpp"
#include "guidekit/corpus.hpp"
#include "guidekit/io.hpp"
#include "guidekit/llm_gateway.hpp"
#include "guidekit/synthgen.hpp"

namespace guidekit::train {

using TokenId = std::uint32_t;

class Tokenizer {
 public:
  virtual ~Tokenizer() = default;
  [[nodiscard]] virtual std::vector<TokenId> encode(std::string_view text) const = 0;
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Splits on whitespace; a word's id is its FNV-1a hash modulo 2^24.
class WhitespaceTokenizer final : public Tokenizer {
 public:
  [[nodiscard]] std::vector<TokenId> encode(std::string_view text) const override;
  [[nodiscard]] std::string name() const override { return "whitespace"; }
};

/// One vocabulary entry per line, id = line number (0-based). Each
/// whitespace-separated word is split greedily into the longest known
/// prefixes; a character with no entry maps to the "[UNK]" id, or to the
/// vocabulary size when the file has none.
class VocabTokenizer final : public Tokenizer {
 public:
  explicit VocabTokenizer(std::vector<std::string> vocab);
  [[nodiscard]] static VocabTokenizer load(const std::filesystem::path& path);

  [[nodiscard]] std::vector<TokenId> encode(std::string_view text) const override;
  [[nodiscard]] std::string name() const override { return "vocab"; }
  [[nodiscard]] std::size_t size() const noexcept { return vocab_size_; }

 private:
  std::unordered_map<std::string, TokenId> ids_;
  std::size_t vocab_size_ = 0;
  std::size_t max_piece_chars_ = 1;
  TokenId unk_ = 0;
};

/// Whitespace unless a vocabulary file is given.
[[nodiscard]] std::unique_ptr<Tokenizer> make_tokenizer(
    const std::optional<std::filesystem::path>& vocab_file);

/// A plain training document; domain corpora and replay pools use it.
struct TextDoc {
  std::string key;
  std::string text;
  std::string source;  // "domain" or "replay"

  [[nodiscard]] Json to_json() const;
  /// Accepts {"key"|"id", "text", "source"?}.
  [[nodiscard]] static TextDoc from_json(const Json& j, std::string_view default_source);
};

[[nodiscard]] std::vector<TextDoc> to_text_docs(std::span<const synth::SyntheticDoc> docs);

struct PackedSequence {
  std::string key;
  std::vector<TokenId> token_ids;
  std::vector<bool> loss_mask;

  [[nodiscard]] Json to_json() const;
};

constexpr std::size_t kCptMaxLength = 4096;

/// One sequence per doc in key order, truncated at max_len, all-true mask.
/// Throws EmptyDocument for a doc with no tokens.
[[nodiscard]] std::vector<PackedSequence> pack_cpt_dataset(std::span<const TextDoc> docs,
                                                           const Tokenizer& tokenizer,
                                                           std::size_t max_len = kCptMaxLength);

struct SftExample {
  std::string item_id;
  std::string user;
  std::string assistant;
  std::vector<TokenId> token_ids;
  std::vector<bool> loss_mask;  // true exactly over the assistant tokens

  [[nodiscard]] Json to_json() const;
};

/// Throws InvalidArgument when either side tokenizes to nothing.
[[nodiscard]] SftExample make_sft_example(std::string item_id, std::string user,
                                          std::string assistant, const Tokenizer& tokenizer);

/// Throws LeakageViolation naming the first item that is labelled Test or
/// whose guideline is Test in `split`.
void ensure_train_only(std::span<const bench::AssertionItem> items,
                       const corpus::SplitAssignment& split, std::string_view stage);

struct SftOptions {
  std::string teacher_model_id = "gpt-5.2";
  std::size_t max_output_tokens = 1024;
  std::size_t max_in_flight = 0;
};

/// The teacher sees the source guideline and the statement; the example's
/// user turn is the student prompt without the guideline. Guarded by
/// ensure_train_only before any request is sent. Teacher failures raise
/// BackendError after the batch.
[[nodiscard]] std::vector<SftExample> build_sft_dataset(
    std::span<const bench::AssertionItem> items, const corpus::SplitAssignment& split,
    std::span<const corpus::TruncatedGuideline> guidelines, const llm::Backend& teacher,
    std::string_view teacher_template, std::string_view student_template,
    const Tokenizer& tokenizer, const SftOptions& opts = {});

/// floor(fraction * n_domain / (1 - fraction)), guarded against rounding.
[[nodiscard]] std::size_t replay_count(std::size_t n_domain, double fraction);

/// All domain docs plus a seeded sample of replay docs so that `fraction` of
/// the output is replay, interleaved by a seeded shuffle. Throws
/// InvalidArgument unless 0 <= fraction < 1, InsufficientReplay when the
/// pool is too small.
[[nodiscard]] std::vector<TextDoc> mix_replay(std::span<const TextDoc> domain,
                                              std::span<const TextDoc> replay, double fraction,
                                              std::uint64_t seed);

struct RewardSpec {
  std::size_t min_reasoning_words = 50;
  double correct_reward = 1.0;
  double incorrect_reward = 0.0;

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static RewardSpec from_json(const Json& j);
};

/// Whitespace-separated words, minus the one verdict word when a verdict is
/// found.
[[nodiscard]] std::size_t reasoning_words(std::string_view completion) noexcept;

[[nodiscard]] double compute_reward(std::string_view completion, bench::Label gold,
                                    const RewardSpec& spec = {}) noexcept;

constexpr double kAdvantageEpsilon = 1e-8;

/// (r - mean) / (population std + 1e-8); exactly zero when all rewards are
/// equal. Throws InvalidArgument for fewer than two rewards.
[[nodiscard]] std::vector<double> compute_group_advantages(std::span<const double> rewards);

struct RolloutGroup {
  std::string prompt_id;
  bench::Label gold_label = bench::Label::True;
  std::string prompt;
  std::vector<std::string> completions;
  std::vector<bool> errored;
  std::vector<double> rewards;
  std::vector<double> advantages;

  [[nodiscard]] Json to_json() const;
};

struct RolloutOptions {
  std::string model_id;
  std::size_t group_size = 16;
  std::size_t max_completion_tokens = 512;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  RewardSpec reward;
  std::size_t max_in_flight = 0;
};

/// group_size sampled completions per item (seeded per completion), scored
/// and normalized per group. Errored completions score 0 and are flagged.
/// Guarded by ensure_train_only.
[[nodiscard]] std::vector<RolloutGroup> build_rollout_groups(
    std::span<const bench::AssertionItem> items, const corpus::SplitAssignment& split,
    const llm::Backend& policy, std::string_view prompt_template, const RolloutOptions& opts);

enum class Stage { CPT, SFT, GRPO };

[[nodiscard]] std::string_view to_string(Stage s) noexcept;
[[nodiscard]] Stage parse_stage(std::string_view s);

struct TrainingConfig {
  Stage stage = Stage::CPT;
  Json params;

  [[nodiscard]] Json to_json() const;
};

[[nodiscard]] TrainingConfig export_training_config(Stage stage, const RewardSpec& reward = {});

void write_packed_jsonl(const std::filesystem::path& p, std::span<const PackedSequence> seqs);
void write_sft_jsonl(const std::filesystem::path& p, std::span<const SftExample> examples);
void write_rollouts_jsonl(const std::filesystem::path& p, std::span<const RolloutGroup> groups);
void write_text_docs_jsonl(const std::filesystem::path& p, std::span<const TextDoc> docs);
[[nodiscard]] std::vector<TextDoc> read_text_docs_jsonl(const std::filesystem::path& p,
                                                        std::string_view default_source);

}  // namespace guidekit::train
