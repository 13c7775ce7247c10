#pragma once

// Synthetic training corpus: a plan of (guideline, generator, format, sample)
// tasks, its execution against generator backends, the leakage check, and
// document/token accounting.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "guidekit/corpus.hpp"
#include "guidekit/io.hpp"
#include "guidekit/llm_gateway.hpp"
#include "guidekit/prompts.hpp"
#include "guidekit/tokens.hpp"

namespace guidekit::synth {

enum class Format { Rephrase, Wiki, QA };

[[nodiscard]] std::string_view to_string(Format f) noexcept;
[[nodiscard]] Format parse_format(std::string_view s);

inline const std::set<Format> kAllFormats = {Format::Rephrase, Format::Wiki, Format::QA};

struct GeneratorSpec {
  std::string name;
  std::string model_id;
  double temperature = 0.8;
  std::size_t max_output_tokens = 4096;
  llm::BackendSpec backend;
};

struct Generator {
  GeneratorSpec spec;
  std::shared_ptr<const llm::Backend> backend;
};

/// Throws InvalidArgument for an empty list and DuplicateId for a repeated name.
[[nodiscard]] std::vector<Generator> make_generators(std::span<const GeneratorSpec> specs);

struct GenerationTask {
  std::string guideline_id;
  std::string generator;
  Format format = Format::Rephrase;
  std::size_t sample_index = 0;

  /// "<guideline>/<generator>/<format>/<sample>"; seeds derive from it.
  [[nodiscard]] std::string key() const;
  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static GenerationTask from_json(const Json& j);

  friend auto operator<=>(const GenerationTask&, const GenerationTask&) = default;
};

constexpr std::size_t kDefaultSamplesPerPrompt = 10;

/// Rephrase and Wiki tasks for every guideline, QA only for Train ones,
/// sorted by (guideline, generator, format, sample). Throws InvalidArgument
/// for empty generator names or formats, or zero samples; DuplicateId for a
/// repeated generator.
[[nodiscard]] std::vector<GenerationTask> build_plan(
    const corpus::SplitAssignment& split, std::span<const std::string> generator_names,
    const std::set<Format>& formats, std::size_t samples_per_prompt = kDefaultSamplesPerPrompt);

/// |generators| * samples * (|formats ∩ {Rephrase, Wiki}| * n + [QA] * n_train).
[[nodiscard]] std::size_t plan_size(std::size_t n_guidelines, std::size_t n_train,
                                    std::size_t n_generators, const std::set<Format>& formats,
                                    std::size_t samples_per_prompt = kDefaultSamplesPerPrompt);

/// A single user message embedding the full text under the format's
/// instruction. Model, temperature and seed are left for the caller.
/// Throws InvalidArgument for an empty text.
[[nodiscard]] llm::ChatRequest render_prompt(const corpus::TruncatedGuideline& g, Format format,
                                             const PromptSet& prompts = builtin_prompts());

struct SyntheticDoc {
  GenerationTask task;
  std::string text;
  std::size_t token_count = 0;

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static SyntheticDoc from_json(const Json& j);
};

struct GenerationFailure {
  GenerationTask task;
  std::size_t attempts = 0;
  std::string error;

  [[nodiscard]] Json to_json() const;
};

struct GenerateOptions {
  std::uint64_t seed = 0;
  std::size_t max_attempts = 2;  // first try plus one retry
  TokenEstimator estimator = default_token_estimator();
};

struct GenerationResult {
  std::vector<SyntheticDoc> docs;           // sorted by task
  std::vector<GenerationFailure> failures;  // sorted by task
};

/// Runs every task against its generator, per-generator up to the backend's
/// in-flight limit. The sample seed is derived from the root seed and the
/// task key. Empty generations and gateway errors are retried, then
/// reported as failures. Throws UnknownGuideline / InvalidArgument when a
/// task names a guideline or generator that was not supplied.
[[nodiscard]] GenerationResult generate(std::span<const GenerationTask> plan,
                                        std::span<const Generator> generators,
                                        std::span<const corpus::TruncatedGuideline> guidelines,
                                        const PromptSet& prompts,
                                        const GenerateOptions& opts = {});

struct LeakageReport {
  std::vector<GenerationTask> violations;  // QA docs on Test guidelines

  [[nodiscard]] bool clean() const noexcept { return violations.empty(); }
  [[nodiscard]] Json to_json() const;
};

/// Throws UnknownGuideline for a doc outside the split.
[[nodiscard]] LeakageReport verify_no_leakage(std::span<const SyntheticDoc> docs,
                                              const corpus::SplitAssignment& split);

struct DocCounts {
  std::size_t n_docs = 0;
  std::size_t total_tokens = 0;

  [[nodiscard]] double avg_tokens() const noexcept {
    return n_docs == 0 ? 0.0 : static_cast<double>(total_tokens) / static_cast<double>(n_docs);
  }
  [[nodiscard]] Json to_json() const;
};

struct GenerationSummary {
  DocCounts total;
  std::map<std::string, DocCounts> by_generator;
  std::map<Format, DocCounts> by_format;

  [[nodiscard]] Json to_json() const;
};

/// Throws InvalidArgument for an empty list.
[[nodiscard]] GenerationSummary summarize_generation(std::span<const SyntheticDoc> docs);

void write_synthetic_jsonl(const std::filesystem::path& p, std::span<const SyntheticDoc> docs);
[[nodiscard]] std::vector<SyntheticDoc> read_synthetic_jsonl(const std::filesystem::path& p);
void write_failures_jsonl(const std::filesystem::path& p,
                          std::span<const GenerationFailure> failures);

}  // namespace guidekit::synth
