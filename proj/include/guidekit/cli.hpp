#pragma once

// Pipeline orchestration: one JSON config, one subcommand per stage, every
// artifact under output_dir.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "guidekit/evaluation.hpp"
#include "guidekit/io.hpp"
#include "guidekit/llm_gateway.hpp"
#include "guidekit/retrieval.hpp"
#include "guidekit/synthgen.hpp"
#include "guidekit/trainprep.hpp"

namespace guidekit::cli {

enum ExitCode : int { kSuccess = 0, kUsage = 1, kConfigError = 2, kStageFailure = 3 };

/// A model reachable through one backend.
struct Endpoint {
  std::string name;  // config key, for messages
  std::string model_id;
  llm::BackendSpec backend;
  std::size_t max_output_tokens = 1024;
  double temperature = 0.0;
  std::size_t max_in_flight = 0;

  [[nodiscard]] bool is_remote() const noexcept {
    return std::holds_alternative<llm::BackendConfig>(backend);
  }
};

struct PipelineConfig {
  std::filesystem::path corpus_dir = "corpus";
  std::filesystem::path manifest = "corpus/manifest.jsonl";
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 0;
  bool offline = false;
  std::size_t truncation_limit = 120000;
  std::optional<std::filesystem::path> prompts_dir;
  std::optional<std::filesystem::path> tokenizer_vocab;

  std::size_t samples_per_prompt = synth::kDefaultSamplesPerPrompt;
  std::set<synth::Format> formats = synth::kAllFormats;
  std::vector<synth::GeneratorSpec> generators;

  std::optional<Endpoint> benchmark_generator;
  std::size_t n_pairs = 5;
  std::size_t n_questions = 5;
  std::size_t n_broad = 2;

  std::optional<Endpoint> candidate;
  std::optional<Endpoint> judge;
  std::optional<Endpoint> embedding;
  std::optional<Endpoint> teacher;
  std::optional<Endpoint> policy;

  retrieval::ChunkingParams chunking;
  retrieval::Bm25Params bm25;
  std::size_t top_k = 10;

  train::RewardSpec reward;
  std::size_t group_size = 16;
  std::size_t max_completion_tokens = 512;
  double rollout_temperature = 1.0;

  eval::AbstentionPolicy abstention_policy = eval::AbstentionPolicy::ExcludeFromDenominator;
  double replay_fraction = 0.5;
  std::optional<std::filesystem::path> replay_pool;

  /// Relative paths resolve against `base_dir` (the config file's folder).
  /// Throws Error(Config) for malformed values or inlined secrets.
  [[nodiscard]] static PipelineConfig from_json(const Json& j,
                                                const std::filesystem::path& base_dir);

  /// derive_seed(seed, stage): stages never share a random stream.
  [[nodiscard]] std::uint64_t stage_seed(std::string_view stage) const;

  /// Names of configured endpoints whose backend is remote.
  [[nodiscard]] std::vector<std::string> remote_backends() const;
};

/// Sets `dotted.key.path` in `j`; `value` is parsed as JSON when it is valid
/// JSON and taken as a string otherwise.
void apply_override(Json& j, std::string_view assignment);

/// Runs one subcommand (args exclude the program name). Failures print a
/// one-line JSON error record to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace guidekit::cli
