#pragma once

// Chat-completion and embedding access for every stage. Two backends ship:
// a remote client for chat-completions compatible HTTP(S) endpoints and a
// scripted mock that makes offline runs pure functions of their inputs.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "guidekit/error.hpp"
#include "guidekit/io.hpp"

namespace guidekit::llm {

enum class Role { System, User, Assistant };
enum class FinishReason { Stop, Length, Error };

[[nodiscard]] std::string_view to_string(Role r) noexcept;
[[nodiscard]] std::string_view to_string(FinishReason f) noexcept;
[[nodiscard]] Role parse_role(std::string_view s);
[[nodiscard]] FinishReason parse_finish_reason(std::string_view s);

struct Message {
  Role role = Role::User;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct ChatRequest {
  std::string model_id;
  std::vector<Message> messages;
  double temperature = 0.0;  // 0 means greedy decoding
  std::size_t max_output_tokens = 1024;
  std::optional<std::int64_t> seed;

  /// Throws Error(InvalidArgument) when there is no user message, the
  /// temperature is negative or max_output_tokens is zero.
  void validate() const;
  [[nodiscard]] bool is_greedy() const noexcept { return temperature == 0.0; }
  /// Content of the last user message ("" if none).
  [[nodiscard]] std::string_view last_user_content() const noexcept;
};

struct Usage {
  std::size_t prompt_tokens = 0;
  std::size_t completion_tokens = 0;
};

struct ChatResponse {
  std::string content;
  FinishReason finish_reason = FinishReason::Stop;
  Usage usage;

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static ChatResponse from_json(const Json& j);
};

/// Stable request fingerprint: hex FNV-1a 64 over the canonical JSON
/// {"messages":[{"content":..,"role":..}..],"model_id":..,"seed":..|null}
/// with keys sorted and no whitespace.
[[nodiscard]] std::string fingerprint(const ChatRequest& request);

struct RetryPolicy {
  std::size_t max_attempts = 5;
  double base_backoff_seconds = 1.0;  // delay before retry n is base * 2^(n-1)
};

struct BackendConfig {
  std::string endpoint_url;  // e.g. https://api.openai.com/v1
  std::string auth_env_var;  // variable holding the bearer token
  std::size_t max_in_flight = 8;
  RetryPolicy retry;
  double timeout_seconds = 120.0;

  void validate() const;
};

struct MockRule {
  std::string contains;  // matched against the last user message
  ChatResponse response;
};

/// Scripted offline backend. Resolution order: exact fingerprint, then the
/// first rule whose substring occurs in the last user message, then the
/// default. A scripted finish_reason of "error" simulates a backend failure.
///
/// JSONL lines:
///   {"fingerprint": "<hex>", "response": {...}}
///   {"match": "<substring>", "response": {...}}
///   {"default": {...}}
///   {"embed": "<text>", "vector": [..]}
///   {"embedding_dim": 64}
/// A response is {"content": "..", "finish_reason": "stop"|"length"|"error"}.
/// Occurrences of "{{seed}}" in scripted content are replaced by the
/// request seed, so sampled requests can yield distinct documents.
struct MockScript {
  std::map<std::string, ChatResponse> by_fingerprint;
  std::vector<MockRule> rules;
  std::optional<ChatResponse> default_response;
  std::map<std::string, std::vector<double>> embeddings;
  std::size_t embedding_dim = 64;

  [[nodiscard]] std::optional<ChatResponse> lookup(const ChatRequest& r) const;

  [[nodiscard]] static MockScript parse(std::string_view jsonl,
                                        std::string_view source_name = "mock");
  [[nodiscard]] static MockScript load(const std::filesystem::path& path);
};

/// A chat/embedding provider. Implementations must be thread-safe.
class Backend {
 public:
  virtual ~Backend() = default;
  [[nodiscard]] virtual ChatResponse chat(const ChatRequest& request) const = 0;
  /// Raw (not yet normalized) vectors, one per text.
  [[nodiscard]] virtual std::vector<std::vector<double>> embed_raw(
      std::span<const std::string> texts, std::string_view model_id) const = 0;
  [[nodiscard]] virtual bool is_remote() const noexcept = 0;
  [[nodiscard]] virtual std::size_t max_in_flight() const noexcept { return 1; }
};

class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockScript script) : script_(std::move(script)) {}

  [[nodiscard]] ChatResponse chat(const ChatRequest& request) const override;
  /// Scripted vectors where present; otherwise a signed feature-hashing
  /// embedding of the text's terms into embedding_dim buckets.
  [[nodiscard]] std::vector<std::vector<double>> embed_raw(
      std::span<const std::string> texts,
      std::string_view model_id) const override;
  [[nodiscard]] bool is_remote() const noexcept override { return false; }
  [[nodiscard]] std::size_t max_in_flight() const noexcept override { return 4; }
  [[nodiscard]] const MockScript& script() const noexcept { return script_; }

 private:
  MockScript script_;
};

/// Chat-completions JSON over HTTP(S). Retries transport failures, 429 and
/// 5xx with exponential backoff; any other non-200 status fails at once.
class HttpBackend final : public Backend {
 public:
  explicit HttpBackend(BackendConfig config);

  [[nodiscard]] ChatResponse chat(const ChatRequest& request) const override;
  [[nodiscard]] std::vector<std::vector<double>> embed_raw(
      std::span<const std::string> texts,
      std::string_view model_id) const override;
  [[nodiscard]] bool is_remote() const noexcept override { return true; }
  [[nodiscard]] std::size_t max_in_flight() const noexcept override {
    return config_.max_in_flight;
  }
  [[nodiscard]] const BackendConfig& config() const noexcept { return config_; }

 private:
  [[nodiscard]] Json post(const std::string& route, const Json& body) const;

  BackendConfig config_;
  std::string origin_;     // scheme://host[:port]
  std::string base_path_;  // path prefix, no trailing slash
};

using BackendSpec = std::variant<BackendConfig, MockScript>;

[[nodiscard]] std::shared_ptr<const Backend> make_backend(BackendSpec spec);

/// Validates the request, then asks the backend. Scripted/wire responses with
/// finish_reason error surface as Error(BackendError).
[[nodiscard]] ChatResponse complete(const ChatRequest& request,
                                    const Backend& backend);

struct BatchOutcome {
  std::optional<ChatResponse> response;
  std::optional<Error> error;

  [[nodiscard]] bool ok() const noexcept { return response.has_value(); }
};

/// Runs at most `max_in_flight` requests at once (0 means the backend's own
/// limit). Outcome i always belongs to request i; one failing item never
/// aborts the rest. Throws Error(EmptyBatch) for an empty batch.
[[nodiscard]] std::vector<BatchOutcome> complete_batch(
    std::span<const ChatRequest> requests, const Backend& backend,
    std::size_t max_in_flight = 0);

using Embedding = std::vector<double>;

/// Unit-normalized embeddings, one per text. Throws EmptyBatch,
/// InvalidArgument (empty text), DimensionMismatch, MalformedResponse
/// (zero vector).
[[nodiscard]] std::vector<Embedding> embed(std::span<const std::string> texts,
                                           const Backend& backend,
                                           std::string_view model_id = "");

}  // namespace guidekit::llm
