#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "guidekit/llm_gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "guidekit/random.hpp"
#include "guidekit/retrieval.hpp"
#include "guidekit/tokens.hpp"

namespace guidekit::llm {

std::string_view to_string(Role r) noexcept {
  switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
  }
  return "user";
}

std::string_view to_string(FinishReason f) noexcept {
  switch (f) {
    case FinishReason::Stop: return "stop";
    case FinishReason::Length: return "length";
    case FinishReason::Error: return "error";
  }
  return "stop";
}

Role parse_role(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw Error(ErrorCode::Parse, "unknown role '" + std::string(s) + "'");
}

FinishReason parse_finish_reason(std::string_view s) {
  if (s == "length") return FinishReason::Length;
  if (s == "error") return FinishReason::Error;
  return FinishReason::Stop;
}

void ChatRequest::validate() const {
  const bool has_user = std::any_of(messages.begin(), messages.end(),
                                    [](const Message& m) { return m.role == Role::User; });
  if (!has_user) throw Error(ErrorCode::InvalidArgument, "request has no user message");
  if (!(temperature >= 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "temperature must be >= 0");
  }
  if (max_output_tokens == 0) {
    throw Error(ErrorCode::InvalidArgument, "max_output_tokens must be positive");
  }
}

std::string_view ChatRequest::last_user_content() const noexcept {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
    if (it->role == Role::User) return it->content;
  }
  return {};
}

Json ChatResponse::to_json() const {
  Json j;
  j["content"] = content;
  j["finish_reason"] = to_string(finish_reason);
  j["usage"] = {{"prompt_tokens", usage.prompt_tokens},
                {"completion_tokens", usage.completion_tokens}};
  return j;
}

ChatResponse ChatResponse::from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::Parse, "response must be an object");
  ChatResponse r;
  if (j.contains("content") && j["content"].is_string()) {
    r.content = j["content"].get<std::string>();
  }
  r.finish_reason = parse_finish_reason(j.value("finish_reason", std::string("stop")));
  if (j.contains("usage") && j["usage"].is_object()) {
    r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
    r.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
  }
  return r;
}

std::string fingerprint(const ChatRequest& request) {
  nlohmann::json canon = nlohmann::json::object();
  canon["model_id"] = request.model_id;
  auto& msgs = canon["messages"] = nlohmann::json::array();
  for (const auto& m : request.messages) {
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  canon["seed"] = request.seed ? nlohmann::json(*request.seed) : nlohmann::json(nullptr);
  return to_hex(fnv1a64(canon.dump()));
}

void BackendConfig::validate() const {
  if (endpoint_url.rfind("http://", 0) != 0 && endpoint_url.rfind("https://", 0) != 0) {
    throw Error(ErrorCode::Config, "endpoint_url must start with http:// or https://");
  }
  if (max_in_flight < 1) throw Error(ErrorCode::Config, "max_in_flight must be >= 1");
  if (retry.max_attempts < 1) throw Error(ErrorCode::Config, "retry.max_attempts must be >= 1");
  if (retry.base_backoff_seconds < 0) {
    throw Error(ErrorCode::Config, "retry.base_backoff must be >= 0");
  }
  if (!(timeout_seconds > 0)) throw Error(ErrorCode::Config, "timeout must be > 0");
}

// ---------------------------------------------------------------------------
// Mock

namespace {

void replace_all(std::string& s, std::string_view what, std::string_view with) {
  std::size_t pos = 0;
  while ((pos = s.find(what, pos)) != std::string::npos) {
    s.replace(pos, what.size(), with);
    pos += with.size();
  }
}

ChatResponse instantiate(ChatResponse r, const ChatRequest& req) {
  replace_all(r.content, "{{seed}}", req.seed ? std::to_string(*req.seed) : "none");
  std::size_t prompt_tokens = 0;
  for (const auto& m : req.messages) prompt_tokens += estimate_tokens(m.content);
  r.usage = {prompt_tokens, estimate_tokens(r.content)};
  return r;
}

}  // namespace

std::optional<ChatResponse> MockScript::lookup(const ChatRequest& r) const {
  if (const auto it = by_fingerprint.find(fingerprint(r)); it != by_fingerprint.end()) {
    return instantiate(it->second, r);
  }
  const auto user = r.last_user_content();
  for (const auto& rule : rules) {
    if (user.find(rule.contains) != std::string_view::npos) {
      return instantiate(rule.response, r);
    }
  }
  if (default_response) return instantiate(*default_response, r);
  return std::nullopt;
}

MockScript MockScript::parse(std::string_view jsonl, std::string_view source_name) {
  MockScript s;
  std::size_t n = 0;
  for (const auto& line : parse_jsonl(jsonl, source_name)) {
    ++n;
    const auto where = std::string(source_name) + " entry " + std::to_string(n);
    if (!line.is_object()) throw Error(ErrorCode::Parse, where + ": not an object");
    if (line.contains("fingerprint")) {
      s.by_fingerprint[line["fingerprint"].get<std::string>()] =
          ChatResponse::from_json(line.at("response"));
    } else if (line.contains("match")) {
      s.rules.push_back({line["match"].get<std::string>(),
                         ChatResponse::from_json(line.at("response"))});
    } else if (line.contains("default")) {
      s.default_response = ChatResponse::from_json(line["default"]);
    } else if (line.contains("embed")) {
      s.embeddings[line["embed"].get<std::string>()] =
          line.at("vector").get<std::vector<double>>();
    } else if (line.contains("embedding_dim")) {
      s.embedding_dim = line["embedding_dim"].get<std::size_t>();
      if (s.embedding_dim == 0) throw Error(ErrorCode::Parse, where + ": embedding_dim is 0");
    } else {
      throw Error(ErrorCode::Parse, where + ": unrecognised mock entry");
    }
  }
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  return parse(read_file(path), path.string());
}

ChatResponse MockBackend::chat(const ChatRequest& request) const {
  auto r = script_.lookup(request);
  if (!r) {
    throw Error(ErrorCode::MockMiss,
                "mock has no response for fingerprint " + fingerprint(request));
  }
  return *r;
}

std::vector<std::vector<double>> MockBackend::embed_raw(
    std::span<const std::string> texts, std::string_view /*model_id*/) const {
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  const auto dim = script_.embedding_dim;
  for (const auto& text : texts) {
    if (const auto it = script_.embeddings.find(text); it != script_.embeddings.end()) {
      out.push_back(it->second);
      continue;
    }
    std::vector<double> v(dim, 0.0);
    const auto terms = retrieval::tokenize_terms(text);
    for (const auto& t : terms) {
      const auto h = fnv1a64(t);
      v[h % dim] += (h >> 63) != 0 ? -1.0 : 1.0;
    }
    if (std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) {
      v[fnv1a64(text) % dim] = 1.0;
    }
    out.push_back(std::move(v));
  }
  return out;
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  const auto scheme_end = config_.endpoint_url.find("://") + 3;
  const auto path_start = config_.endpoint_url.find('/', scheme_end);
  if (path_start == std::string::npos) {
    origin_ = config_.endpoint_url;
  } else {
    origin_ = config_.endpoint_url.substr(0, path_start);
    base_path_ = config_.endpoint_url.substr(path_start);
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
  }
}

Json HttpBackend::post(const std::string& route, const Json& body) const {
  httplib::Headers headers;
  if (!config_.auth_env_var.empty()) {
    const char* key = std::getenv(config_.auth_env_var.c_str());
    if (key == nullptr || *key == '\0') {
      throw Error(ErrorCode::AuthMissing,
                  "environment variable " + config_.auth_env_var + " is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  using namespace std::chrono;
  const auto timeout = duration_cast<microseconds>(duration<double>(config_.timeout_seconds));
  const auto payload = body.dump();
  const auto path = base_path_ + route;
  std::optional<int> last_status;
  std::string last_error;

  for (std::size_t attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    auto res = client.Post(path, headers, payload, "application/json");
    if (!res) {
      last_status.reset();
      last_error = httplib::to_string(res.error());
    } else if (res->status == 200) {
      try {
        return Json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::MalformedResponse,
                    "response body is not JSON: " + std::string(e.what()));
      }
    } else if (res->status == 429 || res->status >= 500) {
      last_status = res->status;
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      throw Error(ErrorCode::RequestRejected,
                  "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 512),
                  res->status);
    }
    if (attempt < config_.retry.max_attempts) {
      const double delay =
          config_.retry.base_backoff_seconds * std::ldexp(1.0, static_cast<int>(attempt) - 1);
      std::this_thread::sleep_for(duration<double>(delay));
    }
  }
  throw Error(ErrorCode::ExhaustedRetries,
              "gave up after " + std::to_string(config_.retry.max_attempts) +
                  " attempts: " + last_error,
              last_status);
}

ChatResponse HttpBackend::chat(const ChatRequest& request) const {
  Json body;
  body["model"] = request.model_id;
  auto& msgs = body["messages"] = Json::array();
  for (const auto& m : request.messages) {
    msgs.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_output_tokens;
  if (request.seed) body["seed"] = *request.seed;

  const auto j = post("/chat/completions", body);
  try {
    const auto& choice = j.at("choices").at(0);
    const auto& content = choice.at("message").at("content");
    if (!content.is_string()) {
      throw Error(ErrorCode::MalformedResponse, "choice has no string content");
    }
    ChatResponse r;
    r.content = content.get<std::string>();
    r.finish_reason = choice.contains("finish_reason") && choice["finish_reason"].is_string()
                          ? parse_finish_reason(choice["finish_reason"].get<std::string>())
                          : FinishReason::Stop;
    if (j.contains("usage") && j["usage"].is_object()) {
      r.usage.prompt_tokens = j["usage"].value("prompt_tokens", std::size_t{0});
      r.usage.completion_tokens = j["usage"].value("completion_tokens", std::size_t{0});
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::MalformedResponse,
                "unexpected chat response shape: " + std::string(e.what()));
  }
}

std::vector<std::vector<double>> HttpBackend::embed_raw(std::span<const std::string> texts,
                                                        std::string_view model_id) const {
  constexpr std::size_t kBatch = 128;
  std::vector<std::vector<double>> out;
  out.reserve(texts.size());
  for (std::size_t start = 0; start < texts.size(); start += kBatch) {
    const auto n = std::min(kBatch, texts.size() - start);
    Json body;
    body["model"] = model_id;
    body["input"] = Json::array();
    for (std::size_t i = 0; i < n; ++i) body["input"].push_back(texts[start + i]);
    const auto j = post("/embeddings", body);
    try {
      std::vector<std::pair<std::size_t, std::vector<double>>> rows;
      for (const auto& d : j.at("data")) {
        rows.emplace_back(d.value("index", rows.size()),
                          d.at("embedding").get<std::vector<double>>());
      }
      if (rows.size() != n) {
        throw Error(ErrorCode::MalformedResponse, "embedding count does not match input count");
      }
      std::sort(rows.begin(), rows.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      for (auto& [_, v] : rows) out.push_back(std::move(v));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::MalformedResponse,
                  "unexpected embedding response shape: " + std::string(e.what()));
    }
  }
  return out;
}

std::shared_ptr<const Backend> make_backend(BackendSpec spec) {
  if (auto* cfg = std::get_if<BackendConfig>(&spec)) {
    return std::make_shared<HttpBackend>(std::move(*cfg));
  }
  return std::make_shared<MockBackend>(std::get<MockScript>(std::move(spec)));
}

// ---------------------------------------------------------------------------
// Operations

ChatResponse complete(const ChatRequest& request, const Backend& backend) {
  request.validate();
  auto r = backend.chat(request);
  if (r.finish_reason == FinishReason::Error) {
    throw Error(ErrorCode::BackendError, "backend reported an error for request " +
                                             fingerprint(request));
  }
  return r;
}

std::vector<BatchOutcome> complete_batch(std::span<const ChatRequest> requests,
                                         const Backend& backend, std::size_t max_in_flight) {
  if (requests.empty()) throw Error(ErrorCode::EmptyBatch, "empty request batch");
  if (max_in_flight == 0) max_in_flight = std::max<std::size_t>(1, backend.max_in_flight());
  std::vector<BatchOutcome> out(requests.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        out[i].response = complete(requests[i], backend);
      } catch (const Error& e) {
        out[i].error = e;
      } catch (const std::exception& e) {
        out[i].error = Error(ErrorCode::BackendError, e.what());
      }
    }
  };

  const auto n_workers = std::min(max_in_flight, requests.size());
  if (n_workers == 1) {
    worker();
    return out;
  }
  std::vector<std::jthread> pool;
  pool.reserve(n_workers);
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  pool.clear();  // joins
  return out;
}

std::vector<Embedding> embed(std::span<const std::string> texts, const Backend& backend,
                             std::string_view model_id) {
  if (texts.empty()) throw Error(ErrorCode::EmptyBatch, "no texts to embed");
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) {
      throw Error(ErrorCode::InvalidArgument, "text " + std::to_string(i) + " is empty");
    }
  }
  auto vectors = backend.embed_raw(texts, model_id);
  if (vectors.size() != texts.size()) {
    throw Error(ErrorCode::MalformedResponse, "backend returned " +
                                                  std::to_string(vectors.size()) +
                                                  " vectors for " +
                                                  std::to_string(texts.size()) + " texts");
  }
  const auto dim = vectors.front().size();
  for (auto& v : vectors) {
    if (v.size() != dim || dim == 0) {
      throw Error(ErrorCode::DimensionMismatch,
                  "embedding dimensions differ within a batch (" + std::to_string(dim) +
                      " vs " + std::to_string(v.size()) + ")");
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::MalformedResponse, "embedding has zero or non-finite norm");
    }
    for (double& x : v) x /= norm;
  }
  return vectors;
}

}  // namespace guidekit::llm
