#include <algorithm>
#include <array>

#include "guidekit/cli.hpp"
#include "guidekit/error.hpp"
#include "guidekit/random.hpp"

namespace guidekit::cli {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::Config, msg); }

void check_keys(const Json& j, std::string_view where,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) config_error(std::string(where) + " must be an object");
  for (const auto& [k, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      config_error("unknown key '" + k + "' in " + std::string(where));
    }
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

llm::BackendSpec parse_backend(const Json& j, const fs::path& base, const std::string& where) {
  static constexpr std::array<std::string_view, 6> kSecretKeys = {
      "api_key", "apikey", "token", "secret", "password", "authorization"};
  if (!j.is_object()) config_error(where + ".backend must be an object");
  for (const auto& [k, _] : j.items()) {
    std::string lower = k;
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (std::find(kSecretKeys.begin(), kSecretKeys.end(), lower) != kSecretKeys.end()) {
      config_error(where + ".backend." + k +
                   ": secrets are never inlined; name the variable in auth_env_var");
    }
  }
  const auto kind = j.value("kind", std::string("remote"));
  if (kind == "mock") {
    check_keys(j, where + ".backend", {"kind", "script", "entries"});
    if (j.contains("script") == j.contains("entries")) {
      config_error(where + ".backend needs exactly one of 'script' or 'entries'");
    }
    if (j.contains("script")) {
      return llm::MockScript::load(resolve(base, j["script"].get<std::string>()));
    }
    std::string jsonl;
    for (const auto& e : j["entries"]) jsonl += e.dump() + "\n";
    return llm::MockScript::parse(jsonl, where);
  }
  if (kind != "remote") config_error(where + ".backend.kind must be 'mock' or 'remote'");
  check_keys(j, where + ".backend",
             {"kind", "endpoint_url", "auth_env_var", "max_in_flight", "max_attempts",
              "base_backoff_seconds", "timeout_seconds"});
  llm::BackendConfig c;
  c.endpoint_url = j.value("endpoint_url", std::string());
  c.auth_env_var = j.value("auth_env_var", std::string());
  c.max_in_flight = j.value("max_in_flight", c.max_in_flight);
  c.retry.max_attempts = j.value("max_attempts", c.retry.max_attempts);
  c.retry.base_backoff_seconds = j.value("base_backoff_seconds", c.retry.base_backoff_seconds);
  c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
  c.validate();
  return c;
}

Endpoint parse_endpoint(const Json& j, const fs::path& base, const std::string& name,
                        std::string default_model, std::size_t default_max_tokens,
                        double default_temperature) {
  check_keys(j, name, {"model_id", "backend", "max_output_tokens", "temperature", "max_in_flight"});
  if (!j.contains("backend")) config_error(name + " lacks a backend");
  Endpoint e;
  e.name = name;
  e.model_id = j.value("model_id", std::move(default_model));
  e.backend = parse_backend(j["backend"], base, name);
  e.max_output_tokens = j.value("max_output_tokens", default_max_tokens);
  e.temperature = j.value("temperature", default_temperature);
  e.max_in_flight = j.value("max_in_flight", std::size_t{0});
  if (e.max_output_tokens == 0) config_error(name + ".max_output_tokens must be > 0");
  return e;
}

std::optional<Endpoint> optional_endpoint(const Json& j, const char* key, const fs::path& base,
                                          std::string default_model,
                                          std::size_t default_max_tokens,
                                          double default_temperature = 0.0) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return parse_endpoint(j[key], base, key, std::move(default_model), default_max_tokens,
                        default_temperature);
}

}  // namespace

PipelineConfig PipelineConfig::from_json(const Json& j, const fs::path& base_dir) {
  try {
    check_keys(j, "config",
               {"corpus_dir", "manifest", "output_dir", "seed", "offline", "truncation_limit",
                "prompts_dir", "tokenizer_vocab", "samples_per_prompt", "formats", "generators",
                "benchmark_generator", "benchmark", "candidate", "judge", "embedding", "teacher",
                "policy", "retrieval", "reward", "rollouts", "abstention_policy", "replay"});
    PipelineConfig c;
    auto path_of = [&](const char* key, fs::path& slot) {
      if (j.contains(key)) slot = resolve(base_dir, j[key].get<std::string>());
      else slot = resolve(base_dir, slot.string());
    };
    auto optional_path = [&](const char* key, std::optional<fs::path>& slot) {
      if (j.contains(key) && !j[key].is_null()) slot = resolve(base_dir, j[key].get<std::string>());
    };
    path_of("corpus_dir", c.corpus_dir);
    path_of("manifest", c.manifest);
    path_of("output_dir", c.output_dir);
    optional_path("prompts_dir", c.prompts_dir);
    optional_path("tokenizer_vocab", c.tokenizer_vocab);
    if (j.contains("seed")) {
      const auto& s = j["seed"];
      if (!s.is_number_integer()) config_error("seed must be an integer");
      c.seed = s.is_number_unsigned() ? s.get<std::uint64_t>()
                                      : static_cast<std::uint64_t>(s.get<std::int64_t>());
    }
    c.offline = j.value("offline", false);
    c.truncation_limit = j.value("truncation_limit", c.truncation_limit);
    if (c.truncation_limit == 0) config_error("truncation_limit must be > 0");
    c.samples_per_prompt = j.value("samples_per_prompt", c.samples_per_prompt);
    if (j.contains("formats")) {
      c.formats.clear();
      for (const auto& f : j["formats"]) {
        try {
          c.formats.insert(synth::parse_format(f.get<std::string>()));
        } catch (const Error& e) {
          config_error(e.what());
        }
      }
    }
    if (j.contains("generators")) {
      if (!j["generators"].is_array()) config_error("generators must be a list");
      std::set<std::string> names;
      for (const auto& g : j["generators"]) {
        check_keys(g, "generator",
                   {"name", "model_id", "temperature", "max_output_tokens", "backend"});
        synth::GeneratorSpec s;
        s.name = g.value("name", std::string());
        if (s.name.empty()) config_error("every generator needs a name");
        if (!names.insert(s.name).second) config_error("duplicate generator '" + s.name + "'");
        s.model_id = g.value("model_id", s.name);
        s.temperature = g.value("temperature", s.temperature);
        s.max_output_tokens = g.value("max_output_tokens", s.max_output_tokens);
        if (!g.contains("backend")) config_error("generator '" + s.name + "' lacks a backend");
        s.backend = parse_backend(g["backend"], base_dir, "generators." + s.name);
        c.generators.push_back(std::move(s));
      }
    }
    c.benchmark_generator = optional_endpoint(j, "benchmark_generator", base_dir, "gpt-5.2", 4096);
    if (j.contains("benchmark")) {
      const auto& b = j["benchmark"];
      check_keys(b, "benchmark", {"n_pairs", "n_questions", "n_broad"});
      c.n_pairs = b.value("n_pairs", c.n_pairs);
      c.n_questions = b.value("n_questions", c.n_questions);
      c.n_broad = b.value("n_broad", c.n_broad);
      if (c.n_broad > c.n_questions) config_error("benchmark.n_broad exceeds n_questions");
    }
    c.candidate = optional_endpoint(j, "candidate", base_dir, "", 1024);
    c.judge = optional_endpoint(j, "judge", base_dir, "gpt-4.1", 512);
    c.embedding = optional_endpoint(j, "embedding", base_dir, "", 1);
    c.teacher = optional_endpoint(j, "teacher", base_dir, "gpt-5.2", 1024);
    c.policy = optional_endpoint(j, "policy", base_dir, "", 512, 1.0);
    if (j.contains("retrieval")) {
      const auto& r = j["retrieval"];
      check_keys(r, "retrieval", {"chunk_size", "overlap", "k", "k1", "b"});
      c.chunking.size = r.value("chunk_size", c.chunking.size);
      c.chunking.overlap = r.value("overlap", c.chunking.overlap);
      c.top_k = r.value("k", c.top_k);
      c.bm25.k1 = r.value("k1", c.bm25.k1);
      c.bm25.b = r.value("b", c.bm25.b);
    }
    try {
      c.chunking.validate();
    } catch (const Error& e) {
      config_error(std::string("retrieval: ") + e.what());
    }
    if (j.contains("reward")) {
      check_keys(j["reward"], "reward", {"min_reasoning_words", "correct_reward", "incorrect_reward"});
      c.reward = train::RewardSpec::from_json(j["reward"]);
    }
    if (j.contains("rollouts")) {
      const auto& r = j["rollouts"];
      check_keys(r, "rollouts", {"group_size", "max_completion_tokens", "temperature"});
      c.group_size = r.value("group_size", c.group_size);
      c.max_completion_tokens = r.value("max_completion_tokens", c.max_completion_tokens);
      c.rollout_temperature = r.value("temperature", c.rollout_temperature);
    }
    if (j.contains("abstention_policy")) {
      c.abstention_policy = eval::parse_abstention_policy(j["abstention_policy"].get<std::string>());
    }
    if (j.contains("replay")) {
      const auto& r = j["replay"];
      check_keys(r, "replay", {"fraction", "pool"});
      c.replay_fraction = r.value("fraction", c.replay_fraction);
      if (r.contains("pool") && !r["pool"].is_null()) {
        c.replay_pool = resolve(base_dir, r["pool"].get<std::string>());
      }
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    config_error(std::string("config: ") + e.what());
  }
}

std::uint64_t PipelineConfig::stage_seed(std::string_view stage) const {
  return derive_seed(seed, stage);
}

std::vector<std::string> PipelineConfig::remote_backends() const {
  std::vector<std::string> out;
  for (const auto& g : generators) {
    if (std::holds_alternative<llm::BackendConfig>(g.backend)) out.push_back("generators." + g.name);
  }
  for (const auto* e : {&benchmark_generator, &candidate, &judge, &embedding, &teacher, &policy}) {
    if (*e && (*e)->is_remote()) out.push_back((*e)->name);
  }
  return out;
}

void apply_override(Json& j, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    config_error("--set expects key.path=value, got '" + std::string(assignment) + "'");
  }
  const auto key = assignment.substr(0, eq);
  const auto raw = std::string(assignment.substr(eq + 1));
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  Json* node = &j;
  std::size_t pos = 0;
  while (true) {
    const auto dot = key.find('.', pos);
    const auto part = std::string(key.substr(pos, dot == std::string_view::npos ? key.npos : dot - pos));
    if (part.empty()) config_error("--set key '" + std::string(key) + "' has an empty segment");
    if (!node->is_object()) {
      if (!node->is_null()) config_error("--set key '" + std::string(key) + "' crosses a non-object");
      *node = Json::object();
    }
    if (dot == std::string_view::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    node = &(*node)[part];
    pos = dot + 1;
  }
}

}  // namespace guidekit::cli
