#include "guidekit/trainprep.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "guidekit/error.hpp"
#include "guidekit/evaluation.hpp"
#include "guidekit/prompts.hpp"
#include "guidekit/random.hpp"
#include "guidekit/utf8.hpp"

namespace guidekit::train {

namespace {

std::vector<std::u32string> split_words(std::string_view text) {
  std::vector<std::u32string> words;
  std::u32string cur;
  for (const auto cp : utf8::decode(text)) {
    if (utf8::is_space(cp)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(cp);
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::size_t count_words(std::string_view text) noexcept {
  std::size_t n = 0;
  bool in_word = false;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto b = static_cast<unsigned char>(text[i]);
    const std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : 4;
    char32_t cp = 0xFFFD;
    if (i + len <= text.size() && utf8::is_valid(text.substr(i, len))) {
      cp = utf8::decode(text.substr(i, len))[0];
      i += len;
    } else {
      ++i;
    }
    const bool space = utf8::is_space(cp);
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

Json mask_json(const std::vector<bool>& mask) {
  Json a = Json::array();
  for (const bool b : mask) a.push_back(b);
  return a;
}

const corpus::TruncatedGuideline& find_guideline(
    std::span<const corpus::TruncatedGuideline> guidelines, std::string_view id) {
  for (const auto& g : guidelines) {
    if (g.id == id) return g;
  }
  throw Error(ErrorCode::UnknownGuideline, "unknown guideline '" + std::string(id) + "'");
}

}  // namespace

std::vector<TokenId> WhitespaceTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& w : split_words(text)) {
    ids.push_back(static_cast<TokenId>(fnv1a64(utf8::encode(w)) & 0xFFFFFFU));
  }
  return ids;
}

VocabTokenizer::VocabTokenizer(std::vector<std::string> vocab) {
  if (vocab.empty()) throw Error(ErrorCode::Config, "empty vocabulary");
  vocab_size_ = vocab.size();
  unk_ = static_cast<TokenId>(vocab.size());
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    const auto& piece = vocab[i];
    if (piece == "[UNK]") unk_ = static_cast<TokenId>(i);
    max_piece_chars_ = std::max(max_piece_chars_, utf8::length(piece));
    ids_.emplace(piece, static_cast<TokenId>(i));
  }
}

VocabTokenizer VocabTokenizer::load(const std::filesystem::path& path) {
  const auto text = read_file(path);
  std::vector<std::string> vocab;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) vocab.push_back(std::move(line));
    pos = end + 1;
  }
  return VocabTokenizer(std::move(vocab));
}

std::vector<TokenId> VocabTokenizer::encode(std::string_view text) const {
  std::vector<TokenId> out;
  for (const auto& w : split_words(text)) {
    std::size_t i = 0;
    while (i < w.size()) {
      bool found = false;
      for (std::size_t len = std::min(max_piece_chars_, w.size() - i); len > 0; --len) {
        const auto it = ids_.find(utf8::encode(std::u32string_view(w).substr(i, len)));
        if (it != ids_.end()) {
          out.push_back(it->second);
          i += len;
          found = true;
          break;
        }
      }
      if (!found) {
        out.push_back(unk_);
        ++i;
      }
    }
  }
  return out;
}

std::unique_ptr<Tokenizer> make_tokenizer(const std::optional<std::filesystem::path>& vocab_file) {
  if (vocab_file) return std::make_unique<VocabTokenizer>(VocabTokenizer::load(*vocab_file));
  return std::make_unique<WhitespaceTokenizer>();
}

Json TextDoc::to_json() const {
  Json j;
  j["key"] = key;
  j["source"] = source;
  j["text"] = text;
  return j;
}

TextDoc TextDoc::from_json(const Json& j, std::string_view default_source) {
  TextDoc d;
  if (j.contains("key")) {
    d.key = j["key"].get<std::string>();
  } else if (j.contains("id")) {
    d.key = j["id"].get<std::string>();
  } else {
    throw Error(ErrorCode::Parse, "document lacks 'key' or 'id'");
  }
  if (!j.contains("text")) throw Error(ErrorCode::Parse, "document '" + d.key + "' lacks 'text'");
  d.text = j["text"].get<std::string>();
  d.source = j.contains("source") ? j["source"].get<std::string>() : std::string(default_source);
  return d;
}

std::vector<TextDoc> to_text_docs(std::span<const synth::SyntheticDoc> docs) {
  std::vector<TextDoc> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({d.task.key(), d.text, "domain"});
  return out;
}

Json PackedSequence::to_json() const {
  Json j;
  j["key"] = key;
  j["token_ids"] = token_ids;
  j["loss_mask"] = mask_json(loss_mask);
  return j;
}

std::vector<PackedSequence> pack_cpt_dataset(std::span<const TextDoc> docs,
                                             const Tokenizer& tokenizer, std::size_t max_len) {
  if (max_len == 0) throw Error(ErrorCode::InvalidArgument, "max_len is 0");
  std::vector<const TextDoc*> order;
  for (const auto& d : docs) order.push_back(&d);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto* a, const auto* b) { return a->key < b->key; });
  std::vector<PackedSequence> out;
  out.reserve(order.size());
  for (const auto* d : order) {
    auto ids = tokenizer.encode(d->text);
    if (ids.empty()) {
      throw Error(ErrorCode::EmptyDocument, "document '" + d->key + "' has no tokens");
    }
    if (ids.size() > max_len) ids.resize(max_len);
    PackedSequence s;
    s.key = d->key;
    s.loss_mask.assign(ids.size(), true);
    s.token_ids = std::move(ids);
    out.push_back(std::move(s));
  }
  return out;
}

Json SftExample::to_json() const {
  Json j;
  j["item_id"] = item_id;
  j["messages"] = Json::array({{{"role", "user"}, {"content", user}},
                               {{"role", "assistant"}, {"content", assistant}}});
  j["token_ids"] = token_ids;
  j["loss_mask"] = mask_json(loss_mask);
  return j;
}

SftExample make_sft_example(std::string item_id, std::string user, std::string assistant,
                            const Tokenizer& tokenizer) {
  auto prompt_ids = tokenizer.encode(user);
  const auto answer_ids = tokenizer.encode(assistant);
  if (prompt_ids.empty() || answer_ids.empty()) {
    throw Error(ErrorCode::InvalidArgument,
                "SFT example '" + item_id + "' needs both a prompt and an answer");
  }
  SftExample e;
  e.item_id = std::move(item_id);
  e.user = std::move(user);
  e.assistant = std::move(assistant);
  e.loss_mask.assign(prompt_ids.size(), false);
  e.loss_mask.resize(prompt_ids.size() + answer_ids.size(), true);
  e.token_ids = std::move(prompt_ids);
  e.token_ids.insert(e.token_ids.end(), answer_ids.begin(), answer_ids.end());
  return e;
}

void ensure_train_only(std::span<const bench::AssertionItem> items,
                       const corpus::SplitAssignment& split, std::string_view stage) {
  for (const auto& it : items) {
    if (it.split != corpus::Split::Train || split.at(it.guideline_id) != corpus::Split::Train) {
      throw Error(ErrorCode::LeakageViolation,
                  std::string(stage) + " refuses test-split item '" + it.item_id +
                      "' (guideline '" + it.guideline_id + "')");
    }
  }
}

std::vector<SftExample> build_sft_dataset(std::span<const bench::AssertionItem> items,
                                          const corpus::SplitAssignment& split,
                                          std::span<const corpus::TruncatedGuideline> guidelines,
                                          const llm::Backend& teacher,
                                          std::string_view teacher_template,
                                          std::string_view student_template,
                                          const Tokenizer& tokenizer, const SftOptions& opts) {
  ensure_train_only(items, split, "build-sft");
  if (items.empty()) throw Error(ErrorCode::EmptyBatch, "no items for SFT");
  if (!has_placeholder(teacher_template, "statement") ||
      !has_placeholder(teacher_template, "guideline")) {
    throw Error(ErrorCode::Config, "SFT teacher template needs {guideline} and {statement}");
  }
  if (!has_placeholder(student_template, "statement")) {
    throw Error(ErrorCode::Config, "SFT student template needs {statement}");
  }
  std::vector<llm::ChatRequest> requests;
  for (const auto& it : items) {
    const auto& g = find_guideline(guidelines, it.guideline_id);
    llm::ChatRequest r;
    r.model_id = opts.teacher_model_id;
    r.temperature = 0.0;
    r.max_output_tokens = opts.max_output_tokens;
    r.messages.push_back(
        {llm::Role::User,
         fill_template(teacher_template, {{"guideline", g.text}, {"statement", it.statement}})});
    requests.push_back(std::move(r));
  }
  const auto outcomes = llm::complete_batch(requests, teacher, opts.max_in_flight);
  std::vector<SftExample> out;
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    if (!outcomes[i].ok()) {
      throw Error(ErrorCode::BackendError, "teacher failed on item '" + it.item_id +
                                               "': " + outcomes[i].error->what());
    }
    const auto& answer = outcomes[i].response->content;
    const auto v = eval::extract_verdict(answer);
    const auto gold = it.label == bench::Label::True ? eval::Verdict::True : eval::Verdict::False;
    if (v != gold) ++mismatched;
    out.push_back(make_sft_example(
        it.item_id, fill_template(student_template, {{"statement", it.statement}}), answer,
        tokenizer));
  }
  if (mismatched != 0) {
    log_warning("build-sft: " + std::to_string(mismatched) + " of " +
                std::to_string(items.size()) + " teacher answers disagree with the gold label");
  }
  return out;
}

std::size_t replay_count(std::size_t n_domain, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "replay fraction must lie in [0, 1)");
  }
  return static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(n_domain) / (1.0 - fraction) + 1e-9));
}

std::vector<TextDoc> mix_replay(std::span<const TextDoc> domain, std::span<const TextDoc> replay,
                                double fraction, std::uint64_t seed) {
  const auto n_replay = replay_count(domain.size(), fraction);
  if (replay.size() < n_replay) {
    throw Error(ErrorCode::InsufficientReplay,
                "replay pool holds " + std::to_string(replay.size()) + " documents, " +
                    std::to_string(n_replay) + " needed");
  }
  std::vector<TextDoc> pool(replay.begin(), replay.end());
  std::stable_sort(pool.begin(), pool.end(),
                   [](const auto& a, const auto& b) { return a.key < b.key; });
  deterministic_shuffle(std::span<TextDoc>(pool), derive_seed(seed, "replay-sample"));
  std::vector<TextDoc> out(domain.begin(), domain.end());
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return a.key < b.key; });
  for (auto& d : out) d.source = "domain";
  for (std::size_t i = 0; i < n_replay; ++i) {
    pool[i].source = "replay";
    out.push_back(std::move(pool[i]));
  }
  deterministic_shuffle(std::span<TextDoc>(out), derive_seed(seed, "replay-mix"));
  return out;
}

Json RewardSpec::to_json() const {
  Json j;
  j["min_reasoning_words"] = min_reasoning_words;
  j["correct_reward"] = correct_reward;
  j["incorrect_reward"] = incorrect_reward;
  return j;
}

RewardSpec RewardSpec::from_json(const Json& j) {
  RewardSpec r;
  if (j.contains("min_reasoning_words")) {
    const auto v = j["min_reasoning_words"].get<std::int64_t>();
    if (v < 0) throw Error(ErrorCode::Config, "min_reasoning_words must be >= 0");
    r.min_reasoning_words = static_cast<std::size_t>(v);
  }
  if (j.contains("correct_reward")) r.correct_reward = j["correct_reward"].get<double>();
  if (j.contains("incorrect_reward")) r.incorrect_reward = j["incorrect_reward"].get<double>();
  return r;
}

std::size_t reasoning_words(std::string_view completion) noexcept {
  const auto n = count_words(completion);
  if (n == 0) return 0;
  return eval::extract_verdict(completion) == eval::Verdict::Abstain ? n : n - 1;
}

double compute_reward(std::string_view completion, bench::Label gold,
                      const RewardSpec& spec) noexcept {
  const auto v = eval::extract_verdict(completion);
  if (v == eval::Verdict::Abstain) return spec.incorrect_reward;
  const bool right = (v == eval::Verdict::True) == (gold == bench::Label::True);
  if (!right) return spec.incorrect_reward;
  return reasoning_words(completion) >= spec.min_reasoning_words ? spec.correct_reward
                                                                 : spec.incorrect_reward;
}

std::vector<double> compute_group_advantages(std::span<const double> rewards) {
  if (rewards.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "a reward group needs at least two completions");
  }
  std::vector<double> adv(rewards.size(), 0.0);
  if (std::all_of(rewards.begin(), rewards.end(), [&](double r) { return r == rewards[0]; })) {
    return adv;
  }
  const auto n = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (const auto r : rewards) mean += r;
  mean /= n;
  double var = 0.0;
  for (const auto r : rewards) var += (r - mean) * (r - mean);
  const double sd = std::sqrt(var / n);
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    adv[i] = (rewards[i] - mean) / (sd + kAdvantageEpsilon);
  }
  return adv;
}

Json RolloutGroup::to_json() const {
  Json j;
  j["prompt_id"] = prompt_id;
  j["gold_label"] = bench::to_string(gold_label);
  j["prompt"] = prompt;
  j["completions"] = completions;
  j["errored"] = mask_json(errored);
  j["rewards"] = rewards;
  j["advantages"] = advantages;
  return j;
}

std::vector<RolloutGroup> build_rollout_groups(std::span<const bench::AssertionItem> items,
                                               const corpus::SplitAssignment& split,
                                               const llm::Backend& policy,
                                               std::string_view prompt_template,
                                               const RolloutOptions& opts) {
  ensure_train_only(items, split, "rollouts");
  if (items.empty()) throw Error(ErrorCode::EmptyBatch, "no items for rollouts");
  if (opts.group_size < 2) throw Error(ErrorCode::InvalidArgument, "group_size must be >= 2");
  if (!has_placeholder(prompt_template, "statement")) {
    throw Error(ErrorCode::Config, "rollout prompt template lacks {statement}");
  }
  std::vector<RolloutGroup> groups;
  std::vector<llm::ChatRequest> requests;
  for (const auto& it : items) {
    RolloutGroup g;
    g.prompt_id = it.item_id;
    g.gold_label = it.label;
    g.prompt = fill_template(prompt_template, {{"statement", it.statement}});
    for (std::size_t k = 0; k < opts.group_size; ++k) {
      llm::ChatRequest r;
      r.model_id = opts.model_id;
      r.temperature = opts.temperature;
      r.max_output_tokens = opts.max_completion_tokens;
      r.seed = static_cast<std::int64_t>(
          derive_seed(opts.seed, it.item_id + "/" + std::to_string(k)) >> 1);
      r.messages.push_back({llm::Role::User, g.prompt});
      requests.push_back(std::move(r));
    }
    groups.push_back(std::move(g));
  }
  const auto outcomes = llm::complete_batch(requests, policy, opts.max_in_flight);
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    auto& g = groups[gi];
    for (std::size_t k = 0; k < opts.group_size; ++k) {
      const auto& o = outcomes[gi * opts.group_size + k];
      if (o.ok()) {
        g.completions.push_back(o.response->content);
        g.errored.push_back(false);
        g.rewards.push_back(compute_reward(o.response->content, g.gold_label, opts.reward));
      } else {
        g.completions.emplace_back();
        g.errored.push_back(true);
        g.rewards.push_back(0.0);
      }
    }
    g.advantages = compute_group_advantages(g.rewards);
  }
  return groups;
}

std::string_view to_string(Stage s) noexcept {
  switch (s) {
    case Stage::CPT: return "cpt";
    case Stage::SFT: return "sft";
    case Stage::GRPO: return "grpo";
  }
  return "cpt";
}

Stage parse_stage(std::string_view s) {
  if (s == "cpt") return Stage::CPT;
  if (s == "sft") return Stage::SFT;
  if (s == "grpo") return Stage::GRPO;
  throw Error(ErrorCode::InvalidArgument, "unknown training stage '" + std::string(s) + "'");
}

Json TrainingConfig::to_json() const {
  Json j;
  j["stage"] = to_string(stage);
  for (const auto& [k, v] : params.items()) j[k] = v;
  return j;
}

TrainingConfig export_training_config(Stage stage, const RewardSpec& reward) {
  TrainingConfig c;
  c.stage = stage;
  auto& p = c.params;
  switch (stage) {
    case Stage::CPT:
      p["objective"] = "causal_lm";
      p["epochs"] = 3;
      p["lr_schedule"] = "cosine";
      p["peak_learning_rate"] = 5e-5;
      p["min_learning_rate_ratio"] = 0.1;
      p["warmup_ratio"] = 1.0 / 3.0;
      p["optimizer"] = {{"name", "adamw"}, {"beta1", 0.9}, {"beta2", 0.95}};
      p["batch_size"] = 32;
      p["max_seq_length"] = kCptMaxLength;
      p["loss_mask"] = "all_tokens";
      break;
    case Stage::SFT:
      p["learning_rate"] = 3e-5;
      p["optimizer"] = {{"name", "adamw"}};
      p["batch_size"] = 64;
      p["loss_mask"] = "assistant_only";
      break;
    case Stage::GRPO:
      p["lora"] = {{"r", 32}, {"alpha", 64}, {"target_modules", "all-linear"}};
      p["epochs"] = 5;
      p["group_size"] = 16;
      p["max_completion_length"] = 512;
      p["batch_size"] = 128;
      p["kl_beta"] = 0.0;
      p["epsilon"] = 0.2;
      p["epsilon_high"] = 0.28;
      p["advantage"] = {{"std", "population"}, {"epsilon", kAdvantageEpsilon}};
      p["reward"] = reward.to_json();
      break;
  }
  return c;
}

void write_packed_jsonl(const std::filesystem::path& p, std::span<const PackedSequence> seqs) {
  std::vector<Json> rows;
  for (const auto& s : seqs) rows.push_back(s.to_json());
  write_jsonl(p, rows);
}

void write_sft_jsonl(const std::filesystem::path& p, std::span<const SftExample> examples) {
  std::vector<Json> rows;
  for (const auto& e : examples) rows.push_back(e.to_json());
  write_jsonl(p, rows);
}

void write_rollouts_jsonl(const std::filesystem::path& p, std::span<const RolloutGroup> groups) {
  std::vector<Json> rows;
  for (const auto& g : groups) rows.push_back(g.to_json());
  write_jsonl(p, rows);
}

void write_text_docs_jsonl(const std::filesystem::path& p, std::span<const TextDoc> docs) {
  std::vector<Json> rows;
  for (const auto& d : docs) rows.push_back(d.to_json());
  write_jsonl(p, rows);
}

std::vector<TextDoc> read_text_docs_jsonl(const std::filesystem::path& p,
                                          std::string_view default_source) {
  std::vector<TextDoc> out;
  for (const auto& j : read_jsonl(p)) out.push_back(TextDoc::from_json(j, default_source));
  return out;
}

}  // namespace guidekit::train
