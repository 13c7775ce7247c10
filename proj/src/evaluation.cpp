#include "guidekit/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <map>
#include <mutex>
#include <set>

#include "guidekit/error.hpp"
#include "guidekit/prompts.hpp"
#include "guidekit/utf8.hpp"

namespace guidekit::eval {

namespace {

// Malformed sequences decode to U+FFFD one byte at a time.
std::u32string decode_lenient(std::string_view s) {
  if (utf8::is_valid(s)) return utf8::decode(s);
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = b < 0x80 ? 1 : (b >> 5) == 0x6 ? 2 : (b >> 4) == 0xE ? 3 : (b >> 3) == 0x1E ? 4 : 0;
    if (len != 0 && i + len <= s.size() && utf8::is_valid(s.substr(i, len))) {
      out += utf8::decode(s.substr(i, len));
      i += len;
    } else {
      out.push_back(U'�');
      ++i;
    }
  }
  return out;
}

// Lowercase, accents stripped, combining marks dropped.
std::u32string fold(std::string_view text) {
  std::u32string out;
  for (const auto cp : decode_lenient(text)) {
    if (utf8::is_combining_mark(cp)) continue;
    out.push_back(utf8::strip_accent(utf8::to_lower(cp)));
  }
  return out;
}

bool word_start(const std::u32string& s, std::size_t i) {
  return i == 0 || !utf8::is_alnum(s[i - 1]);
}

// The word ending right before `end`, skipping separators.
std::u32string previous_word(const std::u32string& s, std::size_t end, std::size_t* start_out) {
  std::size_t e = end;
  while (e > 0 && !utf8::is_alnum(s[e - 1])) --e;
  std::size_t b = e;
  while (b > 0 && utf8::is_alnum(s[b - 1])) --b;
  if (start_out) *start_out = b;
  return s.substr(b, e - b);
}

bool negated_at(const std::u32string& s, std::size_t pos) {
  std::size_t start = 0;
  auto w = previous_word(s, pos, &start);
  // Allow one copula in between: "não é verdadeiro", "não está correta".
  if (w == U"e" || w == U"eh" || w == U"esta" || w == U"sao" || w == U"seja") {
    w = previous_word(s, start, &start);
  }
  return w == U"nao";
}

template <typename T>
T get_field(const Json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Parse, std::string("record lacks field '") + name + "'");
  }
}

std::optional<std::string> get_optional_string(const Json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

void temperature_zero_warning(const EvalOptions& opts, std::string_view task) {
  if (opts.temperature != 0.0) {
    log_warning(std::string(task) + ": temperature " + std::to_string(opts.temperature) +
                " overridden to 0 (evaluation is greedy)");
  }
}

// Records per-request wall time, keyed by request fingerprint.
class TimedBackend final : public llm::Backend {
 public:
  explicit TimedBackend(const llm::Backend& inner) : inner_(inner) {}

  llm::ChatResponse chat(const llm::ChatRequest& request) const override {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = inner_.chat(request);
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    std::lock_guard lock(mu_);
    seconds_[llm::fingerprint(request)] = dt.count();
    return r;
  }
  std::vector<std::vector<double>> embed_raw(std::span<const std::string> texts,
                                             std::string_view model_id) const override {
    return inner_.embed_raw(texts, model_id);
  }
  bool is_remote() const noexcept override { return inner_.is_remote(); }
  std::size_t max_in_flight() const noexcept override { return inner_.max_in_flight(); }

  double seconds(const llm::ChatRequest& request) const {
    std::lock_guard lock(mu_);
    const auto it = seconds_.find(llm::fingerprint(request));
    return it == seconds_.end() ? 0.0 : it->second;
  }

 private:
  const llm::Backend& inner_;
  mutable std::mutex mu_;
  mutable std::map<std::string, double> seconds_;
};

llm::ChatRequest make_request(std::string prompt, const EvalOptions& opts) {
  llm::ChatRequest r;
  r.model_id = opts.model_id;
  r.temperature = 0.0;
  r.max_output_tokens = opts.max_output_tokens;
  r.seed = opts.seed;
  r.messages.push_back({llm::Role::User, std::move(prompt)});
  return r;
}

std::vector<ModelAnswer> run_batch(const std::vector<std::string>& ids,
                                   const std::vector<llm::ChatRequest>& requests,
                                   const llm::Backend& backend, std::size_t max_in_flight,
                                   bool with_verdict) {
  const TimedBackend timed(backend);
  const auto outcomes = llm::complete_batch(requests, timed, max_in_flight);
  std::vector<ModelAnswer> out;
  out.reserve(outcomes.size());
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    ModelAnswer a;
    a.item_id = ids[i];
    if (outcomes[i].ok()) {
      a.raw_text = outcomes[i].response->content;
    } else {
      a.error = outcomes[i].error->what();
    }
    a.latency_seconds = timed.seconds(requests[i]);
    if (with_verdict) {
      const auto d = extract_verdict_detailed(a.raw_text);
      a.verdict = d.verdict;
      a.audit = d.audit;
    }
    out.push_back(std::move(a));
  }
  return out;
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

void finalize(SplitReport& r, bool with_true_rate, std::size_t n_pred_true) {
  r.accuracy_excluding = ratio(r.n_correct, r.n_answered);
  r.accuracy_counting = ratio(r.n_correct, r.n_items);
  r.abstention_rate = ratio(r.n_abstained, r.n_items);
  if (with_true_rate) r.predicted_true_rate = ratio(n_pred_true, r.n_answered);
}

struct Tally {
  SplitReport report;
  std::size_t n_pred_true = 0;
};

enum class Outcome { Correct, Incorrect, Abstained };

void add(Tally& t, Outcome o, bool predicted_true) {
  ++t.report.n_items;
  if (o == Outcome::Abstained) {
    ++t.report.n_abstained;
    return;
  }
  ++t.report.n_answered;
  ++(o == Outcome::Correct ? t.report.n_correct : t.report.n_incorrect);
  if (predicted_true) ++t.n_pred_true;
}

EvalReport assemble(Task task, AbstentionPolicy policy, std::array<Tally, 2> per_split) {
  EvalReport rep;
  rep.task = task;
  rep.policy = policy;
  const bool tr = task == Task::Assertions;
  Tally all;
  for (const auto& t : per_split) {
    all.report.n_items += t.report.n_items;
    all.report.n_answered += t.report.n_answered;
    all.report.n_correct += t.report.n_correct;
    all.report.n_incorrect += t.report.n_incorrect;
    all.report.n_abstained += t.report.n_abstained;
    all.n_pred_true += t.n_pred_true;
  }
  finalize(per_split[0].report, tr, per_split[0].n_pred_true);
  finalize(per_split[1].report, tr, per_split[1].n_pred_true);
  finalize(all.report, tr, all.n_pred_true);
  rep.train = per_split[0].report;
  rep.test = per_split[1].report;
  rep.all = all.report;
  return rep;
}

std::size_t split_index(corpus::Split s) { return s == corpus::Split::Train ? 0 : 1; }

template <typename Item>
std::map<std::string, const Item*, std::less<>> index_items(std::span<const Item> items) {
  std::map<std::string, const Item*, std::less<>> by_id;
  for (const auto& it : items) {
    if (!by_id.emplace(it.item_id, &it).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate item id '" + it.item_id + "'");
    }
  }
  return by_id;
}

template <typename Answer, typename Item>
std::map<std::string, const Answer*, std::less<>> index_answers(
    std::span<const Answer> answers,
    const std::map<std::string, const Item*, std::less<>>& items) {
  std::map<std::string, const Answer*, std::less<>> by_id;
  for (const auto& a : answers) {
    if (items.find(a.item_id) == items.end()) {
      throw Error(ErrorCode::UnknownItem, "answer for unknown item '" + a.item_id + "'");
    }
    if (!by_id.emplace(a.item_id, &a).second) {
      throw Error(ErrorCode::DuplicateId, "two answers for item '" + a.item_id + "'");
    }
  }
  return by_id;
}

std::string percent_cell(const std::optional<EvalReport>& r, corpus::Split s) {
  if (!r) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", 100.0 * r->accuracy(s));
  return buf;
}

}  // namespace

std::string_view to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::True: return "true";
    case Verdict::False: return "false";
    case Verdict::Abstain: return "abstain";
  }
  return "abstain";
}

Verdict parse_verdict(std::string_view s) {
  if (s == "true") return Verdict::True;
  if (s == "false") return Verdict::False;
  if (s == "abstain") return Verdict::Abstain;
  throw Error(ErrorCode::Parse, "unknown verdict '" + std::string(s) + "'");
}

VerdictDetail extract_verdict_detailed(std::string_view text) noexcept {
  static const std::u32string kTrue = U"verdadeir";
  static const std::u32string kFalse = U"fals";
  VerdictDetail d;
  std::u32string folded;
  try {
    folded = fold(text);
  } catch (...) {
    return d;
  }
  bool saw_true = false;
  bool saw_false = false;
  for (std::size_t i = 0; i < folded.size(); ++i) {
    if (!word_start(folded, i)) continue;
    if (folded.compare(i, kTrue.size(), kTrue) == 0) {
      saw_true = true;
      d.verdict = Verdict::True;
      d.position = i;
    } else if (folded.compare(i, kFalse.size(), kFalse) == 0) {
      saw_false = true;
      d.verdict = Verdict::False;
      d.position = i;
    }
  }
  d.audit.both_stems = saw_true && saw_false;
  if (d.verdict != Verdict::Abstain) d.audit.negated = negated_at(folded, d.position);
  return d;
}

Verdict extract_verdict(std::string_view text) noexcept {
  return extract_verdict_detailed(text).verdict;
}

Json ModelAnswer::to_json() const {
  Json j;
  j["item_id"] = item_id;
  j["raw_text"] = raw_text;
  if (verdict) j["verdict"] = to_string(*verdict);
  if (error) j["error"] = *error;
  if (audit.flagged()) {
    j["audit"] = {{"both_stems", audit.both_stems}, {"negated", audit.negated}};
  }
  return j;
}

ModelAnswer ModelAnswer::from_json(const Json& j) {
  ModelAnswer a;
  a.item_id = get_field<std::string>(j, "item_id");
  a.raw_text = get_field<std::string>(j, "raw_text");
  a.error = get_optional_string(j, "error");
  if (j.contains("verdict")) {
    const auto d = extract_verdict_detailed(a.raw_text);
    a.verdict = d.verdict;
    a.audit = d.audit;
  }
  return a;
}

std::vector<ModelAnswer> run_assertion_eval(std::span<const bench::AssertionItem> items,
                                            const llm::Backend& backend,
                                            std::string_view prompt_template,
                                            const EvalOptions& opts,
                                            const PromptAugmenter& augment) {
  if (!has_placeholder(prompt_template, "statement")) {
    throw Error(ErrorCode::Config, "true/false prompt template lacks {statement}");
  }
  if (items.empty()) throw Error(ErrorCode::EmptyBatch, "no items to evaluate");
  temperature_zero_warning(opts, "eval-tf");
  std::vector<std::string> ids;
  std::vector<llm::ChatRequest> requests;
  for (const auto& it : items) {
    auto prompt = fill_template(prompt_template, {{"statement", it.statement}});
    if (augment) prompt = augment(it.statement, prompt);
    ids.push_back(it.item_id);
    requests.push_back(make_request(std::move(prompt), opts));
  }
  return run_batch(ids, requests, backend, opts.max_in_flight, true);
}

std::vector<ModelAnswer> run_qa_eval(std::span<const bench::QAItem> items,
                                     const llm::Backend& backend,
                                     std::string_view prompt_template, const EvalOptions& opts,
                                     const PromptAugmenter& augment) {
  if (!has_placeholder(prompt_template, "question")) {
    throw Error(ErrorCode::Config, "open-question prompt template lacks {question}");
  }
  if (items.empty()) throw Error(ErrorCode::EmptyBatch, "no items to evaluate");
  temperature_zero_warning(opts, "eval-qa");
  std::vector<std::string> ids;
  std::vector<llm::ChatRequest> requests;
  for (const auto& it : items) {
    auto prompt = fill_template(prompt_template, {{"question", it.question}});
    if (augment) prompt = augment(it.question, prompt);
    ids.push_back(it.item_id);
    requests.push_back(make_request(std::move(prompt), opts));
  }
  return run_batch(ids, requests, backend, opts.max_in_flight, false);
}

std::string_view to_string(JudgeOutcome o) noexcept {
  switch (o) {
    case JudgeOutcome::Correct: return "correct";
    case JudgeOutcome::Incorrect: return "incorrect";
    case JudgeOutcome::Unparseable: return "unparseable";
  }
  return "unparseable";
}

JudgeOutcome parse_judge_outcome(std::string_view s) {
  if (s == "correct") return JudgeOutcome::Correct;
  if (s == "incorrect") return JudgeOutcome::Incorrect;
  if (s == "unparseable") return JudgeOutcome::Unparseable;
  throw Error(ErrorCode::Parse, "unknown judge outcome '" + std::string(s) + "'");
}

Json JudgeVerdict::to_json() const {
  Json j;
  j["item_id"] = item_id;
  j["verdict"] = to_string(verdict);
  j["judge_raw"] = judge_raw;
  if (error) j["error"] = *error;
  return j;
}

JudgeVerdict JudgeVerdict::from_json(const Json& j) {
  JudgeVerdict v;
  v.item_id = get_field<std::string>(j, "item_id");
  v.verdict = parse_judge_outcome(get_field<std::string>(j, "verdict"));
  v.judge_raw = get_field<std::string>(j, "judge_raw");
  v.error = get_optional_string(j, "error");
  return v;
}

JudgeOutcome parse_judge_output(std::string_view text) noexcept {
  auto word_char = [](unsigned char c) { return std::isalnum(c) || c >= 0x80 || c == '_'; };
  JudgeOutcome last = JudgeOutcome::Unparseable;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!word_char(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t e = i;
    while (e < text.size() && word_char(static_cast<unsigned char>(text[e]))) ++e;
    std::string w(text.substr(i, e - i));
    for (auto& c : w) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (w == "CORRECT" || w == "CORRETO" || w == "CORRETA") {
      last = JudgeOutcome::Correct;
    } else if (w == "INCORRECT" || w == "INCORRETO" || w == "INCORRETA") {
      last = JudgeOutcome::Incorrect;
    }
    i = e;
  }
  return last;
}

llm::ChatRequest render_judge_request(const bench::QAItem& item, std::string_view answer_text,
                                      std::string_view judge_template,
                                      const JudgeOptions& opts) {
  for (const char* name : {"question", "reference", "answer"}) {
    if (!has_placeholder(judge_template, name)) {
      throw Error(ErrorCode::Config, std::string("judge prompt template lacks {") + name + "}");
    }
  }
  llm::ChatRequest r;
  r.model_id = opts.model_id;
  r.temperature = 0.0;
  r.max_output_tokens = opts.max_output_tokens;
  r.messages.push_back({llm::Role::User,
                        fill_template(judge_template, {{"question", item.question},
                                                       {"reference", item.reference_answer},
                                                       {"answer", answer_text}})});
  return r;
}

JudgeVerdict judge_open_answer(const bench::QAItem& item, std::string_view answer_text,
                               const llm::Backend& judge, std::string_view judge_template,
                               const JudgeOptions& opts) {
  JudgeVerdict v;
  v.item_id = item.item_id;
  const auto request = render_judge_request(item, answer_text, judge_template, opts);
  if (answer_text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    v.verdict = JudgeOutcome::Incorrect;
    return v;
  }
  try {
    v.judge_raw = llm::complete(request, judge).content;
    v.verdict = parse_judge_output(v.judge_raw);
  } catch (const Error& e) {
    v.verdict = JudgeOutcome::Unparseable;
    v.error = e.what();
  }
  return v;
}

std::vector<JudgeVerdict> judge_answers(std::span<const bench::QAItem> items,
                                        std::span<const ModelAnswer> answers,
                                        const llm::Backend& judge,
                                        std::string_view judge_template,
                                        const JudgeOptions& opts) {
  if (items.empty()) throw Error(ErrorCode::EmptyBatch, "no items to judge");
  const auto by_item = index_items(items);
  const auto by_answer = index_answers<ModelAnswer>(answers, by_item);

  std::vector<JudgeVerdict> out(items.size());
  std::vector<llm::ChatRequest> requests;
  std::vector<std::size_t> slots;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& item = items[i];
    auto& v = out[i];
    v.item_id = item.item_id;
    const auto it = by_answer.find(item.item_id);
    if (it == by_answer.end()) {
      v.error = "no candidate answer";
      continue;
    }
    const auto& answer = *it->second;
    if (answer.error) {
      v.error = "candidate failed: " + *answer.error;
      continue;
    }
    auto request = render_judge_request(item, answer.raw_text, judge_template, opts);
    if (answer.raw_text.find_first_not_of(" \t\r\n") == std::string::npos) {
      v.verdict = JudgeOutcome::Incorrect;
      continue;
    }
    requests.push_back(std::move(request));
    slots.push_back(i);
  }
  if (!requests.empty()) {
    const auto outcomes = llm::complete_batch(requests, judge, opts.max_in_flight);
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
      auto& v = out[slots[r]];
      if (outcomes[r].ok()) {
        v.judge_raw = outcomes[r].response->content;
        v.verdict = parse_judge_output(v.judge_raw);
      } else {
        v.error = outcomes[r].error->what();
      }
    }
  }
  return out;
}

std::string_view to_string(AbstentionPolicy p) noexcept {
  return p == AbstentionPolicy::ExcludeFromDenominator ? "exclude_from_denominator"
                                                       : "count_as_incorrect";
}

AbstentionPolicy parse_abstention_policy(std::string_view s) {
  if (s == "exclude_from_denominator" || s == "exclude") {
    return AbstentionPolicy::ExcludeFromDenominator;
  }
  if (s == "count_as_incorrect" || s == "incorrect") return AbstentionPolicy::CountAsIncorrect;
  throw Error(ErrorCode::Config, "unknown abstention policy '" + std::string(s) + "'");
}

Json SplitReport::to_json(AbstentionPolicy p) const {
  Json j;
  j["n_items"] = n_items;
  j["n_answered"] = n_answered;
  j["n_correct"] = n_correct;
  j["n_incorrect"] = n_incorrect;
  j["n_abstained"] = n_abstained;
  j["accuracy"] = accuracy(p);
  j["accuracy_excluding_abstentions"] = accuracy_excluding;
  j["accuracy_counting_abstentions"] = accuracy_counting;
  j["abstention_rate"] = abstention_rate;
  if (predicted_true_rate) j["predicted_true_rate"] = *predicted_true_rate;
  return j;
}

SplitReport SplitReport::from_json(const Json& j) {
  SplitReport r;
  r.n_items = get_field<std::size_t>(j, "n_items");
  r.n_answered = get_field<std::size_t>(j, "n_answered");
  r.n_correct = get_field<std::size_t>(j, "n_correct");
  r.n_incorrect = get_field<std::size_t>(j, "n_incorrect");
  r.n_abstained = get_field<std::size_t>(j, "n_abstained");
  r.accuracy_excluding = get_field<double>(j, "accuracy_excluding_abstentions");
  r.accuracy_counting = get_field<double>(j, "accuracy_counting_abstentions");
  r.abstention_rate = get_field<double>(j, "abstention_rate");
  if (j.contains("predicted_true_rate")) r.predicted_true_rate = j["predicted_true_rate"].get<double>();
  return r;
}

Json EvalReport::to_json() const {
  Json j;
  j["task"] = task == Task::Assertions ? "assertions" : "open_qa";
  j["abstention_policy"] = eval::to_string(policy);
  j["train"] = train.to_json(policy);
  j["test"] = test.to_json(policy);
  j["all"] = all.to_json(policy);
  return j;
}

EvalReport EvalReport::from_json(const Json& j) {
  EvalReport r;
  const auto task = get_field<std::string>(j, "task");
  if (task == "assertions") {
    r.task = Task::Assertions;
  } else if (task == "open_qa") {
    r.task = Task::OpenQA;
  } else {
    throw Error(ErrorCode::Parse, "unknown task '" + task + "'");
  }
  r.policy = parse_abstention_policy(get_field<std::string>(j, "abstention_policy"));
  r.train = SplitReport::from_json(j.at("train"));
  r.test = SplitReport::from_json(j.at("test"));
  r.all = SplitReport::from_json(j.at("all"));
  return r;
}

EvalReport score_assertions(std::span<const ModelAnswer> answers,
                            std::span<const bench::AssertionItem> items,
                            AbstentionPolicy policy) {
  const auto by_item = index_items(items);
  const auto by_answer = index_answers<ModelAnswer>(answers, by_item);
  std::array<Tally, 2> tallies;
  for (const auto& item : items) {
    auto& t = tallies[split_index(item.split)];
    const auto it = by_answer.find(item.item_id);
    if (it == by_answer.end() || it->second->error) {
      add(t, Outcome::Abstained, false);
      continue;
    }
    const auto& a = *it->second;
    const auto v = a.verdict.value_or(extract_verdict(a.raw_text));
    if (v == Verdict::Abstain) {
      add(t, Outcome::Abstained, false);
      continue;
    }
    const bool says_true = v == Verdict::True;
    const bool right = says_true == (item.label == bench::Label::True);
    add(t, right ? Outcome::Correct : Outcome::Incorrect, says_true);
  }
  return assemble(Task::Assertions, policy, tallies);
}

EvalReport score_judgements(std::span<const JudgeVerdict> verdicts,
                            std::span<const bench::QAItem> items, AbstentionPolicy policy) {
  const auto by_item = index_items(items);
  const auto by_verdict = index_answers<JudgeVerdict>(verdicts, by_item);
  std::array<Tally, 2> tallies;
  for (const auto& item : items) {
    auto& t = tallies[split_index(item.split)];
    const auto it = by_verdict.find(item.item_id);
    const auto o = it == by_verdict.end() ? JudgeOutcome::Unparseable : it->second->verdict;
    add(t,
        o == JudgeOutcome::Correct     ? Outcome::Correct
        : o == JudgeOutcome::Incorrect ? Outcome::Incorrect
                                       : Outcome::Abstained,
        false);
  }
  return assemble(Task::OpenQA, policy, tallies);
}

std::string format_results_table(std::span<const ResultRow> rows) {
  static const std::array<const char*, 4> kHeads = {"HB Train", "HB Test", "PCDT Train",
                                                    "PCDT Test"};
  std::size_t name_w = 3;
  for (const auto& r : rows) name_w = std::max(name_w, utf8::length(r.name));
  constexpr std::size_t kCol = 12;
  auto pad_right = [](std::string s, std::size_t w) {
    const auto n = utf8::length(s);
    if (n < w) s.append(w - n, ' ');
    return s;
  };
  auto pad_left = [](const std::string& s, std::size_t w) {
    const auto n = utf8::length(s);
    return n < w ? std::string(w - n, ' ') + s : s;
  };
  std::string out = pad_right("Run", name_w);
  for (const auto* h : kHeads) out += pad_left(h, kCol);
  out += '\n';
  out += std::string(name_w + kHeads.size() * kCol, '-');
  out += '\n';
  for (const auto& r : rows) {
    out += pad_right(r.name, name_w);
    out += pad_left(percent_cell(r.assertions, corpus::Split::Train), kCol);
    out += pad_left(percent_cell(r.assertions, corpus::Split::Test), kCol);
    out += pad_left(percent_cell(r.open_qa, corpus::Split::Train), kCol);
    out += pad_left(percent_cell(r.open_qa, corpus::Split::Test), kCol);
    out += '\n';
  }
  return out;
}

void write_answers_jsonl(const std::filesystem::path& p, std::span<const ModelAnswer> answers) {
  std::vector<Json> rows;
  for (const auto& a : answers) rows.push_back(a.to_json());
  write_jsonl(p, rows);
}

std::vector<ModelAnswer> read_answers_jsonl(const std::filesystem::path& p) {
  std::vector<ModelAnswer> out;
  for (const auto& j : read_jsonl(p)) out.push_back(ModelAnswer::from_json(j));
  return out;
}

void write_judgements_jsonl(const std::filesystem::path& p,
                            std::span<const JudgeVerdict> verdicts) {
  std::vector<Json> rows;
  for (const auto& v : verdicts) rows.push_back(v.to_json());
  write_jsonl(p, rows);
}

std::vector<JudgeVerdict> read_judgements_jsonl(const std::filesystem::path& p) {
  std::vector<JudgeVerdict> out;
  for (const auto& j : read_jsonl(p)) out.push_back(JudgeVerdict::from_json(j));
  return out;
}

}  // namespace guidekit::eval
