#include "guidekit/benchmarks.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <optional>
#include <set>

#include "guidekit/error.hpp"
#include "guidekit/prompts.hpp"
#include "guidekit/random.hpp"

namespace guidekit::bench {

namespace {

std::string upper_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string_view strip_markup(std::string_view s) {
  s = trim(s);
  while (!s.empty() && (s.front() == '*' || s.front() == '#' || s.front() == '-' ||
                        s.front() == ' ')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == '*' || s.back() == ' ')) s.remove_suffix(1);
  return s;
}

struct Block {
  std::size_t number = 0;
  std::map<std::string, std::string> fields;
};

[[noreturn]] void unparseable(std::string_view gid, const std::string& why) {
  throw Error(ErrorCode::UnparseableGeneration,
              "generation for '" + std::string(gid) + "' is unparseable: " + why);
}

// Splits a response into "[<WORD> n]" blocks of "LABEL: value" fields.
std::vector<Block> parse_blocks(std::string_view response, std::string_view word,
                                const std::set<std::string>& labels, std::string_view gid) {
  std::vector<Block> blocks;
  std::string* current = nullptr;
  std::size_t pos = 0;
  while (pos <= response.size()) {
    auto end = response.find('\n', pos);
    if (end == std::string_view::npos) end = response.size();
    const auto raw = response.substr(pos, end - pos);
    pos = end + 1;
    const auto line = strip_markup(raw);
    if (!line.empty()) {
      if (line.front() == '[' && line.back() == ']') {
        const auto inner = upper_ascii(trim(line.substr(1, line.size() - 2)));
        const auto w = upper_ascii(word);
        if (inner.rfind(w, 0) == 0) {
          const auto num = trim(std::string_view(inner).substr(w.size()));
          if (num.empty() || !std::all_of(num.begin(), num.end(),
                                          [](char c) { return std::isdigit(
                                                           static_cast<unsigned char>(c)); })) {
            unparseable(gid, "bad block header '" + std::string(line) + "'");
          }
          Block b;
          b.number = std::stoul(std::string(num));
          blocks.push_back(std::move(b));
          current = nullptr;
          if (end == response.size()) break;
          continue;
        }
      }
      const auto colon = line.find(':');
      std::optional<std::string> label;
      if (colon != std::string_view::npos) {
        auto l = upper_ascii(strip_markup(line.substr(0, colon)));
        if (labels.count(l) != 0) label = std::move(l);
      }
      if (label) {
        if (blocks.empty()) unparseable(gid, "field before the first block header");
        auto& fields = blocks.back().fields;
        if (fields.count(*label) != 0) {
          unparseable(gid, "field " + *label + " repeated in block " +
                               std::to_string(blocks.back().number));
        }
        current = &fields[*label];
        *current = std::string(strip_markup(line.substr(colon + 1)));
      } else if (current != nullptr) {
        if (!current->empty()) current->push_back(' ');
        current->append(line);
      } else if (!blocks.empty()) {
        unparseable(gid, "stray text in block " + std::to_string(blocks.back().number));
      }
      // Text before the first header is tolerated.
    }
    if (end == response.size()) break;
  }
  return blocks;
}

void check_numbering(const std::vector<Block>& blocks, std::size_t n, std::string_view gid) {
  if (blocks.size() != n) {
    unparseable(gid, "expected " + std::to_string(n) + " blocks, found " +
                         std::to_string(blocks.size()));
  }
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (blocks[i].number != i + 1) {
      unparseable(gid, "blocks must be numbered 1.." + std::to_string(n));
    }
  }
}

const std::string* field(const Block& b, const char* name) {
  const auto it = b.fields.find(name);
  return it == b.fields.end() ? nullptr : &it->second;
}

std::string two_digits(std::size_t k) {
  return k < 10 ? "0" + std::to_string(k) : std::to_string(k);
}

Json counts_json(const SplitCounts& c) {
  Json j;
  j["n_guidelines"] = c.n_guidelines;
  j["n_assertions"] = c.n_assertions;
  j["n_true"] = c.n_true;
  j["n_false"] = c.n_false;
  j["n_questions"] = c.n_questions;
  j["n_broad"] = c.n_broad;
  j["n_specific"] = c.n_specific;
  return j;
}

template <typename T>
T get_field(const Json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Parse, std::string("record lacks field '") + name + "'");
  }
}

}  // namespace

std::string_view to_string(Label l) noexcept { return l == Label::True ? "true" : "false"; }

std::string_view to_string(PerturbedDetail d) noexcept {
  switch (d) {
    case PerturbedDetail::Dosage: return "dosage";
    case PerturbedDetail::Route: return "route";
    case PerturbedDetail::Interval: return "interval";
    case PerturbedDetail::Other: return "other";
  }
  return "other";
}

std::string_view to_string(QuestionKind k) noexcept {
  return k == QuestionKind::Broad ? "broad" : "specific";
}

Label parse_label(std::string_view s) {
  const auto u = upper_ascii(s);
  if (u == "TRUE") return Label::True;
  if (u == "FALSE") return Label::False;
  throw Error(ErrorCode::Parse, "unknown label '" + std::string(s) + "'");
}

QuestionKind parse_kind(std::string_view s) {
  const auto u = upper_ascii(trim(s));
  if (u == "BROAD" || u == "AMPLA" || u == "GERAL") return QuestionKind::Broad;
  if (u == "SPECIFIC" || u == "ESPECIFICA" || u == "ESPECÍFICA") return QuestionKind::Specific;
  throw Error(ErrorCode::Parse, "unknown question kind '" + std::string(s) + "'");
}

PerturbedDetail parse_detail(std::string_view s) noexcept {
  const auto u = upper_ascii(trim(s));
  if (u == "DOSAGE" || u == "DOSE" || u == "DOSAGEM") return PerturbedDetail::Dosage;
  if (u == "ROUTE" || u == "VIA") return PerturbedDetail::Route;
  if (u == "INTERVAL" || u == "INTERVALO") return PerturbedDetail::Interval;
  return PerturbedDetail::Other;
}

void AssertionPair::validate() const {
  if (trim(true_statement).empty() || trim(false_statement).empty()) {
    throw Error(ErrorCode::InvariantViolation, "pair " + pair_id + " has an empty statement");
  }
  if (trim(true_statement) == trim(false_statement)) {
    throw Error(ErrorCode::InvariantViolation,
                "pair " + pair_id + " has identical true and false statements");
  }
}

Json AssertionItem::to_json() const {
  Json j;
  j["item_id"] = item_id;
  j["pair_id"] = pair_id;
  j["guideline_id"] = guideline_id;
  j["split"] = corpus::to_string(split);
  j["statement"] = statement;
  j["label"] = to_string(label);
  return j;
}

AssertionItem AssertionItem::from_json(const Json& j) {
  AssertionItem a;
  a.item_id = get_field<std::string>(j, "item_id");
  a.pair_id = get_field<std::string>(j, "pair_id");
  a.guideline_id = get_field<std::string>(j, "guideline_id");
  a.split = corpus::parse_split(get_field<std::string>(j, "split"));
  a.statement = get_field<std::string>(j, "statement");
  a.label = parse_label(get_field<std::string>(j, "label"));
  return a;
}

Json QAItem::to_json() const {
  Json j;
  j["item_id"] = item_id;
  j["guideline_id"] = guideline_id;
  j["split"] = corpus::to_string(split);
  j["question"] = question;
  j["reference_answer"] = reference_answer;
  j["kind"] = to_string(kind);
  return j;
}

QAItem QAItem::from_json(const Json& j) {
  QAItem q;
  q.item_id = get_field<std::string>(j, "item_id");
  q.guideline_id = get_field<std::string>(j, "guideline_id");
  q.split = corpus::parse_split(get_field<std::string>(j, "split"));
  q.question = get_field<std::string>(j, "question");
  q.reference_answer = get_field<std::string>(j, "reference_answer");
  q.kind = parse_kind(get_field<std::string>(j, "kind"));
  return q;
}

Json BenchmarkManifest::to_json() const {
  Json j;
  j["generator_model_id"] = generator_model_id;
  j["seed"] = seed;
  j["train"] = counts_json(train);
  j["test"] = counts_json(test);
  return j;
}

std::vector<AssertionPair> parse_assertion_pairs(std::string_view response,
                                                 std::string_view guideline_id,
                                                 std::size_t n_pairs) {
  static const std::set<std::string> kLabels = {"TRUE", "FALSE", "DETAIL"};
  const auto blocks = parse_blocks(response, "PAIR", kLabels, guideline_id);
  check_numbering(blocks, n_pairs, guideline_id);
  std::vector<AssertionPair> pairs;
  for (const auto& b : blocks) {
    const auto* t = field(b, "TRUE");
    const auto* f = field(b, "FALSE");
    if (t == nullptr || f == nullptr || t->empty() || f->empty()) {
      unparseable(guideline_id, "pair " + std::to_string(b.number) + " lacks TRUE or FALSE");
    }
    AssertionPair p;
    p.guideline_id = std::string(guideline_id);
    p.pair_id = p.guideline_id + "-p" + two_digits(b.number);
    p.true_statement = *t;
    p.false_statement = *f;
    const auto* d = field(b, "DETAIL");
    p.perturbed_detail = d ? parse_detail(*d) : PerturbedDetail::Other;
    p.validate();
    pairs.push_back(std::move(p));
  }
  return pairs;
}

std::vector<QAItem> parse_qa_items(std::string_view response, std::string_view guideline_id,
                                   Split split, std::size_t n, std::size_t n_broad) {
  static const std::set<std::string> kLabels = {"KIND", "QUESTION", "ANSWER"};
  const auto blocks = parse_blocks(response, "QUESTION", kLabels, guideline_id);
  check_numbering(blocks, n, guideline_id);
  std::vector<QAItem> items;
  std::size_t broad = 0;
  for (const auto& b : blocks) {
    const auto* kind = field(b, "KIND");
    const auto* q = field(b, "QUESTION");
    const auto* a = field(b, "ANSWER");
    const auto num = std::to_string(b.number);
    if (kind == nullptr || q == nullptr || a == nullptr) {
      unparseable(guideline_id, "question " + num + " lacks KIND, QUESTION or ANSWER");
    }
    if (q->empty()) unparseable(guideline_id, "question " + num + " is empty");
    if (a->empty()) {
      throw Error(ErrorCode::InvariantViolation,
                  "question " + num + " of '" + std::string(guideline_id) +
                      "' has an empty reference answer");
    }
    QAItem item;
    try {
      item.kind = parse_kind(*kind);
    } catch (const Error&) {
      unparseable(guideline_id, "question " + num + " has unknown KIND '" + *kind + "'");
    }
    if (item.kind == QuestionKind::Broad) ++broad;
    item.guideline_id = std::string(guideline_id);
    item.item_id = item.guideline_id + "-q" + two_digits(b.number);
    item.split = split;
    item.question = *q;
    item.reference_answer = *a;
    items.push_back(std::move(item));
  }
  if (broad != n_broad) {
    unparseable(guideline_id, "expected " + std::to_string(n_broad) + " BROAD questions, found " +
                                  std::to_string(broad));
  }
  return items;
}

namespace {

constexpr std::size_t kGenerationAttempts = 2;  // first try plus one re-request

llm::ChatRequest render_generator_request(const corpus::TruncatedGuideline& g,
                                          std::string prompt, const GeneratorOptions& opts,
                                          std::string_view purpose, std::size_t attempt) {
  llm::ChatRequest r;
  r.model_id = opts.model_id;
  r.temperature = 0.0;
  r.max_output_tokens = opts.max_output_tokens;
  const auto key = std::string(purpose) + ":" + g.id + ":" + std::to_string(attempt);
  r.seed = static_cast<std::int64_t>(derive_seed(opts.seed, key) >> 1);
  r.messages.push_back({llm::Role::User, std::move(prompt)});
  return r;
}

}  // namespace

llm::ChatRequest render_pairs_request(const corpus::TruncatedGuideline& g, std::string_view tmpl,
                                      const GeneratorOptions& opts, std::size_t attempt) {
  const auto n = std::to_string(opts.n_pairs);
  return render_generator_request(
      g, fill_template(tmpl, {{"guideline", g.text}, {"n_pairs", n}}), opts, "pairs", attempt);
}

llm::ChatRequest render_questions_request(const corpus::TruncatedGuideline& g,
                                          std::string_view tmpl, const GeneratorOptions& opts,
                                          std::size_t attempt) {
  const auto n = std::to_string(opts.n_questions);
  const auto nb = std::to_string(opts.n_broad);
  const auto ns = std::to_string(opts.n_questions - std::min(opts.n_broad, opts.n_questions));
  return render_generator_request(g,
                                  fill_template(tmpl, {{"guideline", g.text},
                                                       {"n_questions", n},
                                                       {"n_broad", nb},
                                                       {"n_specific", ns}}),
                                  opts, "questions", attempt);
}

std::vector<AssertionPair> generate_assertion_pairs(const corpus::TruncatedGuideline& g,
                                                    const llm::Backend& backend,
                                                    std::string_view tmpl,
                                                    const GeneratorOptions& opts) {
  for (std::size_t attempt = 0;; ++attempt) {
    const auto r = llm::complete(render_pairs_request(g, tmpl, opts, attempt), backend);
    try {
      return parse_assertion_pairs(r.content, g.id, opts.n_pairs);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableGeneration || attempt + 1 >= kGenerationAttempts) throw;
    }
  }
}

std::vector<QAItem> generate_qa_items(const corpus::TruncatedGuideline& g, Split split,
                                      const llm::Backend& backend, std::string_view tmpl,
                                      const GeneratorOptions& opts) {
  for (std::size_t attempt = 0;; ++attempt) {
    const auto r = llm::complete(render_questions_request(g, tmpl, opts, attempt), backend);
    try {
      return parse_qa_items(r.content, g.id, split, opts.n_questions, opts.n_broad);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnparseableGeneration || attempt + 1 >= kGenerationAttempts) throw;
    }
  }
}

std::vector<AssertionItem> flatten_and_shuffle(std::span<const AssertionPair> pairs,
                                               const corpus::SplitAssignment& split,
                                               std::uint64_t seed) {
  std::vector<AssertionItem> items;
  items.reserve(2 * pairs.size());
  for (const auto& p : pairs) {
    p.validate();
    const auto s = split.at(p.guideline_id);
    const bool true_first = (derive_seed(seed, p.pair_id) & 1U) == 0;
    AssertionItem t{p.pair_id + (true_first ? "-1" : "-2"), p.pair_id, p.guideline_id, s,
                    p.true_statement, Label::True};
    AssertionItem f{p.pair_id + (true_first ? "-2" : "-1"), p.pair_id, p.guideline_id, s,
                    p.false_statement, Label::False};
    items.push_back(std::move(t));
    items.push_back(std::move(f));
  }
  // Canonical order first so the permutation depends only on content + seed.
  std::sort(items.begin(), items.end(),
            [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  deterministic_shuffle(std::span<AssertionItem>(items), seed);
  return items;
}

BenchmarkManifest validate_benchmark(std::span<const AssertionItem> assertions,
                                     std::span<const QAItem> questions,
                                     const corpus::SplitAssignment& split, const Quotas& quotas,
                                     std::string generator_model_id, std::uint64_t seed) {
  if (assertions.empty() && questions.empty()) {
    throw Error(ErrorCode::InvalidArgument, "nothing to validate");
  }
  BenchmarkManifest m;
  m.generator_model_id = std::move(generator_model_id);
  m.seed = seed;
  auto counts = [&](Split s) -> SplitCounts& { return s == Split::Train ? m.train : m.test; };
  m.train.n_guidelines = split.count(Split::Train);
  m.test.n_guidelines = split.count(Split::Test);

  std::set<std::string, std::less<>> ids;
  auto check_common = [&](const std::string& item_id, const std::string& gid, Split s) {
    if (!ids.insert(item_id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate item id '" + item_id + "'");
    }
    if (split.at(gid) != s) {
      throw Error(ErrorCode::InvariantViolation,
                  "item '" + item_id + "' is labelled " + std::string(corpus::to_string(s)) +
                      " but guideline '" + gid + "' is " +
                      std::string(corpus::to_string(split.at(gid))));
    }
  };

  std::map<std::string, std::size_t, std::less<>> per_guideline_a;
  std::map<std::string, std::vector<Label>, std::less<>> per_pair;
  for (const auto& a : assertions) {
    check_common(a.item_id, a.guideline_id, a.split);
    auto& c = counts(a.split);
    ++c.n_assertions;
    ++(a.label == Label::True ? c.n_true : c.n_false);
    ++per_guideline_a[a.guideline_id];
    per_pair[a.pair_id].push_back(a.label);
  }
  std::map<std::string, std::size_t, std::less<>> per_guideline_q;
  for (const auto& q : questions) {
    check_common(q.item_id, q.guideline_id, q.split);
    auto& c = counts(q.split);
    ++c.n_questions;
    ++(q.kind == QuestionKind::Broad ? c.n_broad : c.n_specific);
    ++per_guideline_q[q.guideline_id];
  }

  if (!assertions.empty()) {
    for (auto s : {Split::Train, Split::Test}) {
      const auto& c = counts(s);
      if (c.n_true != c.n_false) {
        throw Error(ErrorCode::ImbalancedDataset,
                    std::string(corpus::to_string(s)) + " split has " +
                        std::to_string(c.n_true) + " true vs " + std::to_string(c.n_false) +
                        " false assertions");
      }
    }
  }
  for (const auto& [gid, _] : split.entries()) {
    if (!assertions.empty()) {
      const auto it = per_guideline_a.find(gid);
      const auto n = it == per_guideline_a.end() ? 0 : it->second;
      if (n != quotas.assertions_per_guideline) {
        throw Error(ErrorCode::QuotaViolation,
                    "guideline '" + gid + "' has " + std::to_string(n) + " assertions, expected " +
                        std::to_string(quotas.assertions_per_guideline));
      }
    }
    if (!questions.empty()) {
      const auto it = per_guideline_q.find(gid);
      const auto n = it == per_guideline_q.end() ? 0 : it->second;
      if (n != quotas.questions_per_guideline) {
        throw Error(ErrorCode::QuotaViolation,
                    "guideline '" + gid + "' has " + std::to_string(n) + " questions, expected " +
                        std::to_string(quotas.questions_per_guideline));
      }
    }
  }
  for (const auto& [pair_id, labels] : per_pair) {
    const bool ok = labels.size() == 2 && labels[0] != labels[1];
    if (!ok) {
      throw Error(ErrorCode::InvariantViolation,
                  "pair '" + pair_id + "' does not hold exactly one true and one false item");
    }
  }
  return m;
}

BuildResult build_benchmarks(std::span<const corpus::TruncatedGuideline> guidelines,
                             const corpus::SplitAssignment& split, const llm::Backend& backend,
                             std::string_view pairs_template,
                             std::string_view questions_template, const GeneratorOptions& opts) {
  if (guidelines.empty()) throw Error(ErrorCode::EmptyCorpus, "no guidelines to build from");
  const auto n = guidelines.size();
  std::vector<std::optional<std::vector<AssertionPair>>> pairs(n);
  std::vector<std::optional<std::vector<QAItem>>> questions(n);
  std::vector<std::string> last_error(2 * n);

  for (std::size_t attempt = 0; attempt < kGenerationAttempts; ++attempt) {
    std::vector<llm::ChatRequest> requests;
    std::vector<std::size_t> slots;  // 2*i for pairs, 2*i+1 for questions
    for (std::size_t i = 0; i < n; ++i) {
      if (!pairs[i]) {
        requests.push_back(render_pairs_request(guidelines[i], pairs_template, opts, attempt));
        slots.push_back(2 * i);
      }
      if (!questions[i]) {
        requests.push_back(
            render_questions_request(guidelines[i], questions_template, opts, attempt));
        slots.push_back(2 * i + 1);
      }
    }
    if (requests.empty()) break;
    const auto outcomes = llm::complete_batch(requests, backend, opts.max_in_flight);
    for (std::size_t r = 0; r < outcomes.size(); ++r) {
      const auto slot = slots[r];
      const auto i = slot / 2;
      const auto& g = guidelines[i];
      if (!outcomes[r].ok()) {
        last_error[slot] = outcomes[r].error->what();
        continue;
      }
      try {
        if (slot % 2 == 0) {
          pairs[i] = parse_assertion_pairs(outcomes[r].response->content, g.id, opts.n_pairs);
        } else {
          questions[i] = parse_qa_items(outcomes[r].response->content, g.id, split.at(g.id),
                                        opts.n_questions, opts.n_broad);
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::UnknownGuideline) throw;
        last_error[slot] = e.what();
      }
    }
  }

  BuildResult out;
  std::vector<AssertionPair> all_pairs;
  for (std::size_t i = 0; i < n; ++i) {
    if (!pairs[i]) {
      throw Error(ErrorCode::UnparseableGeneration,
                  "assertion pairs for '" + guidelines[i].id + "' failed twice: " +
                      last_error[2 * i]);
    }
    if (!questions[i]) {
      throw Error(ErrorCode::UnparseableGeneration,
                  "questions for '" + guidelines[i].id + "' failed twice: " +
                      last_error[2 * i + 1]);
    }
    all_pairs.insert(all_pairs.end(), pairs[i]->begin(), pairs[i]->end());
    out.questions.insert(out.questions.end(), questions[i]->begin(), questions[i]->end());
  }
  out.assertions = flatten_and_shuffle(all_pairs, split, opts.seed);
  std::sort(out.questions.begin(), out.questions.end(),
            [](const auto& a, const auto& b) { return a.item_id < b.item_id; });
  out.manifest = validate_benchmark(
      out.assertions, out.questions, split,
      {2 * opts.n_pairs, opts.n_questions}, opts.model_id, opts.seed);
  return out;
}

std::vector<AssertionItem> read_assertions_jsonl(const std::filesystem::path& p) {
  std::vector<AssertionItem> out;
  for (const auto& j : read_jsonl(p)) out.push_back(AssertionItem::from_json(j));
  return out;
}

std::vector<QAItem> read_questions_jsonl(const std::filesystem::path& p) {
  std::vector<QAItem> out;
  for (const auto& j : read_jsonl(p)) out.push_back(QAItem::from_json(j));
  return out;
}

void write_assertions_jsonl(const std::filesystem::path& p, std::span<const AssertionItem> items) {
  std::vector<Json> rows;
  for (const auto& i : items) rows.push_back(i.to_json());
  write_jsonl(p, rows);
}

void write_questions_jsonl(const std::filesystem::path& p, std::span<const QAItem> items) {
  std::vector<Json> rows;
  for (const auto& i : items) rows.push_back(i.to_json());
  write_jsonl(p, rows);
}

}  // namespace guidekit::bench
