// One PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "guidekit/benchmarks.hpp"
#include "guidekit/error.hpp"
#include "guidekit/evaluation.hpp"
#include "guidekit/llm_gateway.hpp"
#include "guidekit/retrieval.hpp"
#include "guidekit/synthgen.hpp"
#include "guidekit/trainprep.hpp"
#include "guidekit/utf8.hpp"
#include "support.hpp"

using namespace gk_test;
namespace gk = guidekit;
using gk::corpus::Split;

namespace {

using Clock = std::chrono::steady_clock;

class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    if (!(std::fabs(got - want) <= tol)) {
      std::ostringstream s;
      s.precision(17);
      s << what << ": got " << got << ", want " << want;
      failures_.push_back(s.str());
    }
  }
  [[nodiscard]] const std::vector<std::string>& failures() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string error_kind(const CliResult& r) {
  const auto j = Json::parse(r.err, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return "";
  return j.value("error", std::string());
}

std::vector<std::string> with_config(const fs::path& cfg, std::vector<std::string> args) {
  args.insert(args.begin(), {"--config", cfg.string()});
  return args;
}

// ---- 1 ----------------------------------------------------------------------

void plan_arithmetic(Checker& c) {
  const auto t0 = Clock::now();
  using F = gk::synth::Format;
  struct Row {
    std::set<F> formats;
    std::size_t one, four;
  };
  const std::vector<Row> table = {
      {{F::Rephrase}, 1780, 7120},
      {{F::Wiki}, 1780, 7120},
      {{F::Rephrase, F::QA}, 2670, 10680},
      {{F::Wiki, F::QA}, 2670, 10680},
      {{F::Wiki, F::Rephrase}, 3560, 14240},
      {{F::Rephrase, F::Wiki, F::QA}, 4450, 17800},
  };
  std::vector<std::string> ids;
  for (int i = 0; i < 178; ++i) ids.push_back("g" + std::to_string(1000 + i));
  const auto split = gk::corpus::assign_splits(ids, 7);
  c.expect(split.count(Split::Train) == 89, "178 guidelines split 89 train");
  const std::vector<std::string> one = {"gen-a"};
  const std::vector<std::string> four = {"gen-a", "gen-b", "gen-c", "gen-d"};
  for (const auto& row : table) {
    std::string name;
    for (const auto f : row.formats) name += std::string(gk::synth::to_string(f)) + "+";
    c.expect(gk::synth::plan_size(178, 89, 1, row.formats, 10) == row.one, name + " x1 formula");
    c.expect(gk::synth::plan_size(178, 89, 4, row.formats, 10) == row.four, name + " x4 formula");
    c.expect(gk::synth::build_plan(split, one, row.formats, 10).size() == row.one, name + " x1 plan");
    c.expect(gk::synth::build_plan(split, four, row.formats, 10).size() == row.four, name + " x4 plan");
  }
  c.expect(seconds_since(t0) < 1.0, "runtime under 1 s");
}

// ---- 2 ----------------------------------------------------------------------

std::map<std::string, std::string> run_pipeline(const fs::path& root, Checker& c,
                                                std::string& stdout_log) {
  make_corpus(root, 6);
  const auto cfg = write_config(root, pipeline_config(root, 2));
  for (const char* cmd :
       {"ingest", "split", "generate", "leakage-check", "bench-build", "eval-tf", "report"}) {
    const auto r = run(with_config(cfg, {cmd}));
    c.expect(r.code == 0, std::string(cmd) + " exits 0: " + r.err);
    stdout_log += r.out;
  }
  std::map<std::string, std::string> files;
  const auto out = root / "out";
  if (!fs::is_directory(out)) return files;
  for (const auto& e : fs::recursive_directory_iterator(out)) {
    if (e.is_regular_file()) files[fs::relative(e.path(), out).generic_string()] = read_text(e.path());
  }
  return files;
}

void end_to_end(Checker& c) {
  const auto t0 = Clock::now();
  TempDir a, b;
  std::string log_a, log_b;
  const auto files_a = run_pipeline(a.path(), c, log_a);
  const auto files_b = run_pipeline(b.path(), c, log_b);
  c.expect(!files_a.empty(), "pipeline wrote artifacts");
  c.expect(files_a == files_b, "two runs are byte-identical");
  c.expect(log_a == log_b, "two runs print identical summaries");
  for (const char* name : {"synthetic.jsonl", "leakage_report.json", "healthbench_br.jsonl",
                           "runs/parametric/answers_tf.jsonl", "report.txt"}) {
    c.expect(files_a.count(name) == 1, std::string("artifact ") + name);
  }
  if (files_a.count("synthetic.jsonl")) {
    const auto docs = gk::synth::read_synthetic_jsonl(a / "out" / "synthetic.jsonl");
    c.expect(docs.size() == 30, "6*2*2 + 3*2 = 30 synthetic docs");
  }
  c.expect(seconds_since(t0) < 30.0, "both runs under 30 s");
}

// ---- 3 ----------------------------------------------------------------------

void leakage_guards(Checker& c) {
  TempDir tmp;
  make_corpus(tmp.path(), 6);
  const auto cfg = write_config(tmp.path(), pipeline_config(tmp.path(), 1));
  for (const char* cmd : {"ingest", "generate", "bench-build"}) {
    c.expect(run(with_config(cfg, {cmd})).code == 0, std::string("setup ") + cmd);
  }
  const auto split = gk::corpus::SplitAssignment::from_json(gk::read_json(tmp / "out" / "split.json"));
  const auto test_id = split.ids(Split::Test).front();

  // QA document on a test guideline.
  auto docs = gk::synth::read_synthetic_jsonl(tmp / "out" / "synthetic.jsonl");
  gk::synth::SyntheticDoc leak;
  leak.task = {test_id, "mock-gen", gk::synth::Format::QA, 0};
  leak.text = "Pergunta? Resposta.";
  leak.token_count = gk::estimate_tokens(leak.text);
  docs.push_back(leak);
  const auto bad_docs = tmp / "adversarial_synthetic.jsonl";
  gk::synth::write_synthetic_jsonl(bad_docs, docs);
  const auto r1 = run(with_config(cfg, {"leakage-check", "--docs", bad_docs.string()}));
  c.expect(r1.code == 3, "leakage-check exits 3 on a test-split QA doc");
  c.expect(error_kind(r1) == "LeakageViolation", "leakage-check reports LeakageViolation");
  c.expect(r1.err.find(leak.task.key()) != std::string::npos, "leakage-check names the doc");

  // Test item fed to the SFT builder.
  auto items = gk::bench::read_assertions_jsonl(tmp / "out" / "healthbench_br.jsonl");
  std::vector<gk::bench::AssertionItem> sft_items;
  std::copy_if(items.begin(), items.end(), std::back_inserter(sft_items),
               [](const auto& a) { return a.split == Split::Train; });
  const auto intruder = *std::find_if(items.begin(), items.end(),
                                      [](const auto& a) { return a.split == Split::Test; });
  sft_items.push_back(intruder);
  const auto bad_items = tmp / "adversarial_items.jsonl";
  gk::bench::write_assertions_jsonl(bad_items, sft_items);
  const auto r2 = run(with_config(cfg, {"build-sft", "--items", bad_items.string()}));
  c.expect(r2.code == 3, "build-sft exits 3 on a test item");
  c.expect(error_kind(r2) == "LeakageViolation", "build-sft reports LeakageViolation");
  c.expect(r2.err.find(intruder.item_id) != std::string::npos, "build-sft names the item");
  c.expect(!fs::exists(tmp / "out" / "sft.jsonl"), "no SFT file is written");

  // A test item relabelled as train is still caught through the split map.
  auto disguised = sft_items;
  disguised.back().split = Split::Train;
  gk::bench::write_assertions_jsonl(bad_items, disguised);
  const auto r3 = run(with_config(cfg, {"build-sft", "--items", bad_items.string()}));
  c.expect(r3.code == 3, "build-sft exits 3 on a relabelled test item");
}

// ---- 4 ----------------------------------------------------------------------

void benchmark_balance(Checker& c) {
  TempDir tmp;
  make_corpus(tmp.path(), 6);
  const auto cfg = write_config(tmp.path(), pipeline_config(tmp.path(), 1));
  for (const char* cmd : {"ingest", "bench-build"}) {
    c.expect(run(with_config(cfg, {cmd})).code == 0, std::string("setup ") + cmd);
  }
  const auto out = tmp / "out";
  const auto items = gk::bench::read_assertions_jsonl(out / "healthbench_br.jsonl");
  const auto questions = gk::bench::read_questions_jsonl(out / "pcdt_qa.jsonl");
  c.expect(items.size() == 60 && questions.size() == 30, "10 assertions and 5 questions per guideline");

  const auto a_path = tmp / "a.jsonl";
  const auto q_path = tmp / "q.jsonl";
  auto validate = [&](const std::vector<gk::bench::AssertionItem>& a,
                      const std::vector<gk::bench::QAItem>& q) {
    gk::bench::write_assertions_jsonl(a_path, a);
    gk::bench::write_questions_jsonl(q_path, q);
    return run(with_config(cfg, {"bench-validate", "--assertions", a_path.string(),
                                 "--questions", q_path.string()}));
  };
  auto expect_violation = [&](const std::vector<gk::bench::AssertionItem>& a,
                              const std::vector<gk::bench::QAItem>& q, const char* kind,
                              const std::string& what) {
    const auto r = validate(a, q);
    c.expect(r.code == 3 && error_kind(r) == kind, what + " -> " + kind + " (got " + r.err + ")");
  };

  c.expect(validate(items, questions).code == 0, "valid benchmark passes");

  auto first_of = [&](gk::bench::Label label) {
    return std::find_if(items.begin(), items.end(), [&](const auto& a) { return a.label == label; });
  };
  {
    auto a = items;
    a.erase(a.begin() + (first_of(gk::bench::Label::False) - items.begin()));
    expect_violation(a, questions, "ImbalancedDataset", "one False item removed");
  }
  {
    auto a = items;
    auto& flip = a[static_cast<std::size_t>(first_of(gk::bench::Label::True) - items.begin())];
    flip.label = gk::bench::Label::False;
    expect_violation(a, questions, "ImbalancedDataset", "one label flipped");
  }
  {
    auto a = items;
    const auto& src = items.front();
    for (const auto label : {gk::bench::Label::True, gk::bench::Label::False}) {
      auto extra = src;
      extra.pair_id = src.guideline_id + "-p99";
      extra.item_id = extra.pair_id + (label == gk::bench::Label::True ? "-1" : "-2");
      extra.label = label;
      extra.statement = "Extra " + std::string(gk::bench::to_string(label));
      a.push_back(extra);
    }
    expect_violation(a, questions, "QuotaViolation", "guideline with 12 assertions");
  }
  {
    const auto gid = items.front().guideline_id;
    std::vector<gk::bench::AssertionItem> a;
    std::copy_if(items.begin(), items.end(), std::back_inserter(a),
                 [&](const auto& x) { return x.guideline_id != gid; });
    expect_violation(a, questions, "QuotaViolation", "guideline with no assertions");
  }
  {
    auto q = questions;
    q.pop_back();
    expect_violation(items, q, "QuotaViolation", "guideline with 4 questions");
  }
  {
    auto a = items;
    a.back().split = a.back().split == Split::Train ? Split::Test : Split::Train;
    const auto r = validate(a, questions);
    c.expect(r.code == 3, "wrong split label is rejected");
  }
  {
    auto a = items;
    a.push_back(a.front());
    expect_violation(a, questions, "DuplicateId", "duplicated item");
  }
  {
    // One pair of a guideline gets two True items and another two False
    // items: balance and quotas intact, pairing broken.
    auto a = items;
    const auto gid = items.front().guideline_id;
    std::optional<std::size_t> to_true, to_false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].guideline_id != gid) continue;
      if (!to_true && a[i].label == gk::bench::Label::False) {
        to_true = i;
      } else if (to_true && !to_false && a[i].label == gk::bench::Label::True &&
                 a[i].pair_id != a[*to_true].pair_id) {
        to_false = i;
      }
    }
    a[*to_true].label = gk::bench::Label::True;
    a[*to_false].label = gk::bench::Label::False;
    const auto r = validate(a, questions);
    c.expect(r.code == 3, "broken pairing is rejected");
  }
}

// ---- 5 ----------------------------------------------------------------------

std::map<gk::retrieval::ChunkId, double> bm25_oracle(
    const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& query,
    double k1, double b) {
  const double n = static_cast<double>(docs.size());
  double total = 0.0;
  for (const auto& d : docs) total += static_cast<double>(d.size());
  const double avgdl = total / n;
  const std::set<std::string> terms(query.begin(), query.end());
  std::map<gk::retrieval::ChunkId, double> scores;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    double score = 0.0;
    bool matched = false;
    for (const auto& t : terms) {
      const auto tf = static_cast<double>(std::count(docs[i].begin(), docs[i].end(), t));
      if (tf == 0) continue;
      double df = 0;
      for (const auto& d : docs) df += std::find(d.begin(), d.end(), t) != d.end() ? 1 : 0;
      const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
      const double len = static_cast<double>(docs[i].size());
      score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * len / avgdl));
      matched = true;
    }
    if (matched) scores[static_cast<gk::retrieval::ChunkId>(i)] = score;
  }
  return scores;
}

void bm25_equivalence(Checker& c) {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(5);
  std::size_t n_queries = 0;
  for (int corpus = 0; corpus < 50; ++corpus) {
    const std::size_t n_chunks = 1 + rng() % 100;
    const std::size_t vocab = 1 + rng() % 20;
    std::vector<std::vector<std::string>> docs;
    std::vector<gk::retrieval::Chunk> chunks;
    for (std::size_t i = 0; i < n_chunks; ++i) {
      const std::size_t len = 1 + rng() % 30;
      std::vector<std::string> words;
      std::string text;
      for (std::size_t w = 0; w < len; ++w) {
        words.push_back("t" + std::to_string(rng() % vocab));
        text += (w ? " " : "") + words.back();
      }
      docs.push_back(words);
      chunks.push_back({static_cast<gk::retrieval::ChunkId>(i), "g", 0, text});
    }
    const double k1 = corpus % 2 ? 1.2 : 0.5 + static_cast<double>(rng() % 150) / 100.0;
    const double b = corpus % 2 ? 0.75 : static_cast<double>(rng() % 101) / 100.0;
    const auto index = gk::retrieval::build_bm25(chunks, k1, b);
    for (int q = 0; q < 20; ++q) {
      std::vector<std::string> query;
      std::string qtext;
      const std::size_t qlen = 1 + rng() % 5;
      for (std::size_t w = 0; w < qlen; ++w) {
        query.push_back("t" + std::to_string(rng() % (vocab + 3)));  // some unseen terms
        qtext += (w ? " " : "") + query.back();
      }
      ++n_queries;
      const auto want = bm25_oracle(docs, query, k1, b);
      const auto got = gk::retrieval::query_bm25(index, qtext, n_chunks + 5);
      const std::string where = "corpus " + std::to_string(corpus) + " query '" + qtext + "'";
      c.expect(got.hits.size() == want.size(), where + ": hit count");
      for (std::size_t i = 0; i < got.hits.size(); ++i) {
        const auto& h = got.hits[i];
        const auto it = want.find(h.chunk_id);
        c.expect(it != want.end(), where + ": unexpected chunk");
        if (it != want.end()) c.near(h.score, it->second, 1e-9, where + ": score");
        if (i > 0) {
          const auto& p = got.hits[i - 1];
          c.expect(p.score > h.score || (p.score == h.score && p.chunk_id < h.chunk_id),
                   where + ": ordering");
        }
      }
      const auto top3 = gk::retrieval::query_bm25(index, qtext, 3);
      c.expect(top3.hits.size() == std::min<std::size_t>(3, got.hits.size()) &&
                   std::equal(top3.hits.begin(), top3.hits.end(), got.hits.begin()),
               where + ": top-k is a prefix");
    }
  }
  c.expect(n_queries == 1000, "1000 queries evaluated");

  const std::vector<gk::retrieval::Chunk> one = {{0, "g", 0, "a a b"}};
  const auto idx = gk::retrieval::build_bm25(one);
  const auto r = gk::retrieval::query_bm25(idx, "a", 10);
  c.expect(r.hits.size() == 1, "single-chunk example has one hit");
  if (!r.hits.empty()) {
    c.near(r.hits[0].score, std::log(4.0 / 3.0) * 1.375, 1e-12, "single-chunk formula");
    c.near(r.hits[0].score, 0.3956, 1e-4, "single-chunk example value");
    c.near(r.hits[0].score, 0.395563, 1e-6, "single-chunk example to 1e-6");
  }
  c.expect(seconds_since(t0) < 10.0, "runtime under 10 s");
}

// ---- 6 ----------------------------------------------------------------------

void chunk_reconstruction(Checker& c) {
  std::mt19937_64 rng(6);
  const std::u32string alphabet = U"abcdefghij klmnopq\nrstuvwxyzçãéíóúâêôàü0123456789.,;μ€";
  const gk::retrieval::ChunkingParams params;  // 2000 / 200
  c.expect(params.stride() == 1800, "stride 1800");
  for (int t = 0; t < 100; ++t) {
    const std::size_t len = t == 0 ? 0 : t == 1 ? 2000 : t == 2 ? 3800 : rng() % 10001;
    std::u32string s;
    for (std::size_t i = 0; i < len; ++i) s += alphabet[rng() % alphabet.size()];
    const auto text = gk::utf8::encode(s);
    const auto chunks = gk::retrieval::chunk_text("g", text, params);
    const std::string where = "text " + std::to_string(t) + " (len " + std::to_string(len) + ")";
    if (len == 0) {
      c.expect(chunks.empty(), where + ": no chunks for empty text");
      continue;
    }
    const std::size_t expected = len <= 2000 ? 1 : 1 + (len - 2000 + 1799) / 1800;
    c.expect(chunks.size() == expected, where + ": chunk count");
    for (std::size_t i = 0; i < chunks.size(); ++i) {
      c.expect(chunks[i].start_offset == 1800 * i, where + ": offset");
      const auto clen = gk::utf8::length(chunks[i].text);
      c.expect(clen == std::min<std::size_t>(2000, len - 1800 * i), where + ": chunk length");
      c.expect(chunks[i].chunk_id == i, where + ": chunk id");
    }
    c.expect(gk::retrieval::reconstruct(chunks, params.overlap) == text, where + ": reconstruction");
  }
}

// ---- 7 ----------------------------------------------------------------------

std::string completion(std::size_t reasoning, const char* verdict) {
  std::string s;
  for (std::size_t i = 0; i < reasoning; ++i) s += "palavra ";
  return s + "Portanto " + verdict;
}

void reward_table(Checker& c) {
  using gk::bench::Label;
  // completion() adds "Portanto", so reasoning words = n + 1.
  struct Case {
    std::size_t words;
    const char* verdict;
    Label gold;
    double want;
  };
  const std::vector<Case> cases = {
      {59, "Verdadeiro.", Label::True, 1.0},   // correct, 60 words
      {9, "Verdadeiro.", Label::True, 0.0},    // correct, 10 words
      {199, "Falso.", Label::True, 0.0},       // wrong, 200 words
      {48, "Verdadeiro.", Label::True, 0.0},   // 49 words
      {49, "Verdadeiro.", Label::True, 1.0},   // 50 words
      {49, "Falso.", Label::False, 1.0},
      {48, "Falso.", Label::False, 0.0},
  };
  for (const auto& k : cases) {
    const auto text = completion(k.words, k.verdict);
    const std::string where = std::to_string(k.words + 1) + " words, " + k.verdict;
    c.expect(gk::train::reasoning_words(text) == k.words + 1, where + ": word count");
    const double r = gk::train::compute_reward(text, k.gold);
    c.expect(r == k.want, where + ": reward " + std::to_string(r));
  }
  c.expect(gk::train::compute_reward(completion(80, "talvez."), Label::True) == 0.0,
           "no verdict scores 0");
}

// ---- 8 ----------------------------------------------------------------------

void advantage_normalization(Checker& c) {
  std::mt19937_64 rng(8);
  for (int g = 0; g < 1000; ++g) {
    const std::size_t n = 2 + rng() % 15;
    std::vector<double> r(n);
    for (auto& x : r) {
      x = g % 3 == 0 ? static_cast<double>(rng() % 2) : std::uniform_real_distribution<>(-5, 5)(rng);
    }
    const auto adv = gk::train::compute_group_advantages(r);
    c.expect(adv.size() == n, "advantage count");
    const double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    c.near(mean, 0.0, 1e-9, "group " + std::to_string(g) + " mean");
  }
  for (const double v : {0.0, 1.0, 0.37}) {
    for (const std::size_t n : {2u, 5u, 16u}) {
      const std::vector<double> r(n, v);
      const auto adv = gk::train::compute_group_advantages(r);
      c.expect(std::all_of(adv.begin(), adv.end(), [](double a) { return a == 0.0; }),
               "constant group yields exact zeros");
    }
  }
  const std::vector<double> fixture = {1, 1, 0, 0};
  const auto adv = gk::train::compute_group_advantages(fixture);
  const std::vector<double> want = {1, 1, -1, -1};
  for (std::size_t i = 0; i < 4; ++i) c.near(adv[i], want[i], 1e-6, "[1,1,0,0] fixture");
}

// ---- 9 ----------------------------------------------------------------------

std::vector<gk::bench::AssertionItem> balanced_items(std::size_t n) {
  std::vector<gk::bench::AssertionItem> items;
  for (std::size_t i = 0; i < n; ++i) {
    gk::bench::AssertionItem a;
    a.pair_id = "g1-p" + std::to_string(i / 2);
    a.item_id = a.pair_id + (i % 2 ? "-2" : "-1");
    a.guideline_id = "g1";
    a.split = i < n / 2 ? Split::Train : Split::Test;
    a.statement = "Afirmação " + std::to_string(i);
    a.label = i % 2 ? gk::bench::Label::False : gk::bench::Label::True;
    items.push_back(a);
  }
  return items;
}

void scoring_bookkeeping(Checker& c) {
  using gk::eval::AbstentionPolicy;
  using gk::eval::Verdict;
  const auto items = balanced_items(10);
  std::vector<gk::eval::ModelAnswer> answers;
  for (std::size_t i = 0; i < items.size(); ++i) {
    gk::eval::ModelAnswer a;
    a.item_id = items[i].item_id;
    const bool is_true = items[i].label == gk::bench::Label::True;
    if (i < 8) a.raw_text = is_true ? "Verdadeiro" : "Falso";
    else if (i == 8) a.raw_text = is_true ? "Falso" : "Verdadeiro";
    else a.raw_text = "Não sei.";
    a.verdict = gk::eval::extract_verdict(a.raw_text);
    answers.push_back(a);
  }
  const auto ex = gk::eval::score_assertions(answers, items, AbstentionPolicy::ExcludeFromDenominator);
  const auto co = gk::eval::score_assertions(answers, items, AbstentionPolicy::CountAsIncorrect);
  c.near(ex.all.accuracy(AbstentionPolicy::ExcludeFromDenominator), 8.0 / 9.0, 1e-12, "exclude 8/9");
  c.near(co.all.accuracy(AbstentionPolicy::CountAsIncorrect), 0.80, 1e-12, "count 0.80");
  c.near(ex.all.abstention_rate, 0.10, 1e-12, "abstention 0.10");
  c.expect(ex.all.n_correct == 8 && ex.all.n_incorrect == 1 && ex.all.n_abstained == 1,
           "8 correct, 1 incorrect, 1 abstained");

  // Constant-True responder through the evaluation harness.
  gk::llm::MockScript script;
  script.default_response = gk::llm::ChatResponse{"Verdadeiro", gk::llm::FinishReason::Stop, {}};
  const gk::llm::MockBackend backend(script);
  gk::eval::EvalOptions opts;
  opts.model_id = "constant-true";
  const auto balanced = balanced_items(20);
  const auto out = gk::eval::run_assertion_eval(balanced, backend, gk::builtin_prompts().eval_tf, opts);
  const auto rep = gk::eval::score_assertions(out, balanced);
  c.near(rep.all.accuracy(AbstentionPolicy::ExcludeFromDenominator), 0.5, 1e-12, "constant-True accuracy");
  c.expect(rep.all.predicted_true_rate.has_value(), "predicted_true_rate present");
  c.near(rep.all.predicted_true_rate.value_or(-1), 1.0, 1e-12, "constant-True predicted_true_rate");
}

// ---- 10 ---------------------------------------------------------------------

void config_export(Checker& c) {
  using gk::train::Stage;
  const auto cpt = gk::train::export_training_config(Stage::CPT).to_json();
  const auto sft = gk::train::export_training_config(Stage::SFT).to_json();
  const auto grpo = gk::train::export_training_config(Stage::GRPO).to_json();
  auto eq = [&](const Json& j, const Json::json_pointer& p, const Json& want, const std::string& what) {
    c.expect(j.contains(p) && j.at(p) == want, what + " = " + want.dump() + " (got " +
                                                   (j.contains(p) ? j.at(p).dump() : "missing") + ")");
  };
  eq(cpt, Json::json_pointer("/stage"), "cpt", "cpt stage");
  eq(cpt, Json::json_pointer("/peak_learning_rate"), 5e-5, "cpt peak lr");
  eq(cpt, Json::json_pointer("/epochs"), 3, "cpt epochs");
  eq(cpt, Json::json_pointer("/batch_size"), 32, "cpt batch");
  eq(cpt, Json::json_pointer("/warmup_ratio"), 1.0 / 3.0, "cpt warmup");
  eq(cpt, Json::json_pointer("/max_seq_length"), 4096, "cpt max length");
  eq(cpt, Json::json_pointer("/lr_schedule"), "cosine", "cpt schedule");
  eq(sft, Json::json_pointer("/stage"), "sft", "sft stage");
  eq(sft, Json::json_pointer("/learning_rate"), 3e-5, "sft lr");
  eq(sft, Json::json_pointer("/batch_size"), 64, "sft batch");
  eq(sft, Json::json_pointer("/optimizer/name"), "adamw", "sft optimizer");
  eq(grpo, Json::json_pointer("/stage"), "grpo", "grpo stage");
  eq(grpo, Json::json_pointer("/lora/r"), 32, "grpo lora r");
  eq(grpo, Json::json_pointer("/lora/alpha"), 64, "grpo lora alpha");
  eq(grpo, Json::json_pointer("/group_size"), 16, "grpo group");
  eq(grpo, Json::json_pointer("/max_completion_length"), 512, "grpo max completion");
  eq(grpo, Json::json_pointer("/kl_beta"), 0.0, "grpo beta");
  eq(grpo, Json::json_pointer("/epsilon"), 0.2, "grpo epsilon");
  eq(grpo, Json::json_pointer("/epsilon_high"), 0.28, "grpo epsilon_high");

  // The CLI writes the same objects.
  TempDir tmp;
  const auto cfg = write_config(tmp.path(), pipeline_config(tmp.path()));
  c.expect(run(with_config(cfg, {"export-config"})).code == 0, "export-config exits 0");
  c.expect(gk::read_json(tmp / "out" / "config_cpt.json") == cpt, "config_cpt.json");
  c.expect(gk::read_json(tmp / "out" / "config_sft.json") == sft, "config_sft.json");
  c.expect(gk::read_json(tmp / "out" / "config_grpo.json") == grpo, "config_grpo.json");
}

// ---- 11 ---------------------------------------------------------------------

void verdict_regression(Checker& c) {
  using gk::eval::Verdict;
  const std::vector<std::pair<std::string, Verdict>> cases = {
      {"Analisando o protocolo... Portanto: Verdadeiro.", Verdict::True},
      {"A afirmação é falsa, pois a dose correta é 5 mg.", Verdict::False},
      {"Não sei responder.", Verdict::Abstain},
      {"VERDADEIRO", Verdict::True},
      {"verdadeiro", Verdict::True},
      {"VeRdAdEiRa", Verdict::True},
      {"FALSO", Verdict::False},
      {"falso", Verdict::False},
      {"FaLsA", Verdict::False},
      {"A afirmação é verdadeira.", Verdict::True},
      {"As afirmações são falsas.", Verdict::False},
      {"Veredito: VERDADEIRO!", Verdict::True},
      {"**Falso**", Verdict::False},
      {"Resposta final: \"Verdadeiro\"", Verdict::True},
      {"Parece falso, mas é verdadeiro.", Verdict::True},
      {"Parece verdadeiro, mas é falso.", Verdict::False},
      {"Verdadeiro ou Falso? Falso.", Verdict::False},
      {"Falso ou Verdadeiro? Verdadeiro.", Verdict::True},
      {"Inicialmente pensei Falso; reavaliando, Verdadeiro. Não: Falso.", Verdict::False},
      {"Conclusão: falsidade da afirmação.", Verdict::False},
      {"FALSÍSSIMO", Verdict::False},
      {"Verdadeíro", Verdict::True},
      {"V\xC3\x89RDADEIRO", Verdict::True},
      {"Ve\xCC\x81rdadeiro", Verdict::True},
      {"", Verdict::Abstain},
      {"Depende do caso clínico.", Verdict::Abstain},
      {"The statement is true.", Verdict::Abstain},
      {"infalsificável", Verdict::Abstain},
      {"A dose é correta.\nVerdadeiro", Verdict::True},
      {"Resposta:\n\nfalso", Verdict::False},
  };
  c.expect(cases.size() == 30, "30 cases");
  for (const auto& [text, want] : cases) {
    const auto got = gk::eval::extract_verdict(text);
    c.expect(got == want, "'" + text + "' -> " + std::string(gk::eval::to_string(got)) +
                              ", want " + std::string(gk::eval::to_string(want)));
  }
}

}  // namespace

int main() {
  gk::set_log_sink([](std::string_view) {});
  const std::vector<std::pair<const char*, std::function<void(Checker&)>>> criteria = {
      {"plan arithmetic (1,780 ... 17,800)", plan_arithmetic},
      {"offline mock pipeline is deterministic", end_to_end},
      {"leakage rejected at both guard points", leakage_guards},
      {"benchmark balance and quotas", benchmark_balance},
      {"BM25 matches the brute-force oracle", bm25_equivalence},
      {"chunker reconstruction at stride 1,800", chunk_reconstruction},
      {"reward truth table", reward_table},
      {"advantage normalization", advantage_normalization},
      {"scoring bookkeeping", scoring_bookkeeping},
      {"training config export", config_export},
      {"verdict extractor regression", verdict_regression},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Checker c;
    const auto t0 = Clock::now();
    try {
      criteria[i].second(c);
    } catch (const std::exception& e) {
      c.expect(false, std::string("exception: ") + e.what());
    }
    const bool ok = c.failures().empty();
    failed += ok ? 0 : 1;
    std::printf("%s %2zu %s (%.2fs)\n", ok ? "PASS" : "FAIL", i + 1, criteria[i].first,
                seconds_since(t0));
    for (std::size_t k = 0; k < std::min<std::size_t>(c.failures().size(), 10); ++k) {
      std::printf("       - %s\n", c.failures()[k].c_str());
    }
    if (c.failures().size() > 10) std::printf("       ... %zu more\n", c.failures().size() - 10);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
