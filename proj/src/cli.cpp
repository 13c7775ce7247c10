#include "guidekit/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>

#include "guidekit/benchmarks.hpp"
#include "guidekit/corpus.hpp"
#include "guidekit/error.hpp"
#include "guidekit/prompts.hpp"
#include "guidekit/random.hpp"
#include "guidekit/tokens.hpp"

namespace guidekit::cli {

namespace fs = std::filesystem;

namespace {

// Artifact names under output_dir.
constexpr const char* kGuidelines = "guidelines.jsonl";
constexpr const char* kStats = "stats.json";
constexpr const char* kSplit = "split.json";
constexpr const char* kPlan = "plan.jsonl";
constexpr const char* kPlanSummary = "plan_summary.json";
constexpr const char* kSynthetic = "synthetic.jsonl";
constexpr const char* kFailures = "failure_report.jsonl";
constexpr const char* kGenSummary = "generation_summary.json";
constexpr const char* kLeakage = "leakage_report.json";
constexpr const char* kAssertions = "healthbench_br.jsonl";
constexpr const char* kQuestions = "pcdt_qa.jsonl";
constexpr const char* kBenchManifest = "benchmark_manifest.json";
constexpr const char* kRagDir = "rag";
constexpr const char* kRunsDir = "runs";
constexpr const char* kReportTable = "report.txt";
constexpr const char* kCptPacked = "cpt_packed.jsonl";
constexpr const char* kSft = "sft.jsonl";
constexpr const char* kMixed = "mixed.jsonl";
constexpr const char* kRollouts = "rollouts.jsonl";

struct Context {
  PipelineConfig cfg;
  PromptSet prompts;
  std::ostream& out;

  [[nodiscard]] fs::path path(const fs::path& name) const { return cfg.output_dir / name; }
  [[nodiscard]] fs::path run_dir(const std::string& run) const {
    return cfg.output_dir / kRunsDir / run;
  }
};

void print_ok(Context& ctx, const std::string& command, Json fields) {
  Json j;
  j["status"] = "ok";
  j["command"] = command;
  for (auto& [k, v] : fields.items()) j[k] = v;
  ctx.out << j.dump() << "\n";
}

fs::path input_path(const Context& ctx, const std::string& flag, const char* default_name) {
  return flag.empty() ? ctx.path(default_name) : fs::path(flag);
}

void require_file(const fs::path& p, std::string_view hint) {
  std::error_code ec;
  if (!fs::is_regular_file(p, ec)) {
    throw Error(ErrorCode::MissingFile,
                "missing " + p.string() + (hint.empty() ? "" : " (" + std::string(hint) + ")"));
  }
}

std::vector<corpus::CorpusRecord> load_records(const Context& ctx) {
  const auto p = ctx.path(kGuidelines);
  require_file(p, "run ingest first");
  return corpus::read_guidelines_jsonl(p);
}

std::vector<corpus::TruncatedGuideline> load_truncated(const Context& ctx) {
  std::vector<corpus::TruncatedGuideline> out;
  for (auto& r : load_records(ctx)) out.push_back(std::move(r.guideline));
  return out;
}

corpus::SplitAssignment load_split(const Context& ctx) {
  const auto p = ctx.path(kSplit);
  require_file(p, "run ingest or split first");
  return corpus::SplitAssignment::from_json(read_json(p));
}

const Endpoint& require_endpoint(const std::optional<Endpoint>& e, const char* key) {
  if (!e) throw Error(ErrorCode::Config, std::string("config has no '") + key + "' endpoint");
  return *e;
}

void merge_report(const fs::path& run_dir, const char* key, Json value) {
  const auto p = run_dir / "report.json";
  Json j = Json::object();
  std::error_code ec;
  if (fs::is_regular_file(p, ec)) j = read_json(p);
  j[key] = std::move(value);
  write_json(p, j);
}

std::vector<bench::AssertionItem> sft_items(const Context& ctx, const std::string& items_flag) {
  if (!items_flag.empty()) {
    require_file(items_flag, "");
    return bench::read_assertions_jsonl(items_flag);
  }
  const auto p = ctx.path(kAssertions);
  require_file(p, "run bench-build first or pass --items");
  auto all = bench::read_assertions_jsonl(p);
  std::vector<bench::AssertionItem> train;
  std::copy_if(all.begin(), all.end(), std::back_inserter(train),
               [](const auto& a) { return a.split == corpus::Split::Train; });
  return train;
}

std::vector<train::TextDoc> load_docs(const fs::path& p, std::string_view source) {
  require_file(p, "");
  std::vector<train::TextDoc> out;
  for (const auto& j : read_jsonl(p)) {
    if (j.contains("sample_index")) {
      const auto d = synth::SyntheticDoc::from_json(j);
      out.push_back({d.task.key(), d.text, std::string(source)});
    } else {
      out.push_back(train::TextDoc::from_json(j, source));
    }
  }
  return out;
}

// Retrieval-augmented prompting for eval stages.
class Retriever {
 public:
  Retriever(const Context& ctx, const std::string& kind) : kind_(kind) {
    const auto dir = ctx.path(kRagDir);
    require_file(dir / "chunks.jsonl", "run rag-index first");
    table_ = std::make_unique<retrieval::ChunkTable>(retrieval::read_chunks_jsonl(dir / "chunks.jsonl"));
    k_ = ctx.cfg.top_k;
    rag_template_ = ctx.prompts.rag;
    if (kind == "bm25") {
      require_file(dir / "bm25.idx", "run rag-index first");
      bm25_ = retrieval::Bm25Index::load(dir / "bm25.idx");
    } else if (kind == "dense") {
      require_file(dir / "dense.idx", "run rag-index with an embedding endpoint first");
      dense_ = retrieval::DenseIndex::load(dir / "dense.idx");
      const auto& e = require_endpoint(ctx.cfg.embedding, "embedding");
      embed_backend_ = llm::make_backend(e.backend);
      embed_model_ = e.model_id;
    } else {
      throw Error(ErrorCode::Config, "unknown retriever '" + kind + "' (bm25 or dense)");
    }
  }

  [[nodiscard]] retrieval::RetrievalResult search(std::string_view query, std::size_t k) const {
    if (kind_ == "bm25") return retrieval::query_bm25(bm25_, query, k);
    return retrieval::query_dense(dense_, query, *embed_backend_, embed_model_, k);
  }

  [[nodiscard]] eval::PromptAugmenter augmenter() const {
    return [this](std::string_view query, std::string_view prompt) {
      const auto hits = search(query, k_);
      auto r = retrieval::assemble_rag_prompt(prompt, hits, *table_, rag_template_);
      return r.messages.back().content;
    };
  }

  [[nodiscard]] const retrieval::ChunkTable& table() const { return *table_; }

 private:
  std::string kind_;
  std::unique_ptr<retrieval::ChunkTable> table_;
  std::size_t k_ = 10;
  std::string rag_template_;
  retrieval::Bm25Index bm25_;
  retrieval::DenseIndex dense_;
  std::shared_ptr<const llm::Backend> embed_backend_;
  std::string embed_model_;
};

eval::EvalOptions eval_options(const Endpoint& e) {
  eval::EvalOptions o;
  o.model_id = e.model_id;
  o.temperature = e.temperature;
  o.max_output_tokens = e.max_output_tokens;
  o.max_in_flight = e.max_in_flight;
  return o;
}

// ---- stages ---------------------------------------------------------------

void cmd_ingest(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const auto guidelines = corpus::ingest_corpus(cfg.corpus_dir, cfg.manifest);
  std::vector<corpus::TruncatedGuideline> truncated;
  for (const auto& g : guidelines) truncated.push_back(corpus::truncate_guideline(g, cfg.truncation_limit));
  const auto stats = corpus::corpus_stats(guidelines, truncated);
  const auto split = corpus::assign_splits(guidelines, cfg.stage_seed("split"));
  std::vector<Json> rows;
  for (std::size_t i = 0; i < guidelines.size(); ++i) {
    rows.push_back(corpus::guideline_record(guidelines[i], truncated[i], split.at(guidelines[i].id)));
  }
  write_jsonl(ctx.path(kGuidelines), rows);
  write_json(ctx.path(kStats), stats.to_json());
  write_json(ctx.path(kSplit), split.to_json());
  print_ok(ctx, "ingest",
           {{"n_guidelines", stats.n_guidelines},
            {"n_truncated", stats.n_truncated},
            {"n_train", split.count(corpus::Split::Train)},
            {"n_test", split.count(corpus::Split::Test)}});
}

void cmd_split(Context& ctx) {
  const auto p = ctx.path(kGuidelines);
  require_file(p, "run ingest first");
  auto rows = read_jsonl(p);
  std::vector<std::string> ids;
  for (const auto& r : rows) ids.push_back(r.at("id").get<std::string>());
  const auto split = corpus::assign_splits(ids, ctx.cfg.stage_seed("split"));
  for (auto& r : rows) r["split"] = corpus::to_string(split.at(r["id"].get<std::string>()));
  write_jsonl(p, rows);
  write_json(ctx.path(kSplit), split.to_json());
  print_ok(ctx, "split",
           {{"seed", split.seed()},
            {"n_train", split.count(corpus::Split::Train)},
            {"n_test", split.count(corpus::Split::Test)}});
}

std::vector<std::string> generator_names(const PipelineConfig& cfg) {
  std::vector<std::string> names;
  for (const auto& g : cfg.generators) names.push_back(g.name);
  return names;
}

void cmd_plan(Context& ctx) {
  const auto split = load_split(ctx);
  const auto plan = synth::build_plan(split, generator_names(ctx.cfg), ctx.cfg.formats,
                                      ctx.cfg.samples_per_prompt);
  std::vector<Json> rows;
  std::map<std::string, std::size_t> by_format;
  for (const auto& t : plan) {
    rows.push_back(t.to_json());
    ++by_format[std::string(synth::to_string(t.format))];
  }
  Json summary;
  summary["n_tasks"] = plan.size();
  summary["n_guidelines"] = split.size();
  summary["n_train"] = split.count(corpus::Split::Train);
  summary["n_generators"] = ctx.cfg.generators.size();
  summary["samples_per_prompt"] = ctx.cfg.samples_per_prompt;
  summary["by_format"] = by_format;
  write_jsonl(ctx.path(kPlan), rows);
  write_json(ctx.path(kPlanSummary), summary);
  print_ok(ctx, "plan", {{"n_tasks", plan.size()}});
}

void cmd_generate(Context& ctx) {
  const auto split = load_split(ctx);
  const auto guidelines = load_truncated(ctx);
  const auto plan = synth::build_plan(split, generator_names(ctx.cfg), ctx.cfg.formats,
                                      ctx.cfg.samples_per_prompt);
  const auto generators = synth::make_generators(ctx.cfg.generators);
  synth::GenerateOptions opts;
  opts.seed = ctx.cfg.stage_seed("generate");
  const auto result = synth::generate(plan, generators, guidelines, ctx.prompts, opts);
  synth::write_synthetic_jsonl(ctx.path(kSynthetic), result.docs);
  synth::write_failures_jsonl(ctx.path(kFailures), result.failures);
  Json fields{{"n_tasks", plan.size()},
              {"n_docs", result.docs.size()},
              {"n_failed", result.failures.size()}};
  if (!result.docs.empty()) {
    const auto summary = synth::summarize_generation(result.docs);
    write_json(ctx.path(kGenSummary), summary.to_json());
    fields["total_tokens"] = summary.total.total_tokens;
  }
  if (!result.failures.empty()) {
    log_warning("generate: " + std::to_string(result.failures.size()) +
                " tasks failed; see " + ctx.path(kFailures).string());
  }
  print_ok(ctx, "generate", fields);
}

void cmd_leakage_check(Context& ctx, const std::string& docs_flag) {
  const auto split = load_split(ctx);
  const auto docs_path = input_path(ctx, docs_flag, kSynthetic);
  require_file(docs_path, "run generate first");
  const auto docs = synth::read_synthetic_jsonl(docs_path);
  const auto report = synth::verify_no_leakage(docs, split);
  write_json(ctx.path(kLeakage), report.to_json());
  if (!report.clean()) {
    std::string names;
    for (const auto& v : report.violations) names += (names.empty() ? "" : ", ") + v.key();
    throw Error(ErrorCode::LeakageViolation,
                std::to_string(report.violations.size()) +
                    " QA document(s) from test-split guidelines: " + names);
  }
  print_ok(ctx, "leakage-check", {{"n_docs", docs.size()}, {"n_violations", 0}});
}

bench::GeneratorOptions bench_options(const PipelineConfig& cfg, const Endpoint& e) {
  bench::GeneratorOptions o;
  o.model_id = e.model_id;
  o.max_output_tokens = e.max_output_tokens;
  o.n_pairs = cfg.n_pairs;
  o.n_questions = cfg.n_questions;
  o.n_broad = cfg.n_broad;
  o.seed = cfg.stage_seed("bench-build");
  o.max_in_flight = e.max_in_flight;
  return o;
}

void cmd_bench_build(Context& ctx) {
  const auto& e = require_endpoint(ctx.cfg.benchmark_generator, "benchmark_generator");
  const auto split = load_split(ctx);
  const auto guidelines = load_truncated(ctx);
  const auto backend = llm::make_backend(e.backend);
  const auto result =
      bench::build_benchmarks(guidelines, split, *backend, ctx.prompts.healthbench_pairs,
                              ctx.prompts.pcdt_questions, bench_options(ctx.cfg, e));
  bench::write_assertions_jsonl(ctx.path(kAssertions), result.assertions);
  bench::write_questions_jsonl(ctx.path(kQuestions), result.questions);
  write_json(ctx.path(kBenchManifest), result.manifest.to_json());
  print_ok(ctx, "bench-build",
           {{"n_assertions", result.assertions.size()}, {"n_questions", result.questions.size()}});
}

void cmd_bench_validate(Context& ctx, const std::string& a_flag, const std::string& q_flag) {
  const auto split = load_split(ctx);
  const auto ap = input_path(ctx, a_flag, kAssertions);
  const auto qp = input_path(ctx, q_flag, kQuestions);
  require_file(ap, "run bench-build first");
  require_file(qp, "run bench-build first");
  const auto assertions = bench::read_assertions_jsonl(ap);
  const auto questions = bench::read_questions_jsonl(qp);
  const bench::Quotas quotas{2 * ctx.cfg.n_pairs, ctx.cfg.n_questions};
  std::string model;
  std::uint64_t seed = ctx.cfg.stage_seed("bench-build");
  std::error_code ec;
  if (fs::is_regular_file(ctx.path(kBenchManifest), ec)) {
    const auto m = read_json(ctx.path(kBenchManifest));
    model = m.value("generator_model_id", std::string());
    seed = m.value("seed", seed);
  }
  const auto manifest = bench::validate_benchmark(assertions, questions, split, quotas, model, seed);
  print_ok(ctx, "bench-validate", {{"manifest", manifest.to_json()}});
}

void cmd_eval_tf(Context& ctx, const std::string& run, const std::string& retriever,
                 const std::string& items_flag) {
  const auto& e = require_endpoint(ctx.cfg.candidate, "candidate");
  const auto p = input_path(ctx, items_flag, kAssertions);
  require_file(p, "run bench-build first");
  const auto items = bench::read_assertions_jsonl(p);
  const auto backend = llm::make_backend(e.backend);
  std::unique_ptr<Retriever> r;
  if (retriever != "none") r = std::make_unique<Retriever>(ctx, retriever);
  const auto answers = eval::run_assertion_eval(items, *backend, ctx.prompts.eval_tf,
                                                eval_options(e), r ? r->augmenter() : nullptr);
  const auto dir = ctx.run_dir(run);
  eval::write_answers_jsonl(dir / "answers_tf.jsonl", answers);
  const auto report = eval::score_assertions(answers, items, ctx.cfg.abstention_policy);
  merge_report(dir, "assertions", report.to_json());
  std::size_t flagged = 0;
  for (const auto& a : answers) flagged += a.audit.flagged() ? 1 : 0;
  print_ok(ctx, "eval-tf",
           {{"run", run},
            {"n_items", items.size()},
            {"accuracy_train", report.accuracy(corpus::Split::Train)},
            {"accuracy_test", report.accuracy(corpus::Split::Test)},
            {"n_audit_flagged", flagged}});
}

void cmd_eval_qa(Context& ctx, const std::string& run, const std::string& retriever,
                 const std::string& items_flag) {
  const auto& e = require_endpoint(ctx.cfg.candidate, "candidate");
  const auto p = input_path(ctx, items_flag, kQuestions);
  require_file(p, "run bench-build first");
  const auto items = bench::read_questions_jsonl(p);
  const auto backend = llm::make_backend(e.backend);
  std::unique_ptr<Retriever> r;
  if (retriever != "none") r = std::make_unique<Retriever>(ctx, retriever);
  const auto answers = eval::run_qa_eval(items, *backend, ctx.prompts.eval_qa, eval_options(e),
                                         r ? r->augmenter() : nullptr);
  eval::write_answers_jsonl(ctx.run_dir(run) / "answers_qa.jsonl", answers);
  std::size_t failed = 0;
  for (const auto& a : answers) failed += a.error ? 1 : 0;
  print_ok(ctx, "eval-qa", {{"run", run}, {"n_items", items.size()}, {"n_failed", failed}});
}

void cmd_judge(Context& ctx, const std::string& run, const std::string& items_flag) {
  const auto& e = require_endpoint(ctx.cfg.judge, "judge");
  const auto p = input_path(ctx, items_flag, kQuestions);
  require_file(p, "run bench-build first");
  const auto items = bench::read_questions_jsonl(p);
  const auto dir = ctx.run_dir(run);
  require_file(dir / "answers_qa.jsonl", "run eval-qa first");
  const auto answers = eval::read_answers_jsonl(dir / "answers_qa.jsonl");
  const auto backend = llm::make_backend(e.backend);
  eval::JudgeOptions opts;
  opts.model_id = e.model_id;
  opts.max_output_tokens = e.max_output_tokens;
  opts.max_in_flight = e.max_in_flight;
  const auto verdicts = eval::judge_answers(items, answers, *backend, ctx.prompts.judge, opts);
  eval::write_judgements_jsonl(dir / "judge_verdicts.jsonl", verdicts);
  const auto report = eval::score_judgements(verdicts, items, ctx.cfg.abstention_policy);
  merge_report(dir, "open_qa", report.to_json());
  print_ok(ctx, "judge",
           {{"run", run},
            {"n_items", items.size()},
            {"accuracy_train", report.accuracy(corpus::Split::Train)},
            {"accuracy_test", report.accuracy(corpus::Split::Test)}});
}

void cmd_report(Context& ctx, std::vector<std::string> runs) {
  const auto root = ctx.cfg.output_dir / kRunsDir;
  if (runs.empty()) {
    std::error_code ec;
    if (fs::is_directory(root, ec)) {
      for (const auto& entry : fs::directory_iterator(root)) {
        if (entry.is_directory() && fs::is_regular_file(entry.path() / "report.json")) {
          runs.push_back(entry.path().filename().string());
        }
      }
    }
    std::sort(runs.begin(), runs.end());
  }
  if (runs.empty()) throw Error(ErrorCode::MissingFile, "no runs with a report.json under " + root.string());
  std::vector<eval::ResultRow> rows;
  Json summary = Json::object();
  for (const auto& run : runs) {
    const auto p = root / run / "report.json";
    require_file(p, "evaluate run '" + run + "' first");
    const auto j = read_json(p);
    eval::ResultRow row;
    row.name = run;
    if (j.contains("assertions")) row.assertions = eval::EvalReport::from_json(j["assertions"]);
    if (j.contains("open_qa")) row.open_qa = eval::EvalReport::from_json(j["open_qa"]);
    rows.push_back(std::move(row));
    summary[run] = j;
  }
  const auto table = eval::format_results_table(rows);
  write_file(ctx.path(kReportTable), table);
  write_json(ctx.path("report.json"), summary);
  ctx.out << table;
}

void cmd_rag_index(Context& ctx) {
  const auto guidelines = load_truncated(ctx);
  const auto chunks = retrieval::chunk_corpus(guidelines, ctx.cfg.chunking);
  const auto dir = ctx.path(kRagDir);
  retrieval::write_chunks_jsonl(dir / "chunks.jsonl", chunks);
  const auto bm25 = retrieval::build_bm25(chunks, ctx.cfg.bm25.k1, ctx.cfg.bm25.b);
  bm25.save(dir / "bm25.idx");
  auto meta = bm25.meta_json();
  meta["chunk_size"] = ctx.cfg.chunking.size;
  meta["overlap"] = ctx.cfg.chunking.overlap;
  write_json(dir / "bm25.json", meta);
  Json fields{{"n_chunks", chunks.size()}, {"dense", false}};
  if (ctx.cfg.embedding) {
    const auto backend = llm::make_backend(ctx.cfg.embedding->backend);
    const auto dense = retrieval::build_dense(chunks, *backend, ctx.cfg.embedding->model_id);
    dense.save(dir / "dense.idx");
    write_json(dir / "dense.json", Json{{"model_id", ctx.cfg.embedding->model_id},
                                        {"dimension", dense.dimension()},
                                        {"n_chunks", dense.size()}});
    fields["dense"] = true;
  }
  print_ok(ctx, "rag-index", fields);
}

void cmd_rag_query(Context& ctx, const std::string& query, const std::string& retriever,
                   std::size_t k) {
  const Retriever r(ctx, retriever);
  const auto result = r.search(query, k == 0 ? ctx.cfg.top_k : k);
  Json hits = Json::array();
  for (std::size_t i = 0; i < result.hits.size(); ++i) {
    const auto& h = result.hits[i];
    hits.push_back({{"rank", i + 1},
                    {"chunk_id", h.chunk_id},
                    {"guideline_id", r.table().at(h.chunk_id).guideline_id},
                    {"score", h.score}});
  }
  print_ok(ctx, "rag-query", {{"retriever", retriever}, {"hits", hits}});
}

void cmd_pack_cpt(Context& ctx, const std::string& docs_flag, std::size_t max_len) {
  const auto docs = load_docs(input_path(ctx, docs_flag, kSynthetic), "domain");
  const auto tokenizer = train::make_tokenizer(ctx.cfg.tokenizer_vocab);
  const auto seqs = train::pack_cpt_dataset(docs, *tokenizer, max_len);
  train::write_packed_jsonl(ctx.path(kCptPacked), seqs);
  std::size_t n_tokens = 0;
  for (const auto& s : seqs) n_tokens += s.token_ids.size();
  print_ok(ctx, "pack-cpt",
           {{"n_sequences", seqs.size()}, {"n_tokens", n_tokens}, {"tokenizer", tokenizer->name()}});
}

void cmd_build_sft(Context& ctx, const std::string& items_flag) {
  const auto items = sft_items(ctx, items_flag);
  const auto split = load_split(ctx);
  train::ensure_train_only(items, split, "build-sft");
  const auto& e = require_endpoint(ctx.cfg.teacher, "teacher");
  const auto guidelines = load_truncated(ctx);
  const auto backend = llm::make_backend(e.backend);
  const auto tokenizer = train::make_tokenizer(ctx.cfg.tokenizer_vocab);
  train::SftOptions opts;
  opts.teacher_model_id = e.model_id;
  opts.max_output_tokens = e.max_output_tokens;
  opts.max_in_flight = e.max_in_flight;
  const auto examples = train::build_sft_dataset(items, split, guidelines, *backend,
                                                 ctx.prompts.sft_teacher, ctx.prompts.eval_tf,
                                                 *tokenizer, opts);
  train::write_sft_jsonl(ctx.path(kSft), examples);
  print_ok(ctx, "build-sft", {{"n_examples", examples.size()}});
}

void cmd_mix_replay(Context& ctx, const std::string& docs_flag, const std::string& replay_flag,
                    std::optional<double> fraction) {
  const auto domain = load_docs(input_path(ctx, docs_flag, kSynthetic), "domain");
  fs::path replay_path;
  if (!replay_flag.empty()) {
    replay_path = replay_flag;
  } else if (ctx.cfg.replay_pool) {
    replay_path = *ctx.cfg.replay_pool;
  } else {
    throw Error(ErrorCode::Config, "no replay pool: set replay.pool or pass --replay");
  }
  const auto pool = load_docs(replay_path, "replay");
  const double f = fraction.value_or(ctx.cfg.replay_fraction);
  const auto mixed = train::mix_replay(domain, pool, f, ctx.cfg.stage_seed("mix-replay"));
  train::write_text_docs_jsonl(ctx.path(kMixed), mixed);
  print_ok(ctx, "mix-replay",
           {{"n_domain", domain.size()},
            {"n_replay", mixed.size() - domain.size()},
            {"n_total", mixed.size()}});
}

void cmd_rollouts(Context& ctx, const std::string& items_flag) {
  const auto items = sft_items(ctx, items_flag);
  const auto split = load_split(ctx);
  train::ensure_train_only(items, split, "rollouts");
  const auto& e = require_endpoint(ctx.cfg.policy, "policy");
  const auto backend = llm::make_backend(e.backend);
  train::RolloutOptions opts;
  opts.model_id = e.model_id;
  opts.group_size = ctx.cfg.group_size;
  opts.max_completion_tokens = ctx.cfg.max_completion_tokens;
  opts.temperature = ctx.cfg.rollout_temperature;
  opts.seed = ctx.cfg.stage_seed("rollouts");
  opts.reward = ctx.cfg.reward;
  opts.max_in_flight = e.max_in_flight;
  const auto groups =
      train::build_rollout_groups(items, split, *backend, ctx.prompts.eval_tf, opts);
  train::write_rollouts_jsonl(ctx.path(kRollouts), groups);
  double reward_sum = 0.0;
  std::size_t n = 0;
  for (const auto& g : groups) {
    for (const auto r : g.rewards) reward_sum += r;
    n += g.rewards.size();
  }
  print_ok(ctx, "rollouts",
           {{"n_groups", groups.size()}, {"mean_reward", n ? reward_sum / static_cast<double>(n) : 0.0}});
}

void cmd_export_config(Context& ctx, const std::string& stage) {
  std::vector<train::Stage> stages;
  if (stage == "all") {
    stages = {train::Stage::CPT, train::Stage::SFT, train::Stage::GRPO};
  } else {
    stages = {train::parse_stage(stage)};
  }
  Json written = Json::array();
  for (const auto s : stages) {
    const auto c = train::export_training_config(s, ctx.cfg.reward);
    const auto name = "config_" + std::string(train::to_string(s)) + ".json";
    write_json(ctx.path(name), c.to_json());
    written.push_back(name);
  }
  print_ok(ctx, "export-config", {{"written", written}});
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage: return kUsage;
    case ErrorCode::Config:
    case ErrorCode::AuthMissing: return kConfigError;
    default: return kStageFailure;
  }
}

void print_error(std::ostream& err, const std::string& command, std::string_view code,
                 const std::string& message, int exit_code) {
  Json j;
  j["status"] = "error";
  j["command"] = command;
  j["error"] = code;
  j["message"] = message;
  j["exit_code"] = exit_code;
  err << j.dump() << "\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"guidekit: guideline corpus, synthetic data, benchmark and training-data pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::string corpus_dir, manifest, output_dir, prompts_dir, tokenizer_vocab, abstention;
  std::uint64_t seed = 0;
  std::size_t samples = 0, truncation = 0;
  bool offline = false;
  std::vector<std::string> sets;
  app.add_option("--config", config_path, "Pipeline config (JSON); defaults to ./guidekit.json when present");
  auto* o_corpus = app.add_option("--corpus-dir", corpus_dir, "Directory of guideline texts (corpus_dir)");
  auto* o_manifest = app.add_option("--manifest", manifest, "Corpus manifest JSONL (manifest)");
  auto* o_out = app.add_option("--output-dir", output_dir, "Directory receiving every artifact (output_dir)");
  auto* o_seed = app.add_option("--seed", seed, "Root seed; stages derive their own (seed)");
  auto* o_offline = app.add_flag("--offline", offline, "Refuse to run unless every backend is a mock (offline)");
  auto* o_prompts = app.add_option("--prompts-dir", prompts_dir, "Prompt template overrides (prompts_dir)");
  auto* o_vocab = app.add_option("--tokenizer-vocab", tokenizer_vocab, "Vocabulary file for packing (tokenizer_vocab)");
  auto* o_abst = app.add_option("--abstention-policy", abstention,
                                "exclude_from_denominator | count_as_incorrect (abstention_policy)");
  auto* o_samples = app.add_option("--samples-per-prompt", samples, "Samples per generation prompt (samples_per_prompt)");
  auto* o_trunc = app.add_option("--truncation-limit", truncation, "Truncation limit in characters (truncation_limit)");
  app.add_option("--set", sets, "Override any config key: --set retrieval.k=5 (repeatable)");

  auto sub = [&](const char* name, const char* help) {
    auto* s = app.add_subcommand(name, help);
    s->fallthrough();
    return s;
  };

  std::string run = "parametric", retriever = "none", items_flag, docs_flag, replay_flag;
  std::string assertions_flag, questions_flag, query, stage = "all";
  std::vector<std::string> runs;
  std::size_t k = 0, max_len = train::kCptMaxLength;
  std::optional<double> fraction;

  sub("ingest", "Read the corpus, truncate, compute stats and assign the split");
  sub("split", "Reassign the train/test split from the root seed");
  sub("plan", "Write the synthetic-generation plan");
  sub("generate", "Run the generation plan against the configured generators");
  sub("leakage-check", "Fail when a QA document comes from a test-split guideline")
      ->add_option("--docs", docs_flag, "Synthetic documents (default: synthetic.jsonl)");
  sub("bench-build", "Generate both benchmarks");
  {
    auto* s = sub("bench-validate", "Check balance, quotas and pairing of the benchmarks");
    s->add_option("--assertions", assertions_flag, "True/false items (default: healthbench_br.jsonl)");
    s->add_option("--questions", questions_flag, "Open questions (default: pcdt_qa.jsonl)");
  }
  for (const char* name : {"eval-tf", "eval-qa"}) {
    auto* s = sub(name, std::string(name) == "eval-tf" ? "Answer the true/false benchmark"
                                                       : "Answer the open-question benchmark");
    s->add_option("--run", run, "Run name under runs/ (default: parametric)");
    s->add_option("--retriever", retriever, "none | bm25 | dense")->check(CLI::IsMember({"none", "bm25", "dense"}));
    s->add_option("--items", items_flag, "Benchmark file to evaluate");
  }
  {
    auto* s = sub("judge", "Grade open answers with the judge model");
    s->add_option("--run", run, "Run name under runs/ (default: parametric)");
    s->add_option("--items", items_flag, "Open-question file (default: pcdt_qa.jsonl)");
  }
  sub("report", "Print the results table across runs")
      ->add_option("--runs", runs, "Runs to include (default: every run with a report)");
  sub("rag-index", "Chunk the corpus and build the BM25 (and dense) indexes");
  {
    auto* s = sub("rag-query", "Query a retrieval index");
    s->add_option("--query", query, "Query text")->required();
    s->add_option("--retriever", retriever, "bm25 | dense")->check(CLI::IsMember({"bm25", "dense"}));
    s->add_option("--k", k, "Number of hits (default: retrieval.k)");
  }
  {
    auto* s = sub("rag-eval", "eval-tf, eval-qa and judge with retrieval into runs/rag-<retriever>");
    s->add_option("--retriever", retriever, "bm25 | dense")->required()->check(CLI::IsMember({"bm25", "dense"}));
    s->add_option("--run", run, "Run name (default: rag-<retriever>)");
  }
  {
    auto* s = sub("pack-cpt", "Tokenize and truncate documents for continual pre-training");
    s->add_option("--docs", docs_flag, "Documents (default: synthetic.jsonl)");
    s->add_option("--max-len", max_len, "Maximum sequence length");
  }
  sub("build-sft", "Teacher-answered SFT examples from train items")
      ->add_option("--items", items_flag, "Items (default: train items of healthbench_br.jsonl)");
  {
    auto* s = sub("mix-replay", "Mix replay documents into the domain corpus");
    s->add_option("--docs", docs_flag, "Domain documents (default: synthetic.jsonl)");
    s->add_option("--replay", replay_flag, "Replay pool JSONL (default: replay.pool)");
    s->add_option("--fraction", fraction, "Replay fraction of the output (default: replay.fraction)");
  }
  sub("rollouts", "Sample GRPO rollout groups with rewards and advantages")
      ->add_option("--items", items_flag, "Items (default: train items of healthbench_br.jsonl)");
  sub("export-config", "Write trainer hyperparameter configs")
      ->add_option("--stage", stage, "cpt | sft | grpo | all")
      ->check(CLI::IsMember({"cpt", "sft", "grpo", "all"}));

  std::string command = "guidekit";
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    print_error(err, command, "Usage", e.what(), kUsage);
    return kUsage;
  }
  const auto* chosen = app.get_subcommands().front();
  command = chosen->get_name();
  if (command == "rag-eval" && run == "parametric") run = "rag-" + retriever;

  try {
    Json raw = Json::object();
    fs::path base = fs::current_path();
    if (config_path.empty() && fs::is_regular_file("guidekit.json")) config_path = "guidekit.json";
    if (!config_path.empty()) {
      try {
        raw = read_json(config_path);
      } catch (const Error& e) {
        throw Error(ErrorCode::Config, e.what());
      }
      base = fs::absolute(config_path).parent_path();
    }
    auto set_path = [&](CLI::Option* o, const char* key, const std::string& v) {
      if (o->count() > 0) raw[key] = fs::absolute(v).lexically_normal().string();
    };
    set_path(o_corpus, "corpus_dir", corpus_dir);
    set_path(o_manifest, "manifest", manifest);
    set_path(o_out, "output_dir", output_dir);
    set_path(o_prompts, "prompts_dir", prompts_dir);
    set_path(o_vocab, "tokenizer_vocab", tokenizer_vocab);
    if (o_seed->count() > 0) raw["seed"] = seed;
    if (o_offline->count() > 0) raw["offline"] = offline;
    if (o_abst->count() > 0) raw["abstention_policy"] = abstention;
    if (o_samples->count() > 0) raw["samples_per_prompt"] = samples;
    if (o_trunc->count() > 0) raw["truncation_limit"] = truncation;
    for (const auto& s : sets) apply_override(raw, s);

    PipelineConfig cfg;
    try {
      cfg = PipelineConfig::from_json(raw, base);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::Config) throw;
      throw Error(ErrorCode::Config, e.what());
    }
    Context ctx{std::move(cfg), {}, out};
    if (ctx.cfg.offline) {
      const auto remote = ctx.cfg.remote_backends();
      if (!remote.empty()) {
        std::string names;
        for (const auto& n : remote) names += (names.empty() ? "" : ", ") + n;
        throw Error(ErrorCode::Config, "--offline refuses remote backends: " + names);
      }
    }
    ctx.prompts = ctx.cfg.prompts_dir ? load_prompts(*ctx.cfg.prompts_dir) : builtin_prompts();

    if (command == "ingest") cmd_ingest(ctx);
    else if (command == "split") cmd_split(ctx);
    else if (command == "plan") cmd_plan(ctx);
    else if (command == "generate") cmd_generate(ctx);
    else if (command == "leakage-check") cmd_leakage_check(ctx, docs_flag);
    else if (command == "bench-build") cmd_bench_build(ctx);
    else if (command == "bench-validate") cmd_bench_validate(ctx, assertions_flag, questions_flag);
    else if (command == "eval-tf") cmd_eval_tf(ctx, run, retriever, items_flag);
    else if (command == "eval-qa") cmd_eval_qa(ctx, run, retriever, items_flag);
    else if (command == "judge") cmd_judge(ctx, run, items_flag);
    else if (command == "report") cmd_report(ctx, runs);
    else if (command == "rag-index") cmd_rag_index(ctx);
    else if (command == "rag-query") cmd_rag_query(ctx, query, retriever == "none" ? "bm25" : retriever, k);
    else if (command == "rag-eval") {
      cmd_eval_tf(ctx, run, retriever, "");
      cmd_eval_qa(ctx, run, retriever, "");
      if (ctx.cfg.judge) cmd_judge(ctx, run, "");
    } else if (command == "pack-cpt") cmd_pack_cpt(ctx, docs_flag, max_len);
    else if (command == "build-sft") cmd_build_sft(ctx, items_flag);
    else if (command == "mix-replay") cmd_mix_replay(ctx, docs_flag, replay_flag, fraction);
    else if (command == "rollouts") cmd_rollouts(ctx, items_flag);
    else if (command == "export-config") cmd_export_config(ctx, stage);
    return kSuccess;
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    print_error(err, command, to_string(e.code()), e.what(), code);
    return code;
  } catch (const nlohmann::json::exception& e) {
    print_error(err, command, "Parse", e.what(), kStageFailure);
    return kStageFailure;
  } catch (const std::exception& e) {
    print_error(err, command, "Internal", e.what(), kStageFailure);
    return kStageFailure;
  }
}

}  // namespace guidekit::cli
