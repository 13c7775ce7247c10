#include "guidekit/synthgen.hpp"

#include <algorithm>
#include <map>

#include "guidekit/error.hpp"
#include "guidekit/random.hpp"

namespace guidekit::synth {

namespace {

template <typename T>
T get_field(const Json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorCode::Parse, std::string("record lacks field '") + name + "'");
  }
}

void put_task(Json& j, const GenerationTask& t) {
  j["guideline_id"] = t.guideline_id;
  j["generator"] = t.generator;
  j["format"] = to_string(t.format);
  j["sample_index"] = t.sample_index;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t\r\n") == std::string_view::npos; }

}  // namespace

std::string_view to_string(Format f) noexcept {
  switch (f) {
    case Format::Rephrase: return "rephrase";
    case Format::Wiki: return "wiki";
    case Format::QA: return "qa";
  }
  return "rephrase";
}

Format parse_format(std::string_view s) {
  if (s == "rephrase") return Format::Rephrase;
  if (s == "wiki") return Format::Wiki;
  if (s == "qa") return Format::QA;
  throw Error(ErrorCode::Parse, "unknown format '" + std::string(s) + "'");
}

std::vector<Generator> make_generators(std::span<const GeneratorSpec> specs) {
  if (specs.empty()) throw Error(ErrorCode::InvalidArgument, "no generators configured");
  std::set<std::string> names;
  std::vector<Generator> out;
  for (const auto& s : specs) {
    if (s.name.empty()) throw Error(ErrorCode::InvalidArgument, "generator without a name");
    if (!names.insert(s.name).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate generator '" + s.name + "'");
    }
    out.push_back({s, llm::make_backend(s.backend)});
  }
  return out;
}

std::string GenerationTask::key() const {
  return guideline_id + "/" + generator + "/" + std::string(to_string(format)) + "/" +
         std::to_string(sample_index);
}

Json GenerationTask::to_json() const {
  Json j;
  put_task(j, *this);
  return j;
}

GenerationTask GenerationTask::from_json(const Json& j) {
  GenerationTask t;
  t.guideline_id = get_field<std::string>(j, "guideline_id");
  t.generator = get_field<std::string>(j, "generator");
  t.format = parse_format(get_field<std::string>(j, "format"));
  t.sample_index = get_field<std::size_t>(j, "sample_index");
  return t;
}

std::vector<GenerationTask> build_plan(const corpus::SplitAssignment& split,
                                       std::span<const std::string> generator_names,
                                       const std::set<Format>& formats,
                                       std::size_t samples_per_prompt) {
  if (generator_names.empty()) throw Error(ErrorCode::InvalidArgument, "no generators in plan");
  if (formats.empty()) throw Error(ErrorCode::InvalidArgument, "no formats in plan");
  if (samples_per_prompt == 0) throw Error(ErrorCode::InvalidArgument, "samples_per_prompt is 0");
  std::vector<std::string> gens(generator_names.begin(), generator_names.end());
  std::sort(gens.begin(), gens.end());
  if (std::adjacent_find(gens.begin(), gens.end()) != gens.end()) {
    throw Error(ErrorCode::DuplicateId, "duplicate generator name in plan");
  }
  std::vector<GenerationTask> plan;
  plan.reserve(plan_size(split.size(), split.count(corpus::Split::Train), gens.size(), formats,
                         samples_per_prompt));
  // entries() is ordered by id, gens is sorted and std::set orders formats, so
  // the nested loops emit tasks already in key order.
  for (const auto& [gid, s] : split.entries()) {
    for (const auto& gen : gens) {
      for (const auto f : formats) {
        if (f == Format::QA && s != corpus::Split::Train) continue;
        for (std::size_t k = 0; k < samples_per_prompt; ++k) plan.push_back({gid, gen, f, k});
      }
    }
  }
  return plan;
}

std::size_t plan_size(std::size_t n_guidelines, std::size_t n_train, std::size_t n_generators,
                      const std::set<Format>& formats, std::size_t samples_per_prompt) {
  const std::size_t per_guideline = formats.count(Format::Rephrase) + formats.count(Format::Wiki);
  const std::size_t qa = formats.count(Format::QA);
  return n_generators * samples_per_prompt * (per_guideline * n_guidelines + qa * n_train);
}

llm::ChatRequest render_prompt(const corpus::TruncatedGuideline& g, Format format,
                               const PromptSet& prompts) {
  if (g.text.empty()) {
    throw Error(ErrorCode::InvalidArgument, "guideline '" + g.id + "' has no text");
  }
  const std::string* tmpl = nullptr;
  switch (format) {
    case Format::Rephrase: tmpl = &prompts.rephrase; break;
    case Format::Wiki: tmpl = &prompts.wiki; break;
    case Format::QA: tmpl = &prompts.qa; break;
  }
  if (!has_placeholder(*tmpl, "guideline")) {
    throw Error(ErrorCode::Config,
                std::string(to_string(format)) + " prompt template lacks {guideline}");
  }
  llm::ChatRequest r;
  r.messages.push_back({llm::Role::User, fill_template(*tmpl, {{"guideline", g.text}})});
  return r;
}

Json SyntheticDoc::to_json() const {
  Json j;
  put_task(j, task);
  j["text"] = text;
  j["token_count"] = token_count;
  return j;
}

SyntheticDoc SyntheticDoc::from_json(const Json& j) {
  SyntheticDoc d;
  d.task = GenerationTask::from_json(j);
  d.text = get_field<std::string>(j, "text");
  d.token_count = get_field<std::size_t>(j, "token_count");
  return d;
}

Json GenerationFailure::to_json() const {
  Json j;
  put_task(j, task);
  j["attempts"] = attempts;
  j["error"] = error;
  return j;
}

GenerationResult generate(std::span<const GenerationTask> plan,
                          std::span<const Generator> generators,
                          std::span<const corpus::TruncatedGuideline> guidelines,
                          const PromptSet& prompts, const GenerateOptions& opts) {
  std::map<std::string, const corpus::TruncatedGuideline*, std::less<>> by_gid;
  for (const auto& g : guidelines) by_gid.emplace(g.id, &g);
  std::map<std::string, const Generator*, std::less<>> by_gen;
  for (const auto& g : generators) by_gen.emplace(g.spec.name, &g);
  if (opts.max_attempts == 0) throw Error(ErrorCode::InvalidArgument, "max_attempts is 0");

  // Prompts are rendered once per (guideline, format) and shared by samples.
  std::map<std::pair<std::string, Format>, llm::ChatRequest> base;
  std::map<std::string, std::vector<std::size_t>> per_generator;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& t = plan[i];
    const auto git = by_gid.find(t.guideline_id);
    if (git == by_gid.end()) {
      throw Error(ErrorCode::UnknownGuideline,
                  "task " + t.key() + " names an unknown guideline");
    }
    if (by_gen.find(t.generator) == by_gen.end()) {
      throw Error(ErrorCode::InvalidArgument, "task " + t.key() + " names an unknown generator");
    }
    const auto bkey = std::make_pair(t.guideline_id, t.format);
    if (base.find(bkey) == base.end()) base.emplace(bkey, render_prompt(*git->second, t.format, prompts));
    per_generator[t.generator].push_back(i);
  }

  std::vector<std::optional<SyntheticDoc>> docs(plan.size());
  std::vector<std::string> last_error(plan.size());
  for (const auto& [name, indices] : per_generator) {
    const auto& gen = *by_gen.at(name);
    std::vector<std::size_t> pending = indices;
    for (std::size_t attempt = 0; attempt < opts.max_attempts && !pending.empty(); ++attempt) {
      std::vector<llm::ChatRequest> requests;
      requests.reserve(pending.size());
      for (const auto i : pending) {
        const auto& t = plan[i];
        auto r = base.at({t.guideline_id, t.format});
        r.model_id = gen.spec.model_id;
        r.temperature = gen.spec.temperature;
        r.max_output_tokens = gen.spec.max_output_tokens;
        auto key = t.key();
        if (attempt > 0) key += "#" + std::to_string(attempt);
        r.seed = static_cast<std::int64_t>(derive_seed(opts.seed, key) >> 1);
        requests.push_back(std::move(r));
      }
      const auto outcomes = llm::complete_batch(requests, *gen.backend);
      std::vector<std::size_t> retry;
      for (std::size_t r = 0; r < outcomes.size(); ++r) {
        const auto i = pending[r];
        if (!outcomes[r].ok()) {
          last_error[i] = outcomes[r].error->what();
          retry.push_back(i);
          continue;
        }
        const auto& text = outcomes[r].response->content;
        if (blank(text)) {
          last_error[i] = "empty generation";
          retry.push_back(i);
          continue;
        }
        docs[i] = SyntheticDoc{plan[i], text, opts.estimator(text)};
      }
      pending = std::move(retry);
    }
  }

  GenerationResult out;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    if (docs[i]) {
      out.docs.push_back(std::move(*docs[i]));
    } else {
      out.failures.push_back({plan[i], opts.max_attempts, last_error[i]});
    }
  }
  std::sort(out.docs.begin(), out.docs.end(),
            [](const auto& a, const auto& b) { return a.task < b.task; });
  std::sort(out.failures.begin(), out.failures.end(),
            [](const auto& a, const auto& b) { return a.task < b.task; });
  return out;
}

Json LeakageReport::to_json() const {
  Json j;
  j["n_violations"] = violations.size();
  Json list = Json::array();
  for (const auto& v : violations) list.push_back(v.to_json());
  j["violations"] = std::move(list);
  return j;
}

LeakageReport verify_no_leakage(std::span<const SyntheticDoc> docs,
                                const corpus::SplitAssignment& split) {
  LeakageReport r;
  for (const auto& d : docs) {
    const auto s = split.at(d.task.guideline_id);
    if (d.task.format == Format::QA && s != corpus::Split::Train) r.violations.push_back(d.task);
  }
  return r;
}

Json DocCounts::to_json() const {
  Json j;
  j["n_docs"] = n_docs;
  j["total_tokens"] = total_tokens;
  j["avg_tokens"] = avg_tokens();
  return j;
}

Json GenerationSummary::to_json() const {
  Json j;
  j["total"] = total.to_json();
  Json gens = Json::object();
  for (const auto& [name, c] : by_generator) gens[name] = c.to_json();
  j["by_generator"] = std::move(gens);
  Json fmts = Json::object();
  for (const auto& [f, c] : by_format) fmts[std::string(to_string(f))] = c.to_json();
  j["by_format"] = std::move(fmts);
  return j;
}

GenerationSummary summarize_generation(std::span<const SyntheticDoc> docs) {
  if (docs.empty()) throw Error(ErrorCode::InvalidArgument, "no documents to summarize");
  GenerationSummary s;
  auto bump = [](DocCounts& c, const SyntheticDoc& d) {
    ++c.n_docs;
    c.total_tokens += d.token_count;
  };
  for (const auto& d : docs) {
    bump(s.total, d);
    bump(s.by_generator[d.task.generator], d);
    bump(s.by_format[d.task.format], d);
  }
  return s;
}

void write_synthetic_jsonl(const std::filesystem::path& p, std::span<const SyntheticDoc> docs) {
  std::vector<Json> rows;
  rows.reserve(docs.size());
  for (const auto& d : docs) rows.push_back(d.to_json());
  write_jsonl(p, rows);
}

std::vector<SyntheticDoc> read_synthetic_jsonl(const std::filesystem::path& p) {
  std::vector<SyntheticDoc> out;
  for (const auto& j : read_jsonl(p)) out.push_back(SyntheticDoc::from_json(j));
  return out;
}

void write_failures_jsonl(const std::filesystem::path& p,
                          std::span<const GenerationFailure> failures) {
  std::vector<Json> rows;
  for (const auto& f : failures) rows.push_back(f.to_json());
  write_jsonl(p, rows);
}

}  // namespace guidekit::synth
