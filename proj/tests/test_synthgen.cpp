#include <doctest.h>

#include <algorithm>

#include "guidekit/error.hpp"
#include "guidekit/synthgen.hpp"
#include "support.hpp"

using namespace gk_test;
namespace gk = guidekit;
namespace sy = guidekit::synth;
using gk::corpus::Split;
using sy::Format;

namespace {

gk::corpus::SplitAssignment split_of(std::size_t n_train, std::size_t n_test) {
  gk::corpus::SplitMap m;
  for (std::size_t i = 0; i < n_train + n_test; ++i) {
    m["g" + std::to_string(i)] = i < n_train ? Split::Train : Split::Test;
  }
  return {m, 0};
}

std::vector<gk::corpus::TruncatedGuideline> texts(const gk::corpus::SplitAssignment& s) {
  std::vector<gk::corpus::TruncatedGuideline> out;
  std::size_t i = 0;
  for (const auto& [id, _] : s.entries()) out.push_back({id, guideline_text(i++), false});
  return out;
}

sy::Generator mock_generator(const std::string& name, const std::string& jsonl) {
  sy::GeneratorSpec spec;
  spec.name = name;
  spec.model_id = name;
  spec.backend = gk::llm::MockScript::parse(jsonl);
  auto gens = sy::make_generators(std::span(&spec, 1));
  return gens.front();
}

const char* kEcho = R"({"default":{"content":"documento {{seed}} com cinco palavras"}})";

}  // namespace

TEST_CASE("plan sizes") {
  const std::vector<std::string> one = {"gen-a"};
  const std::vector<std::string> two = {"gen-a", "gen-b"};
  CHECK(sy::build_plan(split_of(89, 89), one, {Format::Rephrase}).size() == 1780);
  CHECK(sy::build_plan(split_of(89, 89), one, sy::kAllFormats).size() == 4450);
  CHECK(sy::build_plan(split_of(89, 89), two, sy::kAllFormats, 20).size() == 17800);
  CHECK(sy::plan_size(178, 89, 1, sy::kAllFormats) == 4450);
  CHECK(sy::plan_size(178, 89, 2, {Format::QA}, 10) == 1780);
}

TEST_CASE("plan order and QA restriction") {
  const auto split = split_of(2, 3);
  const std::vector<std::string> gens = {"z", "a"};
  const auto plan = sy::build_plan(split, gens, sy::kAllFormats, 3);
  CHECK(std::is_sorted(plan.begin(), plan.end()));
  CHECK(plan.size() == sy::plan_size(5, 2, 2, sy::kAllFormats, 3));
  for (const auto& t : plan) {
    if (t.format == Format::QA) CHECK(split.at(t.guideline_id) == Split::Train);
  }
  const auto back = sy::GenerationTask::from_json(plan[7].to_json());
  CHECK(back == plan[7]);
  CHECK(plan.front().key() == "g0/a/rephrase/0");
}

TEST_CASE("plan preconditions") {
  const auto split = split_of(1, 1);
  const std::vector<std::string> none;
  const std::vector<std::string> dup = {"a", "a"};
  const std::vector<std::string> one = {"a"};
  CHECK_THROWS_AS((void)sy::build_plan(split, none, sy::kAllFormats), gk::Error);
  CHECK_THROWS_AS((void)sy::build_plan(split, dup, sy::kAllFormats), gk::Error);
  CHECK_THROWS_AS((void)sy::build_plan(split, one, {}), gk::Error);
  CHECK_THROWS_AS((void)sy::build_plan(split, one, sy::kAllFormats, 0), gk::Error);
}

TEST_CASE("prompt rendering embeds the full text") {
  const gk::corpus::TruncatedGuideline g{"g0", guideline_text(3), false};
  for (const auto f : sy::kAllFormats) {
    const auto r = sy::render_prompt(g, f);
    REQUIRE(r.messages.size() == 1);
    CHECK(r.last_user_content().find(g.text) != std::string::npos);
  }
  CHECK(sy::render_prompt(g, Format::Wiki).last_user_content().find("all key numerical values") !=
        std::string::npos);
  CHECK_THROWS_AS((void)sy::render_prompt({"g0", "", false}, Format::Rephrase), gk::Error);
}

TEST_CASE("generation over a small corpus") {
  const auto split = split_of(3, 3);
  const auto guidelines = texts(split);
  const std::vector<sy::Generator> gens = {mock_generator("mock", kEcho)};
  const std::vector<std::string> names = {"mock"};
  const auto plan = sy::build_plan(split, names, {Format::Rephrase, Format::Wiki, Format::QA}, 2);
  CHECK(plan.size() == 30);
  const auto result = sy::generate(plan, gens, guidelines, gk::builtin_prompts(), {7});
  CHECK(result.docs.size() == 30);
  CHECK(result.failures.empty());
  for (std::size_t i = 0; i < plan.size(); ++i) CHECK(result.docs[i].task == plan[i]);
  CHECK(result.docs[0].token_count == gk::estimate_tokens(result.docs[0].text));
  CHECK(result.docs[0].text != result.docs[1].text);
  CHECK(sy::verify_no_leakage(result.docs, split).clean());

  const auto again = sy::generate(plan, gens, guidelines, gk::builtin_prompts(), {7});
  for (std::size_t i = 0; i < plan.size(); ++i) CHECK(again.docs[i].text == result.docs[i].text);
}

TEST_CASE("empty generations are retried then recorded") {
  const auto split = split_of(1, 0);
  const auto guidelines = texts(split);
  const std::vector<sy::Generator> gens = {mock_generator("empty", R"({"default":{"content":"   "}})")};
  const std::vector<std::string> names = {"empty"};
  const auto plan = sy::build_plan(split, names, {Format::Rephrase}, 1);
  const auto r = sy::generate(plan, gens, guidelines, gk::builtin_prompts(), {1});
  CHECK(r.docs.empty());
  REQUIRE(r.failures.size() == 1);
  CHECK(r.failures[0].attempts == 2);
  CHECK(r.failures[0].task == plan[0]);
}

TEST_CASE("generation rejects unknown guidelines and generators") {
  const auto split = split_of(1, 0);
  const std::vector<sy::Generator> gens = {mock_generator("mock", kEcho)};
  const std::vector<std::string> names = {"mock"};
  const auto plan = sy::build_plan(split, names, {Format::Rephrase}, 1);
  CHECK_THROWS_AS((void)sy::generate(plan, gens, {}, gk::builtin_prompts()), gk::Error);
  const std::vector<std::string> other = {"other"};
  const auto plan2 = sy::build_plan(split, other, {Format::Rephrase}, 1);
  CHECK_THROWS_AS((void)sy::generate(plan2, gens, texts(split), gk::builtin_prompts()), gk::Error);
  CHECK_THROWS_AS((void)sy::make_generators({}), gk::Error);
}

TEST_CASE("leakage check") {
  const auto split = split_of(1, 1);
  sy::SyntheticDoc ok{{"g0", "m", Format::QA, 0}, "texto", 2};
  sy::SyntheticDoc rephrase_test{{"g1", "m", Format::Rephrase, 0}, "texto", 2};
  sy::SyntheticDoc bad{{"g1", "m", Format::QA, 3}, "texto", 2};
  const std::vector<sy::SyntheticDoc> clean = {ok, rephrase_test};
  CHECK(sy::verify_no_leakage(clean, split).clean());
  const std::vector<sy::SyntheticDoc> dirty = {ok, bad, rephrase_test};
  const auto r = sy::verify_no_leakage(dirty, split);
  REQUIRE(r.violations.size() == 1);
  CHECK(r.violations[0] == bad.task);
  const std::vector<sy::SyntheticDoc> stranger = {{{"zz", "m", Format::Wiki, 0}, "t", 1}};
  CHECK_THROWS_AS((void)sy::verify_no_leakage(stranger, split), gk::Error);
}

TEST_CASE("generation summary") {
  std::vector<sy::SyntheticDoc> docs;
  for (std::size_t i = 0; i < 10; ++i) {
    docs.push_back({{"g" + std::to_string(i), i < 4 ? "a" : "b",
                     i % 2 ? Format::Wiki : Format::Rephrase, 0},
                    "t",
                    100});
  }
  const auto s = sy::summarize_generation(docs);
  CHECK(s.total.n_docs == 10);
  CHECK(s.total.total_tokens == 1000);
  CHECK(s.total.avg_tokens() == 100.0);
  CHECK(s.by_generator.at("a").n_docs == 4);
  std::size_t sum = 0;
  for (const auto& [_, c] : s.by_format) sum += c.n_docs;
  CHECK(sum == s.total.n_docs);
  CHECK_THROWS_AS((void)sy::summarize_generation({}), gk::Error);
}

TEST_CASE("synthetic jsonl round-trip") {
  TempDir tmp;
  const std::vector<sy::SyntheticDoc> docs = {{{"g0", "m", Format::QA, 2}, "Pergunta? Resposta.", 7}};
  sy::write_synthetic_jsonl(tmp / "s.jsonl", docs);
  const auto back = sy::read_synthetic_jsonl(tmp / "s.jsonl");
  REQUIRE(back.size() == 1);
  CHECK(back[0].task == docs[0].task);
  CHECK(back[0].text == docs[0].text);
  CHECK(back[0].token_count == 7);
  CHECK(sy::parse_format("wiki") == Format::Wiki);
  CHECK_THROWS_AS((void)sy::parse_format("poem"), gk::Error);
}
