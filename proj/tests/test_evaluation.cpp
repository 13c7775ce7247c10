#include <doctest.h>

#include <atomic>
#include <random>

#include "guidekit/error.hpp"
#include "guidekit/evaluation.hpp"
#include "guidekit/prompts.hpp"
#include "support.hpp"

using namespace gk_test;
namespace gk = guidekit;
namespace ev = guidekit::eval;
using ev::Verdict;
using gk::bench::Label;
using gk::corpus::Split;

namespace {

gk::llm::MockBackend constant(const std::string& text) {
  return gk::llm::MockBackend(
      gk::llm::MockScript::parse(gk::Json{{"default", {{"content", text}}}}.dump()));
}

// Records every request and answers from a function of the prompt.
class FnBackend final : public gk::llm::Backend {
 public:
  explicit FnBackend(std::function<std::string(std::string_view)> f) : f_(std::move(f)) {}
  gk::llm::ChatResponse chat(const gk::llm::ChatRequest& r) const override {
    ++calls_;
    last_temperature_ = r.temperature;
    return {f_(r.last_user_content()), gk::llm::FinishReason::Stop, {}};
  }
  std::vector<std::vector<double>> embed_raw(std::span<const std::string>, std::string_view) const override {
    return {};
  }
  bool is_remote() const noexcept override { return false; }
  std::size_t calls() const { return calls_; }
  double last_temperature() const { return last_temperature_; }

 private:
  std::function<std::string(std::string_view)> f_;
  mutable std::atomic<std::size_t> calls_{0};
  mutable std::atomic<double> last_temperature_{-1};
};

std::vector<gk::bench::AssertionItem> items(std::size_t n, Split split = Split::Train) {
  std::vector<gk::bench::AssertionItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    gk::bench::AssertionItem a;
    a.pair_id = "g-p" + std::to_string(i / 2);
    a.item_id = a.pair_id + (i % 2 ? "-2" : "-1");
    a.guideline_id = "g";
    a.split = split;
    a.statement = "S" + std::to_string(i) + (i % 2 ? " falsa" : " certa");
    a.label = i % 2 ? Label::False : Label::True;
    out.push_back(a);
  }
  return out;
}

std::vector<gk::bench::QAItem> questions(std::size_t n) {
  std::vector<gk::bench::QAItem> out;
  for (std::size_t i = 0; i < n; ++i) {
    gk::bench::QAItem q;
    q.item_id = "g-q" + std::to_string(i);
    q.guideline_id = "g";
    q.split = i % 2 ? Split::Test : Split::Train;
    q.question = "Pergunta " + std::to_string(i) + "?";
    q.reference_answer = "Referência " + std::to_string(i);
    out.push_back(q);
  }
  return out;
}

ev::ModelAnswer answer(const std::string& id, const std::string& text) {
  ev::ModelAnswer a;
  a.item_id = id;
  a.raw_text = text;
  a.verdict = ev::extract_verdict(text);
  return a;
}

}  // namespace

TEST_CASE("verdict extraction examples") {
  CHECK(ev::extract_verdict("Analisando o protocolo... Portanto: Verdadeiro.") == Verdict::True);
  CHECK(ev::extract_verdict("A afirmação é falsa, pois a dose correta é 5 mg.") == Verdict::False);
  CHECK(ev::extract_verdict("Não sei responder.") == Verdict::Abstain);
  CHECK(ev::extract_verdict("É VERDADEIRA") == Verdict::True);
  CHECK(ev::extract_verdict("Falso... ou melhor, verdadeiro") == Verdict::True);
  CHECK(ev::extract_verdict("infalsificável") == Verdict::Abstain);
  CHECK(ev::extract_verdict("\xFF\xFE Falso") == Verdict::False);
}

TEST_CASE("verdict audit flags") {
  const auto both = ev::extract_verdict_detailed("Verdadeiro? Pensando melhor, falso.");
  CHECK(both.verdict == Verdict::False);
  CHECK(both.audit.both_stems);
  CHECK_FALSE(both.audit.negated);
  const auto neg = ev::extract_verdict_detailed("A afirmação não é verdadeira.");
  CHECK(neg.verdict == Verdict::True);
  CHECK(neg.audit.negated);
  CHECK(neg.audit.flagged());
  const auto clean = ev::extract_verdict_detailed("Portanto, falso.");
  CHECK_FALSE(clean.audit.flagged());
  CHECK(clean.position == 10);
  CHECK(ev::extract_verdict_detailed("nada").position == std::u32string::npos);
}

TEST_CASE("verdict extraction property: appending a stem decides") {
  std::mt19937 rng(2);
  const std::vector<std::string> noise = {"a dose", "VERDADEIRO", "falsa", "não", "é", "ÁCIDO", "123", "\n"};
  for (int i = 0; i < 300; ++i) {
    std::string text;
    for (int k = 0; k < 6; ++k) text += noise[rng() % noise.size()] + " ";
    CHECK(ev::extract_verdict(text + " Conclusão: Verdadeiro.") == Verdict::True);
    CHECK(ev::extract_verdict(text + " Conclusão: FALSO") == Verdict::False);
  }
}

TEST_CASE("assertion eval: one answer per item, greedy, warnings for temperature") {
  const auto its = items(4);
  const FnBackend backend([](std::string_view p) {
    return std::string(p.find("certa") != std::string_view::npos ? "Verdadeiro" : "Falso");
  });
  std::vector<std::string> warnings;
  gk::set_log_sink([&](std::string_view m) { warnings.emplace_back(m); });
  ev::EvalOptions opts;
  opts.temperature = 0.7;
  const auto out = ev::run_assertion_eval(its, backend, gk::builtin_prompts().eval_tf, opts);
  gk::set_log_sink({});
  REQUIRE(out.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) CHECK(out[i].item_id == its[i].item_id);
  CHECK(backend.last_temperature() == 0.0);
  CHECK(warnings.size() == 1);
  const auto report = ev::score_assertions(out, its);
  CHECK(report.all.accuracy_excluding == 1.0);
  CHECK(report.all.predicted_true_rate == 0.5);
}

TEST_CASE("assertion eval preconditions and failures") {
  const auto b = constant("Verdadeiro");
  CHECK_THROWS_AS((void)ev::run_assertion_eval(items(2), b, "no placeholder", {}), gk::Error);
  CHECK_THROWS_AS((void)ev::run_assertion_eval({}, b, "{statement}", {}), gk::Error);
  const gk::llm::MockBackend failing(gk::llm::MockScript::parse(R"({"default":{"content":"","finish_reason":"error"}})"));
  const auto out = ev::run_assertion_eval(items(2), failing, "{statement}", {});
  REQUIRE(out.size() == 2);
  CHECK(out[0].error.has_value());
  CHECK(out[0].verdict == Verdict::Abstain);
}

TEST_CASE("augmenter rewrites the prompt") {
  const FnBackend backend([](std::string_view p) { return std::string(p); });
  const auto out = ev::run_assertion_eval(items(1), backend, "{statement}", {},
                                          [](std::string_view q, std::string_view p) {
                                            return "CTX[" + std::string(q) + "] " + std::string(p);
                                          });
  CHECK(out[0].raw_text == "CTX[S0 certa] S0 certa");
}

TEST_CASE("constant-True responder on a balanced set") {
  const auto its = items(40);
  const auto out = ev::run_assertion_eval(its, constant("Resposta: Verdadeiro"), "{statement}", {});
  const auto r = ev::score_assertions(out, its);
  CHECK(r.all.accuracy(ev::AbstentionPolicy::ExcludeFromDenominator) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(r.all.predicted_true_rate.value() == 1.0);
  CHECK(r.train.n_items == 40);
  CHECK(r.test.n_items == 0);
}

TEST_CASE("scoring bookkeeping with abstentions") {
  const auto its = items(10);
  std::vector<ev::ModelAnswer> out;
  for (std::size_t i = 0; i < 10; ++i) {
    const bool truth = its[i].label == Label::True;
    std::string text = truth ? "Verdadeiro" : "Falso";
    if (i == 8) text = truth ? "Falso" : "Verdadeiro";
    if (i == 9) text = "Sem opinião";
    out.push_back(answer(its[i].item_id, text));
  }
  const auto ex = ev::score_assertions(out, its, ev::AbstentionPolicy::ExcludeFromDenominator);
  CHECK(ex.all.accuracy_excluding == doctest::Approx(8.0 / 9.0).epsilon(1e-12));
  CHECK(ex.all.abstention_rate == doctest::Approx(0.1));
  CHECK(ex.all.n_answered + ex.all.n_abstained == ex.all.n_items);
  const auto co = ev::score_assertions(out, its, ev::AbstentionPolicy::CountAsIncorrect);
  CHECK(co.accuracy(Split::Train) == doctest::Approx(0.8).epsilon(1e-12));

  std::vector<ev::ModelAnswer> perfect;
  for (const auto& it : its) perfect.push_back(answer(it.item_id, it.label == Label::True ? "Verdadeiro" : "Falso"));
  for (const auto p : {ev::AbstentionPolicy::ExcludeFromDenominator, ev::AbstentionPolicy::CountAsIncorrect}) {
    CHECK(ev::score_assertions(perfect, its, p).all.accuracy(p) == 1.0);
  }
}

TEST_CASE("scoring conservation property") {
  std::mt19937 rng(21);
  for (int t = 0; t < 100; ++t) {
    const auto its = items(2 + rng() % 30, rng() % 2 ? Split::Train : Split::Test);
    std::vector<ev::ModelAnswer> out;
    for (const auto& it : its) {
      const int r = static_cast<int>(rng() % 4);
      if (r == 3) continue;  // missing answer
      out.push_back(answer(it.item_id, r == 0 ? "Verdadeiro" : r == 1 ? "Falso" : "???"));
    }
    const auto rep = ev::score_assertions(out, its);
    for (const auto* s : {&rep.train, &rep.test, &rep.all}) {
      CHECK(s->n_answered + s->n_abstained == s->n_items);
      CHECK(s->n_correct + s->n_incorrect == s->n_answered);
      CHECK(s->accuracy_excluding >= 0.0);
      CHECK(s->accuracy_excluding <= 1.0);
      CHECK(s->accuracy_counting <= s->accuracy_excluding);
      CHECK(s->abstention_rate <= 1.0);
    }
    CHECK(rep.all.n_items == its.size());
  }
}

TEST_CASE("scoring rejects unknown and duplicate answers") {
  const auto its = items(2);
  std::vector<ev::ModelAnswer> bad = {answer("nope", "Verdadeiro")};
  CHECK_THROWS_AS((void)ev::score_assertions(bad, its), gk::Error);
  std::vector<ev::ModelAnswer> dup = {answer(its[0].item_id, "Falso"), answer(its[0].item_id, "Falso")};
  CHECK_THROWS_AS((void)ev::score_assertions(dup, its), gk::Error);
}

TEST_CASE("judge output parsing") {
  CHECK(ev::parse_judge_output("Looks right.\nCORRECT") == ev::JudgeOutcome::Correct);
  CHECK(ev::parse_judge_output("INCORRECT") == ev::JudgeOutcome::Incorrect);
  CHECK(ev::parse_judge_output("correct? no: incorrect") == ev::JudgeOutcome::Incorrect);
  CHECK(ev::parse_judge_output("Resposta correta") == ev::JudgeOutcome::Correct);
  CHECK(ev::parse_judge_output("INCORRETO") == ev::JudgeOutcome::Incorrect);
  CHECK(ev::parse_judge_output("the answer is partially right") == ev::JudgeOutcome::Unparseable);
  CHECK(ev::parse_judge_output("incorrectly formatted") == ev::JudgeOutcome::Unparseable);
}

TEST_CASE("judging open answers") {
  const auto qs = questions(3);
  const auto tmpl = gk::builtin_prompts().judge;
  const FnBackend correct([](std::string_view) { return std::string("Same content.\nCORRECT"); });
  const auto v = ev::judge_open_answer(qs[0], qs[0].reference_answer, correct, tmpl);
  CHECK(v.verdict == ev::JudgeOutcome::Correct);
  const auto req = ev::render_judge_request(qs[0], "cand", tmpl, {});
  CHECK(req.last_user_content().find(qs[0].reference_answer) != std::string::npos);
  CHECK(req.last_user_content().find("cand") != std::string::npos);
  CHECK(req.model_id == "gpt-4.1");
  CHECK(req.temperature == 0.0);

  const auto before = correct.calls();
  CHECK(ev::judge_open_answer(qs[0], "", correct, tmpl).verdict == ev::JudgeOutcome::Incorrect);
  CHECK(correct.calls() == before);

  const FnBackend vague([](std::string_view) { return std::string("the answer is partially right"); });
  CHECK(ev::judge_open_answer(qs[0], "x", vague, tmpl).verdict == ev::JudgeOutcome::Unparseable);
  CHECK_THROWS_AS((void)ev::render_judge_request(qs[0], "x", "{question} {answer}", {}), gk::Error);
}

TEST_CASE("batch judging and scoring") {
  const auto qs = questions(4);
  const FnBackend judge([](std::string_view p) {
    return std::string(p.find("boa") != std::string_view::npos ? "CORRECT" : "INCORRECT");
  });
  std::vector<ev::ModelAnswer> answers = {answer(qs[0].item_id, "resposta boa"),
                                          answer(qs[1].item_id, "resposta ruim"),
                                          answer(qs[2].item_id, "boa")};
  answers[2].error = "timeout";
  const auto verdicts = ev::judge_answers(qs, answers, judge, gk::builtin_prompts().judge);
  REQUIRE(verdicts.size() == 4);
  CHECK(verdicts[0].verdict == ev::JudgeOutcome::Correct);
  CHECK(verdicts[1].verdict == ev::JudgeOutcome::Incorrect);
  CHECK(verdicts[2].verdict == ev::JudgeOutcome::Unparseable);
  CHECK(verdicts[3].verdict == ev::JudgeOutcome::Unparseable);
  CHECK(judge.calls() == 2);
  const auto r = ev::score_judgements(verdicts, qs);
  CHECK(r.task == ev::Task::OpenQA);
  CHECK(r.all.n_correct == 1);
  CHECK(r.all.n_abstained == 2);
  CHECK(r.all.accuracy_excluding == 0.5);
  CHECK(r.all.accuracy_counting == 0.25);
  CHECK_FALSE(r.all.predicted_true_rate.has_value());
}

TEST_CASE("reports and tables") {
  const auto its = items(4);
  std::vector<ev::ModelAnswer> out;
  for (const auto& it : its) out.push_back(answer(it.item_id, "Verdadeiro"));
  const auto r = ev::score_assertions(out, its, ev::AbstentionPolicy::CountAsIncorrect);
  const auto back = ev::EvalReport::from_json(r.to_json());
  CHECK(back.policy == ev::AbstentionPolicy::CountAsIncorrect);
  CHECK(back.train.n_correct == r.train.n_correct);
  CHECK(back.all.predicted_true_rate == r.all.predicted_true_rate);

  std::vector<ev::ResultRow> rows(2);
  rows[0].name = "parametric";
  rows[0].assertions = r;
  rows[1].name = "rag-bm25";
  const auto table = ev::format_results_table(rows);
  CHECK(table.find("HB Train") != std::string::npos);
  CHECK(table.find("PCDT Test") != std::string::npos);
  CHECK(table.find("50.0") != std::string::npos);
  CHECK(table.find("rag-bm25") != std::string::npos);
  CHECK(table.find("-") != std::string::npos);
  CHECK(ev::parse_abstention_policy("exclude") == ev::AbstentionPolicy::ExcludeFromDenominator);
  CHECK(ev::parse_abstention_policy("count_as_incorrect") == ev::AbstentionPolicy::CountAsIncorrect);
  CHECK_THROWS_AS((void)ev::parse_abstention_policy("drop"), gk::Error);
}

TEST_CASE("answers jsonl round-trip recomputes verdicts") {
  TempDir tmp;
  std::vector<ev::ModelAnswer> a = {answer("x", "Falso"), answer("y", "hmm")};
  a[0].latency_seconds = 3.5;
  ev::write_answers_jsonl(tmp / "a.jsonl", a);
  const auto text = read_text(tmp / "a.jsonl");
  CHECK(text.find("latency") == std::string::npos);
  const auto back = ev::read_answers_jsonl(tmp / "a.jsonl");
  REQUIRE(back.size() == 2);
  CHECK(back[0].verdict == Verdict::False);
  CHECK(back[1].verdict == Verdict::Abstain);

  std::vector<ev::JudgeVerdict> v(1);
  v[0].item_id = "q";
  v[0].verdict = ev::JudgeOutcome::Correct;
  v[0].judge_raw = "CORRECT";
  ev::write_judgements_jsonl(tmp / "j.jsonl", v);
  CHECK(ev::read_judgements_jsonl(tmp / "j.jsonl")[0].verdict == ev::JudgeOutcome::Correct);
}
