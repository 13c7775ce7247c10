#include "guidekit/prompts.hpp"

#include "builtin_prompts.hpp"
#include "guidekit/io.hpp"

namespace guidekit {

PromptSet builtin_prompts() {
  PromptSet p;
  p.rephrase = std::string(builtin::kRephrase);
  p.wiki = std::string(builtin::kWiki);
  p.qa = std::string(builtin::kQa);
  p.healthbench_pairs = std::string(builtin::kHealthbenchPairs);
  p.pcdt_questions = std::string(builtin::kPcdtQuestions);
  p.eval_tf = std::string(builtin::kEvalTf);
  p.eval_qa = std::string(builtin::kEvalQa);
  p.judge = std::string(builtin::kJudge);
  p.rag = std::string(builtin::kRag);
  p.sft_teacher = std::string(builtin::kSftTeacher);
  return p;
}

PromptSet load_prompts(const std::filesystem::path& dir) {
  auto p = builtin_prompts();
  auto maybe = [&](std::string& slot, const char* file) {
    const auto path = dir / file;
    std::error_code ec;
    if (std::filesystem::is_regular_file(path, ec)) slot = read_file(path);
  };
  maybe(p.rephrase, "rephrase.txt");
  maybe(p.wiki, "wiki.txt");
  maybe(p.qa, "qa.txt");
  maybe(p.healthbench_pairs, "healthbench_pairs.txt");
  maybe(p.pcdt_questions, "pcdt_questions.txt");
  maybe(p.eval_tf, "eval_tf.txt");
  maybe(p.eval_qa, "eval_qa.txt");
  maybe(p.judge, "judge.txt");
  maybe(p.rag, "rag.txt");
  maybe(p.sft_teacher, "sft_teacher.txt");
  return p;
}

std::string fill_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = tmpl.substr(i + 1, close - i - 1);
        bool replaced = false;
        for (const auto& [key, value] : values) {
          if (key == name) {
            out.append(value);
            replaced = true;
            break;
          }
        }
        if (replaced) {
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

bool has_placeholder(std::string_view tmpl, std::string_view name) {
  std::string needle = "{";
  needle.append(name);
  needle.push_back('}');
  return tmpl.find(needle) != std::string_view::npos;
}

}  // namespace guidekit
