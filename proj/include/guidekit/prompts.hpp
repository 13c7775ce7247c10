#pragma once

#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>
#include <utility>

namespace guidekit {

/// Every prompt the pipeline sends. Defaults are compiled in from the
/// repository's prompts/ directory; a prompts_dir in the config overrides
/// them file by file (rephrase.txt, wiki.txt, ...).
struct PromptSet {
  std::string rephrase;
  std::string wiki;
  std::string qa;
  std::string healthbench_pairs;
  std::string pcdt_questions;
  std::string eval_tf;
  std::string eval_qa;
  std::string judge;
  std::string rag;
  std::string sft_teacher;
};

[[nodiscard]] PromptSet builtin_prompts();

/// Files missing from `dir` keep their built-in text.
[[nodiscard]] PromptSet load_prompts(const std::filesystem::path& dir);

/// Replaces each `{name}` in one left-to-right pass; substituted text is
/// never rescanned. Unknown placeholders are left as they are.
[[nodiscard]] std::string fill_template(
    std::string_view tmpl,
    std::initializer_list<std::pair<std::string_view, std::string_view>> values);

[[nodiscard]] bool has_placeholder(std::string_view tmpl, std::string_view name);

}  // namespace guidekit
