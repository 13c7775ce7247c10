#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "guidekit/cli.hpp"
#include "guidekit/io.hpp"

namespace gk_test {

namespace fs = std::filesystem;
using guidekit::Json;

class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = fs::temp_directory_path() /
            ("guidekit-test-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  [[nodiscard]] const fs::path& path() const { return path_; }
  [[nodiscard]] fs::path operator/(const fs::path& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary);
  f << text;
}

inline std::string read_text(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

inline const std::vector<std::string>& conditions() {
  static const std::vector<std::string> c = {
      "asma",      "diabete melito tipo 1", "hepatite C", "artrite reumatoide",
      "epilepsia", "anemia falciforme",     "psoríase",   "doença de Crohn"};
  return c;
}

inline std::string guideline_text(std::size_t i) {
  const auto& cond = conditions()[i % conditions().size()];
  std::string t = "Protocolo Clínico e Diretrizes Terapêuticas: " + cond + ".\n";
  for (int p = 0; p < 12; ++p) {
    t += "Seção " + std::to_string(p + 1) + ". Pacientes com " + cond +
         " devem receber o medicamento de referência na dose de " + std::to_string(5 * (p + 1) + i) +
         " mg por via oral a cada " + std::to_string(8 + (p % 3) * 4) +
         " horas, com monitoramento clínico e laboratorial periódico. O critério de inclusão "
         "exige diagnóstico confirmado e ausência de contraindicações.\n";
  }
  return t;
}

/// Writes `n` guidelines plus manifest.jsonl under root/corpus.
inline fs::path make_corpus(const fs::path& root, std::size_t n) {
  static const char* kCategories[] = {"PCDT", "ProtocolOfUse", "OncologyGuideline",
                                      "NationalGuideline", "CarePathway"};
  const auto dir = root / "corpus";
  std::string manifest;
  for (std::size_t i = 0; i < n; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "pcdt-%02zu", i + 1);
    write_text(dir / (std::string(id) + ".txt"), guideline_text(i));
    Json row;
    row["id"] = id;
    row["title"] = "PCDT " + conditions()[i % conditions().size()];
    row["category"] = kCategories[i % 5];
    row["file"] = std::string(id) + ".txt";
    manifest += row.dump() + "\n";
  }
  write_text(dir / "manifest.jsonl", manifest);
  return dir;
}

inline std::string pairs_response(std::size_t n = 5) {
  std::string s = "Segue a lista.\n\n";
  for (std::size_t k = 1; k <= n; ++k) {
    s += "[PAIR " + std::to_string(k) + "]\n";
    s += "TRUE: A dose recomendada do item " + std::to_string(k) + " é " + std::to_string(10 * k) +
         " mg.\n";
    s += "FALSE: A dose recomendada do item " + std::to_string(k) + " é " +
         std::to_string(10 * k + 5) + " mg.\n";
    s += "DETAIL: DOSAGE\n\n";
  }
  return s;
}

inline std::string questions_response(std::size_t n = 5, std::size_t broad = 2) {
  std::string s;
  for (std::size_t k = 1; k <= n; ++k) {
    s += "[QUESTION " + std::to_string(k) + "]\n";
    s += std::string("KIND: ") + (k <= broad ? "BROAD" : "SPECIFIC") + "\n";
    s += "QUESTION: Qual é a conduta " + std::to_string(k) + "?\n";
    s += "ANSWER: A conduta " + std::to_string(k) + " é a descrita no protocolo.\n\n";
  }
  return s;
}

inline Json rule(const std::string& contains, const std::string& content) {
  return {{"match", contains}, {"response", {{"content", content}}}};
}

inline Json mock_backend(std::vector<Json> entries) {
  Json arr = Json::array();
  for (auto& e : entries) arr.push_back(std::move(e));
  return {{"kind", "mock"}, {"entries", arr}};
}

/// A fully offline configuration for the mock corpus under `root`.
inline Json pipeline_config(const fs::path& root, std::size_t samples_per_prompt = 2) {
  Json c;
  c["corpus_dir"] = (root / "corpus").string();
  c["manifest"] = (root / "corpus" / "manifest.jsonl").string();
  c["output_dir"] = (root / "out").string();
  c["seed"] = 20240601;
  c["offline"] = true;
  c["samples_per_prompt"] = samples_per_prompt;
  c["generators"] = Json::array(
      {{{"name", "mock-gen"},
        {"model_id", "mock-gen"},
        {"backend",
         mock_backend({rule("Rewrite the guideline", "Reescrita {{seed}}: o protocolo em outra ordem."),
                       rule("expository article", "Artigo {{seed}} em estilo enciclopédico."),
                       rule("questions and detailed answers",
                            "Pergunta {{seed}}? Resposta passo a passo conforme o protocolo.")})}}});
  c["benchmark_generator"] = {
      {"model_id", "mock-bench"},
      {"backend", mock_backend({rule("pairs of clinical assertions", pairs_response()),
                                rule("open-ended clinical questions", questions_response())})}};
  c["candidate"] = {
      {"model_id", "mock-candidate"},
      {"backend", mock_backend({rule("Afirmação:", "Analisando o protocolo, concluo: Verdadeiro."),
                                rule("Pergunta:", "A conduta é a descrita no protocolo.")})}};
  c["judge"] = {{"model_id", "mock-judge"},
                {"backend", mock_backend({rule("Candidate answer", "Matches the reference.\nCORRECT")})}};
  c["teacher"] = {{"model_id", "mock-teacher"},
                  {"backend", mock_backend({rule("PROTOCOLO:", "Pelo protocolo a dose confere. Verdadeiro.")})}};
  c["policy"] = {{"model_id", "mock-policy"},
                 {"backend", mock_backend({rule("Afirmação:", "Verdadeiro.")})}};
  c["embedding"] = {{"model_id", "mock-embed"}, {"backend", mock_backend({})}};
  return c;
}

inline fs::path write_config(const fs::path& root, const Json& cfg) {
  const auto p = root / "guidekit.json";
  write_text(p, cfg.dump(2));
  return p;
}

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

inline CliResult run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = guidekit::cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace gk_test
