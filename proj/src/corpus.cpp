#include "guidekit/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "guidekit/error.hpp"
#include "guidekit/random.hpp"
#include "guidekit/utf8.hpp"

namespace guidekit::corpus {

namespace fs = std::filesystem;

namespace {

bool iequals(std::string_view a, std::string_view b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) ==
           std::tolower(static_cast<unsigned char>(y));
  });
}

constexpr Category kCategories[] = {
    Category::PCDT, Category::ProtocolOfUse, Category::OncologyGuideline,
    Category::NationalGuideline, Category::CarePathway};

const std::string& require_string(const Json& j, const char* field,
                                  std::string_view where) {
  if (!j.is_object() || !j.contains(field) || !j[field].is_string()) {
    throw Error(ErrorCode::Parse, std::string(where) + ": missing string field '" +
                                      field + "'");
  }
  return j[field].get_ref<const std::string&>();
}

CharSummary summarize(std::vector<std::size_t> values) {
  CharSummary s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  s.min = values.front();
  s.max = values.back();
  const auto n = values.size();
  s.median = n % 2 == 1 ? static_cast<double>(values[n / 2])
                        : (static_cast<double>(values[n / 2 - 1]) +
                           static_cast<double>(values[n / 2])) /
                              2.0;
  return s;
}

Json summary_json(const CharSummary& s) {
  Json j;
  j["min"] = s.min;
  j["median"] = s.median;
  j["max"] = s.max;
  return j;
}

}  // namespace

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::PCDT: return "PCDT";
    case Category::ProtocolOfUse: return "ProtocolOfUse";
    case Category::OncologyGuideline: return "OncologyGuideline";
    case Category::NationalGuideline: return "NationalGuideline";
    case Category::CarePathway: return "CarePathway";
  }
  return "PCDT";
}

std::string_view to_string(Split s) noexcept {
  return s == Split::Train ? "train" : "test";
}

Category parse_category(std::string_view name) {
  for (auto c : kCategories) {
    if (iequals(name, to_string(c))) return c;
  }
  throw Error(ErrorCode::UnknownCategory,
              "unknown category '" + std::string(name) + "'");
}

Split parse_split(std::string_view name) {
  if (iequals(name, "train")) return Split::Train;
  if (iequals(name, "test")) return Split::Test;
  throw Error(ErrorCode::Parse, "unknown split '" + std::string(name) + "'");
}

Split SplitAssignment::at(std::string_view guideline_id) const {
  const auto it = assignment_.find(guideline_id);
  if (it == assignment_.end()) {
    throw Error(ErrorCode::UnknownGuideline,
                "guideline '" + std::string(guideline_id) + "' is not in the split");
  }
  return it->second;
}

bool SplitAssignment::contains(std::string_view guideline_id) const {
  return assignment_.find(guideline_id) != assignment_.end();
}

std::size_t SplitAssignment::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(assignment_.begin(), assignment_.end(),
                    [s](const auto& kv) { return kv.second == s; }));
}

std::vector<std::string> SplitAssignment::ids(Split s) const {
  std::vector<std::string> out;
  for (const auto& [id, split] : assignment_) {
    if (split == s) out.push_back(id);
  }
  return out;
}

Json SplitAssignment::to_json() const {
  Json j;
  j["seed"] = seed_;
  j["n_train"] = count(Split::Train);
  j["n_test"] = count(Split::Test);
  Json m = Json::object();
  for (const auto& [id, split] : assignment_) m[id] = to_string(split);
  j["assignment"] = std::move(m);
  return j;
}

SplitAssignment SplitAssignment::from_json(const Json& j) {
  if (!j.is_object() || !j.contains("assignment") ||
      !j["assignment"].is_object()) {
    throw Error(ErrorCode::Parse, "split file lacks an 'assignment' object");
  }
  SplitMap m;
  for (const auto& [id, value] : j["assignment"].items()) {
    m.emplace(id, parse_split(value.get<std::string>()));
  }
  return {std::move(m), j.value("seed", std::uint64_t{0})};
}

Json CorpusStats::to_json() const {
  Json j;
  j["n_guidelines"] = n_guidelines;
  j["n_truncated"] = n_truncated;
  j["total_chars_raw"] = total_chars_raw;
  j["total_chars_truncated"] = total_chars_truncated;
  j["raw_chars"] = summary_json(raw_chars);
  j["truncated_chars"] = summary_json(truncated_chars);
  j["estimated_tokens"] = estimated_tokens;
  return j;
}

Guideline make_guideline(std::string id, std::string title, Category category,
                         std::string raw_text) {
  if (id.empty()) throw Error(ErrorCode::InvalidArgument, "empty guideline id");
  if (raw_text.empty()) {
    throw Error(ErrorCode::EmptyFile, "guideline '" + id + "' has no text");
  }
  if (!utf8::is_valid(raw_text)) {
    throw Error(ErrorCode::InvalidEncoding,
                "guideline '" + id + "' is not valid UTF-8");
  }
  Guideline g;
  g.char_count = utf8::length(raw_text);
  g.id = std::move(id);
  g.title = std::move(title);
  g.category = category;
  g.raw_text = std::move(raw_text);
  return g;
}

std::vector<Guideline> ingest_corpus(const fs::path& directory,
                                     const fs::path& manifest) {
  const auto rows = read_jsonl(manifest);
  std::vector<Guideline> out;
  out.reserve(rows.size());
  std::set<std::string, std::less<>> seen;
  std::size_t line = 0;
  for (const auto& row : rows) {
    ++line;
    const auto where = manifest.string() + " row " + std::to_string(line);
    const auto& id = require_string(row, "id", where);
    const auto& file = require_string(row, "file", where);
    const auto& category = require_string(row, "category", where);
    const std::string title =
        row.contains("title") && row["title"].is_string() ? row["title"].get<std::string>()
                                                          : id;
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::DuplicateId, "duplicate id '" + id + "'");
    }
    const auto cat = parse_category(category);
    const auto path = directory / file;
    std::error_code ec;
    if (!fs::is_regular_file(path, ec)) {
      throw Error(ErrorCode::MissingFile, "guideline '" + id + "': file " +
                                              path.string() + " not found");
    }
    auto text = read_file(path);
    if (text.empty()) {
      throw Error(ErrorCode::EmptyFile,
                  "guideline '" + id + "': file " + path.string() + " is empty");
    }
    out.push_back(make_guideline(id, title, cat, std::move(text)));
  }
  if (out.empty()) {
    throw Error(ErrorCode::EmptyCorpus, "manifest " + manifest.string() + " lists no guidelines");
  }
  return out;
}

TruncatedGuideline truncate_guideline(const Guideline& g, std::size_t limit) {
  if (limit == 0) throw Error(ErrorCode::InvalidArgument, "truncation limit must be > 0");
  TruncatedGuideline t;
  t.id = g.id;
  t.was_truncated = g.char_count > limit;
  t.text = t.was_truncated ? std::string(utf8::prefix(g.raw_text, limit)) : g.raw_text;
  return t;
}

SplitAssignment assign_splits(std::vector<std::string> ids, std::uint64_t seed) {
  if (ids.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot split an empty corpus");
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw Error(ErrorCode::DuplicateId,
                "duplicate id '" + *std::adjacent_find(ids.begin(), ids.end()) + "'");
  }
  deterministic_shuffle(std::span<std::string>(ids), seed);
  const std::size_t n_train = (ids.size() + 1) / 2;
  SplitMap m;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    m.emplace(std::move(ids[i]), i < n_train ? Split::Train : Split::Test);
  }
  return {std::move(m), seed};
}

SplitAssignment assign_splits(std::span<const Guideline> guidelines,
                              std::uint64_t seed) {
  std::vector<std::string> ids;
  ids.reserve(guidelines.size());
  for (const auto& g : guidelines) ids.push_back(g.id);
  return assign_splits(std::move(ids), seed);
}

CorpusStats corpus_stats(std::span<const Guideline> guidelines,
                         std::span<const TruncatedGuideline> truncated,
                         const TokenEstimator& estimator) {
  if (guidelines.size() != truncated.size()) {
    throw Error(ErrorCode::LengthMismatch,
                "corpus_stats: " + std::to_string(guidelines.size()) +
                    " guidelines but " + std::to_string(truncated.size()) +
                    " truncated entries");
  }
  CorpusStats s;
  s.n_guidelines = guidelines.size();
  std::vector<std::size_t> raw;
  std::vector<std::size_t> cut;
  for (std::size_t i = 0; i < guidelines.size(); ++i) {
    if (guidelines[i].id != truncated[i].id) {
      throw Error(ErrorCode::LengthMismatch,
                  "corpus_stats: entry " + std::to_string(i) + " pairs '" +
                      guidelines[i].id + "' with '" + truncated[i].id + "'");
    }
    const auto n_cut = utf8::length(truncated[i].text);
    raw.push_back(guidelines[i].char_count);
    cut.push_back(n_cut);
    s.total_chars_raw += guidelines[i].char_count;
    s.total_chars_truncated += n_cut;
    s.estimated_tokens += estimator(truncated[i].text);
    if (truncated[i].was_truncated) ++s.n_truncated;
  }
  s.raw_chars = summarize(std::move(raw));
  s.truncated_chars = summarize(std::move(cut));
  return s;
}

Json guideline_record(const Guideline& g, const TruncatedGuideline& t,
                      Split split) {
  Json j;
  j["id"] = g.id;
  j["title"] = g.title;
  j["category"] = to_string(g.category);
  j["split"] = to_string(split);
  j["was_truncated"] = t.was_truncated;
  j["char_count"] = g.char_count;
  j["text"] = t.text;
  return j;
}

std::vector<CorpusRecord> read_guidelines_jsonl(const fs::path& path) {
  std::vector<CorpusRecord> out;
  for (const auto& row : read_jsonl(path)) {
    CorpusRecord r;
    const auto where = path.string();
    r.guideline.id = require_string(row, "id", where);
    r.guideline.text = require_string(row, "text", where);
    r.guideline.was_truncated = row.value("was_truncated", false);
    r.category = parse_category(require_string(row, "category", where));
    r.split = parse_split(require_string(row, "split", where));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace guidekit::corpus
