#include "guidekit/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "guidekit/error.hpp"
#include "guidekit/prompts.hpp"
#include "guidekit/utf8.hpp"

namespace guidekit::retrieval {

namespace fs = std::filesystem;

Json Chunk::to_json() const {
  Json j;
  j["chunk_id"] = chunk_id;
  j["guideline_id"] = guideline_id;
  j["start_offset"] = start_offset;
  j["text"] = text;
  return j;
}

Chunk Chunk::from_json(const Json& j) {
  try {
    Chunk c;
    c.chunk_id = j.at("chunk_id").get<ChunkId>();
    c.guideline_id = j.at("guideline_id").get<std::string>();
    c.start_offset = j.at("start_offset").get<std::size_t>();
    c.text = j.at("text").get<std::string>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("bad chunk record: ") + e.what());
  }
}

void ChunkingParams::validate() const {
  if (size == 0 || overlap >= size) {
    throw Error(ErrorCode::InvalidArgument,
                "chunking needs 0 <= overlap < size (got size " + std::to_string(size) +
                    ", overlap " + std::to_string(overlap) + ")");
  }
}

std::vector<Chunk> chunk_text(std::string_view guideline_id, std::string_view text,
                              const ChunkingParams& params, ChunkId first_id) {
  params.validate();
  std::vector<Chunk> out;
  const auto cps = utf8::decode(text);
  const std::size_t n = cps.size();
  const std::size_t stride = params.stride();
  for (std::size_t start = 0; start < n; start += stride) {
    const std::size_t end = std::min(start + params.size, n);
    Chunk c;
    c.chunk_id = first_id + static_cast<ChunkId>(out.size());
    c.guideline_id = std::string(guideline_id);
    c.start_offset = start;
    c.text = utf8::encode(std::u32string_view(cps).substr(start, end - start));
    out.push_back(std::move(c));
    if (end == n) break;
  }
  return out;
}

std::vector<Chunk> chunk_corpus(std::span<const corpus::TruncatedGuideline> guidelines,
                                const ChunkingParams& params) {
  params.validate();
  std::vector<Chunk> out;
  for (const auto& g : guidelines) {
    auto chunks = chunk_text(g.id, g.text, params, static_cast<ChunkId>(out.size()));
    std::move(chunks.begin(), chunks.end(), std::back_inserter(out));
  }
  return out;
}

std::string reconstruct(std::span<const Chunk> chunks, std::size_t overlap) {
  std::string out;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i == 0) {
      out += chunks[i].text;
    } else {
      const auto skip = utf8::prefix(chunks[i].text, overlap).size();
      out.append(chunks[i].text, skip);
    }
  }
  return out;
}

std::vector<std::string> tokenize_terms(std::string_view text) {
  std::vector<std::string> terms;
  const auto cps = utf8::decode(text);
  std::string current;
  for (char32_t cp : cps) {
    if (utf8::is_alnum(cp)) {
      utf8::append(current, utf8::to_lower(cp));
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

Json RetrievalResult::to_json() const {
  Json arr = Json::array();
  for (const auto& h : hits) arr.push_back({{"chunk_id", h.chunk_id}, {"score", h.score}});
  return arr;
}

namespace {

bool ranks_before(const ScoredChunk& a, const ScoredChunk& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.chunk_id < b.chunk_id;
}

RetrievalResult top_k(std::vector<ScoredChunk> scored, std::size_t k) {
  k = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), ranks_before);
  scored.resize(k);
  return {std::move(scored)};
}

// Little-endian binary helpers.
class Writer {
 public:
  explicit Writer(const fs::path& path) : path_(path) {}
  void bytes(const void* p, std::size_t n) {
    buf_.append(static_cast<const char*>(p), n);
  }
  void u32(std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void u64(std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void finish() { write_file(path_, buf_); }

 private:
  fs::path path_;
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(const fs::path& path) : data_(read_file(path)), name_(path.string()) {}
  void bytes(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, data_.data() + pos_, n);
    pos_ += n;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }
  double f64() {
    const auto bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void expect_end() const {
    if (pos_ != data_.size()) throw Error(ErrorCode::Parse, name_ + ": trailing bytes");
  }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > data_.size()) throw Error(ErrorCode::Parse, name_ + ": truncated index file");
  }
  std::string data_;
  std::string name_;
  std::size_t pos_ = 0;
};

constexpr char kBm25Magic[8] = {'G', 'K', 'B', 'M', '2', '5', '\0', '\0'};
constexpr char kDenseMagic[8] = {'G', 'K', 'D', 'E', 'N', 'S', 'E', '\0'};
constexpr std::uint32_t kIndexVersion = 1;

void check_magic(Reader& r, const char (&magic)[8], const fs::path& path) {
  char got[8];
  r.bytes(got, 8);
  if (std::memcmp(got, magic, 8) != 0) {
    throw Error(ErrorCode::Parse, path.string() + ": not a recognised index file");
  }
  if (const auto v = r.u32(); v != kIndexVersion) {
    throw Error(ErrorCode::Parse, path.string() + ": unsupported index version " +
                                      std::to_string(v));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// BM25

Bm25Index Bm25Index::build(std::span<const Chunk> chunks, Bm25Params params) {
  if (chunks.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty chunk list");
  Bm25Index idx;
  idx.params_ = params;
  idx.chunk_ids_.reserve(chunks.size());
  idx.doc_lengths_.reserve(chunks.size());
  std::uint64_t total = 0;
  for (std::size_t d = 0; d < chunks.size(); ++d) {
    const auto terms = tokenize_terms(chunks[d].text);
    std::map<std::string_view, std::uint32_t> tf;
    for (const auto& t : terms) ++tf[t];
    for (const auto& [term, count] : tf) {
      idx.postings_[std::string(term)].push_back({static_cast<std::uint32_t>(d), count});
    }
    idx.chunk_ids_.push_back(chunks[d].chunk_id);
    idx.doc_lengths_.push_back(static_cast<std::uint32_t>(terms.size()));
    total += terms.size();
  }
  idx.avg_doc_length_ = static_cast<double>(total) / static_cast<double>(chunks.size());
  return idx;
}

std::size_t Bm25Index::document_frequency(std::string_view term) const {
  const auto it = postings_.find(std::string(term));
  return it == postings_.end() ? 0 : it->second.size();
}

double Bm25Index::idf(std::string_view term) const {
  const auto df = static_cast<double>(document_frequency(term));
  if (df == 0) return 0.0;
  const auto n = static_cast<double>(n_docs());
  return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

RetrievalResult Bm25Index::query(std::string_view text, std::size_t k) const {
  auto terms = tokenize_terms(text);
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());

  std::map<std::uint32_t, double> acc;
  const double k1 = params_.k1;
  const double b = params_.b;
  for (const auto& term : terms) {
    const auto it = postings_.find(term);
    if (it == postings_.end()) continue;
    const double w = idf(term);
    for (const auto& p : it->second) {
      const double tf = p.tf;
      const double len = doc_lengths_[p.doc];
      const double norm = avg_doc_length_ > 0 ? len / avg_doc_length_ : 0.0;
      acc[p.doc] += w * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm));
    }
  }
  std::vector<ScoredChunk> scored;
  scored.reserve(acc.size());
  for (const auto& [doc, score] : acc) scored.push_back({chunk_ids_[doc], score});
  return top_k(std::move(scored), k);
}

Json Bm25Index::meta_json() const {
  Json j;
  j["format"] = "guidekit-bm25";
  j["version"] = kIndexVersion;
  j["k1"] = params_.k1;
  j["b"] = params_.b;
  j["idf"] = "ln(1 + (N - df + 0.5) / (df + 0.5))";
  j["tokenizer"] = "lowercase-alphanumeric-runs";
  j["n_docs"] = n_docs();
  j["n_terms"] = postings_.size();
  j["avg_doc_length"] = avg_doc_length_;
  return j;
}

void Bm25Index::save(const fs::path& idx_path) const {
  Writer w(idx_path);
  w.bytes(kBm25Magic, 8);
  w.u32(kIndexVersion);
  w.f64(params_.k1);
  w.f64(params_.b);
  w.u64(n_docs());
  w.f64(avg_doc_length_);
  for (std::size_t d = 0; d < n_docs(); ++d) {
    w.u32(chunk_ids_[d]);
    w.u32(doc_lengths_[d]);
  }
  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& kv : postings_) terms.push_back(&kv.first);
  std::sort(terms.begin(), terms.end(), [](auto* a, auto* b) { return *a < *b; });
  w.u64(terms.size());
  for (const auto* t : terms) {
    w.u32(static_cast<std::uint32_t>(t->size()));
    w.bytes(t->data(), t->size());
    const auto& plist = postings_.at(*t);
    w.u32(static_cast<std::uint32_t>(plist.size()));
    for (const auto& p : plist) {
      w.u32(p.doc);
      w.u32(p.tf);
    }
  }
  w.finish();
}

Bm25Index Bm25Index::load(const fs::path& idx_path) {
  Reader r(idx_path);
  check_magic(r, kBm25Magic, idx_path);
  Bm25Index idx;
  idx.params_.k1 = r.f64();
  idx.params_.b = r.f64();
  const auto n = r.u64();
  idx.avg_doc_length_ = r.f64();
  for (std::uint64_t d = 0; d < n; ++d) {
    idx.chunk_ids_.push_back(r.u32());
    idx.doc_lengths_.push_back(r.u32());
  }
  const auto n_terms = r.u64();
  for (std::uint64_t t = 0; t < n_terms; ++t) {
    auto term = r.str(r.u32());
    const auto n_post = r.u32();
    std::vector<Posting> plist;
    plist.reserve(n_post);
    for (std::uint32_t i = 0; i < n_post; ++i) {
      Posting p;
      p.doc = r.u32();
      p.tf = r.u32();
      if (p.doc >= n) throw Error(ErrorCode::Parse, idx_path.string() + ": posting out of range");
      plist.push_back(p);
    }
    idx.postings_.emplace(std::move(term), std::move(plist));
  }
  r.expect_end();
  return idx;
}

Bm25Index build_bm25(std::span<const Chunk> chunks, double k1, double b) {
  return Bm25Index::build(chunks, {k1, b});
}

RetrievalResult query_bm25(const Bm25Index& index, std::string_view query, std::size_t k) {
  return index.query(query, k);
}

// ---------------------------------------------------------------------------
// Dense

DenseIndex::DenseIndex(std::vector<ChunkId> chunk_ids, std::vector<llm::Embedding> vectors)
    : chunk_ids_(std::move(chunk_ids)) {
  if (chunk_ids_.size() != vectors.size()) {
    throw Error(ErrorCode::LengthMismatch, "dense index: ids and vectors differ in count");
  }
  dimension_ = vectors.empty() ? 0 : vectors.front().size();
  data_.reserve(vectors.size() * dimension_);
  for (const auto& v : vectors) {
    if (v.size() != dimension_) {
      throw Error(ErrorCode::DimensionMismatch, "dense index rows differ in dimension");
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    if (std::abs(std::sqrt(norm) - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvariantViolation, "dense index rows must be unit vectors");
    }
    data_.insert(data_.end(), v.begin(), v.end());
  }
}

RetrievalResult DenseIndex::query_vector(std::span<const double> unit_query,
                                         std::size_t k) const {
  if (unit_query.size() != dimension_) {
    throw Error(ErrorCode::DimensionMismatch,
                "query has dimension " + std::to_string(unit_query.size()) + ", index has " +
                    std::to_string(dimension_));
  }
  std::vector<ScoredChunk> scored;
  scored.reserve(size());
  for (std::size_t i = 0; i < size(); ++i) {
    const auto r = row(i);
    double dot = 0.0;
    for (std::size_t d = 0; d < dimension_; ++d) dot += r[d] * unit_query[d];
    scored.push_back({chunk_ids_[i], dot});
  }
  return top_k(std::move(scored), k);
}

void DenseIndex::save(const fs::path& idx_path) const {
  Writer w(idx_path);
  w.bytes(kDenseMagic, 8);
  w.u32(kIndexVersion);
  w.u64(size());
  w.u32(static_cast<std::uint32_t>(dimension_));
  for (auto id : chunk_ids_) w.u32(id);
  for (double x : data_) w.f64(x);
  w.finish();
}

DenseIndex DenseIndex::load(const fs::path& idx_path) {
  Reader r(idx_path);
  check_magic(r, kDenseMagic, idx_path);
  DenseIndex idx;
  const auto n = r.u64();
  idx.dimension_ = r.u32();
  for (std::uint64_t i = 0; i < n; ++i) idx.chunk_ids_.push_back(r.u32());
  idx.data_.resize(n * idx.dimension_);
  for (double& x : idx.data_) x = r.f64();
  r.expect_end();
  return idx;
}

DenseIndex build_dense(std::span<const Chunk> chunks, const llm::Backend& backend,
                       std::string_view model_id) {
  if (chunks.empty()) throw Error(ErrorCode::EmptyCorpus, "cannot index an empty chunk list");
  std::vector<std::string> texts;
  std::vector<ChunkId> ids;
  texts.reserve(chunks.size());
  for (const auto& c : chunks) {
    texts.push_back(c.text);
    ids.push_back(c.chunk_id);
  }
  return DenseIndex(std::move(ids), llm::embed(texts, backend, model_id));
}

RetrievalResult query_dense(const DenseIndex& index, std::string_view query_text,
                            const llm::Backend& backend, std::string_view model_id,
                            std::size_t k) {
  if (query_text.empty()) return {};
  const std::string q(query_text);
  const auto v = llm::embed(std::span<const std::string>(&q, 1), backend, model_id);
  return index.query_vector(v.front(), k);
}

// ---------------------------------------------------------------------------
// RAG

ChunkTable::ChunkTable(std::vector<Chunk> chunks) : chunks_(std::move(chunks)) {
  for (std::size_t i = 0; i < chunks_.size(); ++i) {
    if (!by_id_.emplace(chunks_[i].chunk_id, i).second) {
      throw Error(ErrorCode::DuplicateId,
                  "duplicate chunk id " + std::to_string(chunks_[i].chunk_id));
    }
  }
}

const Chunk& ChunkTable::at(ChunkId id) const {
  const auto it = by_id_.find(id);
  if (it == by_id_.end()) {
    throw Error(ErrorCode::UnknownChunk, "unknown chunk id " + std::to_string(id));
  }
  return chunks_[it->second];
}

llm::ChatRequest assemble_rag_prompt(std::string_view question, const RetrievalResult& results,
                                     const ChunkTable& chunks, std::string_view rag_template) {
  std::string context;
  for (std::size_t rank = 0; rank < results.hits.size(); ++rank) {
    const auto& c = chunks.at(results.hits[rank].chunk_id);
    if (rank > 0) context += "\n\n";
    context += "[" + std::to_string(rank + 1) + "] (" + c.guideline_id + ")\n" + c.text;
  }
  if (context.empty()) context = std::string(kEmptyContextMarker);
  llm::ChatRequest req;
  req.messages.push_back(
      {llm::Role::User,
       fill_template(rag_template, {{"context", context}, {"question", question}})});
  return req;
}

std::vector<Chunk> read_chunks_jsonl(const fs::path& path) {
  std::vector<Chunk> out;
  for (const auto& row : read_jsonl(path)) out.push_back(Chunk::from_json(row));
  return out;
}

void write_chunks_jsonl(const fs::path& path, std::span<const Chunk> chunks) {
  std::vector<Json> rows;
  rows.reserve(chunks.size());
  for (const auto& c : chunks) rows.push_back(c.to_json());
  write_jsonl(path, rows);
}

}  // namespace guidekit::retrieval
