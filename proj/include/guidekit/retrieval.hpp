#pragma once

// Character-window chunking, an Okapi BM25 inverted index, a dense cosine
// index and RAG prompt assembly over the truncated guideline corpus.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "guidekit/corpus.hpp"
#include "guidekit/io.hpp"
#include "guidekit/llm_gateway.hpp"

namespace guidekit::retrieval {

using ChunkId = std::uint32_t;

struct Chunk {
  ChunkId chunk_id = 0;
  std::string guideline_id;
  std::size_t start_offset = 0;  // characters into the truncated text
  std::string text;

  [[nodiscard]] Json to_json() const;
  [[nodiscard]] static Chunk from_json(const Json& j);
};

struct ChunkingParams {
  std::size_t size = 2000;   // characters per window
  std::size_t overlap = 200; // characters shared by consecutive windows

  [[nodiscard]] std::size_t stride() const noexcept { return size - overlap; }
  void validate() const;  // 0 <= overlap < size
};

/// Windows start at 0, stride, 2*stride, ...; the last window is the first one
/// that reaches the end of the text. Empty text yields no chunks.
[[nodiscard]] std::vector<Chunk> chunk_text(std::string_view guideline_id,
                                            std::string_view text,
                                            const ChunkingParams& params,
                                            ChunkId first_id = 0);

/// Chunk ids are assigned sequentially across guidelines in input order.
[[nodiscard]] std::vector<Chunk> chunk_corpus(
    std::span<const corpus::TruncatedGuideline> guidelines,
    const ChunkingParams& params = {});

/// Inverse of chunk_text for one guideline's chunks in order.
[[nodiscard]] std::string reconstruct(std::span<const Chunk> chunks,
                                      std::size_t overlap);

/// Lowercased maximal alphanumeric runs. Diacritics are kept and digits are
/// terms of their own right: "Dose de 5 mg/kg" -> dose, de, 5, mg, kg.
[[nodiscard]] std::vector<std::string> tokenize_terms(std::string_view text);

struct ScoredChunk {
  ChunkId chunk_id = 0;
  double score = 0.0;

  friend bool operator==(const ScoredChunk&, const ScoredChunk&) = default;
};

/// Scores are non-increasing; equal scores are ordered by ascending chunk_id.
struct RetrievalResult {
  std::vector<ScoredChunk> hits;

  [[nodiscard]] Json to_json() const;
};

struct Bm25Params {
  double k1 = 1.2;
  double b = 0.75;

  friend bool operator==(const Bm25Params&, const Bm25Params&) = default;
};

class Bm25Index {
 public:
  struct Posting {
    std::uint32_t doc = 0;  // position in chunk_ids()
    std::uint32_t tf = 0;

    friend bool operator==(const Posting&, const Posting&) = default;
  };

  /// Throws Error(EmptyCorpus) for no chunks.
  [[nodiscard]] static Bm25Index build(std::span<const Chunk> chunks,
                                       Bm25Params params = {});

  /// idf(t) = ln(1 + (N - df + 0.5) / (df + 0.5)); 0 for unseen terms.
  [[nodiscard]] double idf(std::string_view term) const;
  [[nodiscard]] std::size_t document_frequency(std::string_view term) const;

  /// score(d) = sum over distinct query terms t of
  ///   idf(t) * tf * (k1 + 1) / (tf + k1 * (1 - b + b * len / avgdl)).
  /// Chunks matching no query term are not returned.
  [[nodiscard]] RetrievalResult query(std::string_view text, std::size_t k = 10) const;

  [[nodiscard]] std::size_t n_docs() const noexcept { return chunk_ids_.size(); }
  [[nodiscard]] double avg_doc_length() const noexcept { return avg_doc_length_; }
  [[nodiscard]] const Bm25Params& params() const noexcept { return params_; }
  [[nodiscard]] std::span<const ChunkId> chunk_ids() const noexcept { return chunk_ids_; }
  [[nodiscard]] std::span<const std::uint32_t> doc_lengths() const noexcept {
    return doc_lengths_;
  }
  [[nodiscard]] const std::unordered_map<std::string, std::vector<Posting>>& postings()
      const noexcept {
    return postings_;
  }

  /// Binary layout (little-endian):
  ///   "GKBM25\0\0" | u32 version=1 | f64 k1 | f64 b | u64 n_docs | f64 avgdl
  ///   n_docs x (u32 chunk_id, u32 doc_length)
  ///   u64 n_terms, terms in byte order: u32 len | bytes | u32 n_postings |
  ///   n_postings x (u32 doc, u32 tf)
  void save(const std::filesystem::path& idx_path) const;
  [[nodiscard]] Json meta_json() const;
  [[nodiscard]] static Bm25Index load(const std::filesystem::path& idx_path);

  friend bool operator==(const Bm25Index&, const Bm25Index&) = default;

 private:
  Bm25Params params_;
  std::vector<ChunkId> chunk_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  std::unordered_map<std::string, std::vector<Posting>> postings_;
};

[[nodiscard]] Bm25Index build_bm25(std::span<const Chunk> chunks, double k1 = 1.2,
                                   double b = 0.75);
[[nodiscard]] RetrievalResult query_bm25(const Bm25Index& index, std::string_view query,
                                         std::size_t k = 10);

class DenseIndex {
 public:
  /// Rows must be unit vectors of one dimension (DimensionMismatch otherwise).
  DenseIndex(std::vector<ChunkId> chunk_ids, std::vector<llm::Embedding> vectors);
  DenseIndex() = default;

  [[nodiscard]] std::size_t dimension() const noexcept { return dimension_; }
  [[nodiscard]] std::size_t size() const noexcept { return chunk_ids_.size(); }
  [[nodiscard]] std::span<const ChunkId> chunk_ids() const noexcept { return chunk_ids_; }
  [[nodiscard]] std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * dimension_, dimension_};
  }

  /// Cosine (dot product of unit vectors) against every row, top-k.
  [[nodiscard]] RetrievalResult query_vector(std::span<const double> unit_query,
                                             std::size_t k = 10) const;

  /// "GKDENSE\0" | u32 version=1 | u64 n | u32 dim | n x u32 chunk_id |
  /// n*dim f64 row-major
  void save(const std::filesystem::path& idx_path) const;
  [[nodiscard]] static DenseIndex load(const std::filesystem::path& idx_path);

  friend bool operator==(const DenseIndex&, const DenseIndex&) = default;

 private:
  std::vector<ChunkId> chunk_ids_;
  std::size_t dimension_ = 0;
  std::vector<double> data_;
};

[[nodiscard]] DenseIndex build_dense(std::span<const Chunk> chunks, const llm::Backend& backend,
                                     std::string_view model_id = "");
[[nodiscard]] RetrievalResult query_dense(const DenseIndex& index, std::string_view query_text,
                                          const llm::Backend& backend,
                                          std::string_view model_id = "", std::size_t k = 10);

/// Id-addressable view over a chunk list.
class ChunkTable {
 public:
  explicit ChunkTable(std::vector<Chunk> chunks);
  /// Throws Error(UnknownChunk).
  [[nodiscard]] const Chunk& at(ChunkId id) const;
  [[nodiscard]] const std::vector<Chunk>& chunks() const noexcept { return chunks_; }

 private:
  std::vector<Chunk> chunks_;
  std::unordered_map<ChunkId, std::size_t> by_id_;
};

inline constexpr std::string_view kEmptyContextMarker = "[no excerpts retrieved]";

/// Fills `{context}` and `{question}` in the RAG template. The context lists
/// the hits in rank order as "[rank] (guideline_id)\n<chunk text>".
[[nodiscard]] llm::ChatRequest assemble_rag_prompt(std::string_view question,
                                                   const RetrievalResult& results,
                                                   const ChunkTable& chunks,
                                                   std::string_view rag_template);

[[nodiscard]] std::vector<Chunk> read_chunks_jsonl(const std::filesystem::path& path);
void write_chunks_jsonl(const std::filesystem::path& path, std::span<const Chunk> chunks);

}  // namespace guidekit::retrieval
