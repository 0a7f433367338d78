#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rrag/corpus.hpp"
#include "rrag/text.hpp"

namespace rrag::retrieval {

struct Bm25Params {
  double k1 = 0.9;
  double b = 0.4;
  /// Index "title body" rather than the body alone.
  bool index_title = true;
  text::TokenizerOptions tokenizer;
};

struct Posting {
  std::uint32_t doc = 0;  // position in doc_ids()
  std::uint32_t tf = 0;

  bool operator==(const Posting&) const = default;
};

/// Okapi BM25 inverted index. Immutable once built; concurrent searches are
/// safe.
class InvertedIndex {
 public:
  /// Throws ArgumentError for an empty corpus.
  static InvertedIndex build(const corpus::CorpusStore& corpus, const Bm25Params& params = {});

  const std::unordered_map<std::string, std::vector<Posting>>& postings() const noexcept {
    return postings_;
  }
  const std::vector<Posting>* postings_for(std::string_view term) const;

  const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
  const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_lengths_; }
  double avg_doc_length() const noexcept { return avg_doc_length_; }
  std::size_t doc_count() const noexcept { return doc_ids_.size(); }
  const Bm25Params& params() const noexcept { return params_; }

  /// Number of documents containing the term.
  std::size_t document_frequency(std::string_view term) const;
  /// ln(1 + (N - df + 0.5) / (df + 0.5))
  double idf(std::size_t df) const;

  void save(const std::filesystem::path& path) const;
  static InvertedIndex load(const std::filesystem::path& path);

 private:
  std::unordered_map<std::string, std::vector<Posting>> postings_;
  std::vector<std::string> doc_ids_;
  std::vector<std::uint32_t> doc_lengths_;
  double avg_doc_length_ = 0.0;
  Bm25Params params_;
};

struct RetrievedEntry {
  std::string doc_id;
  double score = 0.0;
  int rank = 0;  // 1-based

  bool operator==(const RetrievedEntry&) const = default;
};

/// Ranked top-k result for one query.
struct RetrievedSet {
  std::string query_id;
  std::vector<RetrievedEntry> entries;
  int k = 0;

  bool operator==(const RetrievedSet&) const = default;

  /// Top-k prefix with k updated. Throws ArgumentError when k exceeds the
  /// retrieval depth.
  RetrievedSet truncated(int top_k) const;
  /// Throws ValidationError when ranks, ordering or uniqueness are violated.
  void validate() const;
};

using RetrievalMap = std::map<std::string, RetrievedSet, std::less<>>;

/// Top-k documents by BM25 score, ties broken by ascending doc_id. A query
/// with no indexed terms yields an empty set. Throws ArgumentError for k < 1.
RetrievedSet search(const InvertedIndex& index, std::string_view query_id,
                    std::string_view query, int k);

struct Query {
  std::string query_id;
  std::string text;
};

/// Runs search for every query; output[i] answers queries[i] for any thread
/// count.
std::vector<RetrievedSet> search_batch(const InvertedIndex& index, std::span<const Query> queries,
                                       int k, int threads = 1);

/// Reads retrieval-results JSONL, validating doc ids against the corpus.
/// Entries are re-sorted by descending score, ties by doc_id, and re-ranked.
RetrievalMap import_retrieval(const std::filesystem::path& path,
                              const corpus::CorpusStore& corpus);

void export_retrieval(const std::vector<RetrievedSet>& sets, const std::filesystem::path& path);
void export_retrieval(const RetrievalMap& sets, const std::filesystem::path& path);

/// Documents of the top-k entries, in rank order.
std::vector<corpus::Document> top_documents(const corpus::CorpusStore& corpus,
                                            const RetrievedSet& retrieved, int k);

/// True iff a gold alias occurs in the body of one of the top-k documents.
bool recall_at_k(const corpus::CorpusStore& corpus, const RetrievedSet& retrieved,
                 const corpus::QASample& sample, int k);

/// Fraction of the top-k slots whose document body contains a gold alias.
/// Missing slots (fewer than k entries) count as irrelevant.
double precision_at_k(const corpus::CorpusStore& corpus, const RetrievedSet& retrieved,
                      const corpus::QASample& sample, int k);

}  // namespace rrag::retrieval
