#include "rrag/retrieval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <thread>

#include "rrag/error.hpp"
#include "rrag/jsonl.hpp"
#include "rrag/matching.hpp"

namespace rrag::retrieval {
namespace {

constexpr char kIndexMagic[8] = {'R', 'R', 'A', 'G', 'I', 'D', 'X', '1'};

std::string indexed_text(const corpus::Document& doc, const Bm25Params& params) {
  return params.index_title ? doc.title + " " + doc.body : doc.body;
}

bool ranks_before(const RetrievedEntry& a, const RetrievedEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.doc_id < b.doc_id;
}

void assign_ranks(std::vector<RetrievedEntry>& entries) {
  for (std::size_t i = 0; i < entries.size(); ++i) entries[i].rank = static_cast<int>(i) + 1;
}

class BinaryWriter {
 public:
  explicit BinaryWriter(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(const T& value) {
    out_.write(reinterpret_cast<const char*>(&value), sizeof(T));
  }
  void str(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }

 private:
  std::ofstream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::ifstream& in, std::filesystem::path path) : in_(in), path_(std::move(path)) {}
  template <typename T>
  T pod() {
    T value{};
    in_.read(reinterpret_cast<char*>(&value), sizeof(T));
    check();
    return value;
  }
  std::string str() {
    const auto size = pod<std::uint64_t>();
    if (size > (1ULL << 32)) throw ValidationError("corrupt index file " + path_.string());
    std::string s(size, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(size));
    check();
    return s;
  }

 private:
  void check() {
    if (!in_) throw ValidationError("truncated index file " + path_.string());
  }
  std::ifstream& in_;
  std::filesystem::path path_;
};

}  // namespace

InvertedIndex InvertedIndex::build(const corpus::CorpusStore& corpus, const Bm25Params& params) {
  if (corpus.empty()) throw ArgumentError("cannot build an index over an empty corpus");
  InvertedIndex index;
  index.params_ = params;
  const auto& docs = corpus.documents();
  index.doc_ids_.reserve(docs.size());
  index.doc_lengths_.reserve(docs.size());
  double total_length = 0.0;
  for (std::uint32_t i = 0; i < docs.size(); ++i) {
    const auto tokens = text::tokenize(indexed_text(docs[i], params), params.tokenizer);
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& token : tokens) ++tf[token];
    // Postings are appended in document order, so each list stays sorted.
    for (auto& [term, count] : tf) index.postings_[term].push_back(Posting{i, count});
    index.doc_ids_.push_back(docs[i].doc_id);
    index.doc_lengths_.push_back(static_cast<std::uint32_t>(tokens.size()));
    total_length += static_cast<double>(tokens.size());
  }
  index.avg_doc_length_ = total_length / static_cast<double>(docs.size());
  return index;
}

const std::vector<Posting>* InvertedIndex::postings_for(std::string_view term) const {
  auto it = postings_.find(std::string(term));
  return it == postings_.end() ? nullptr : &it->second;
}

std::size_t InvertedIndex::document_frequency(std::string_view term) const {
  const auto* list = postings_for(term);
  return list == nullptr ? 0 : list->size();
}

double InvertedIndex::idf(std::size_t df) const {
  const double n = static_cast<double>(doc_count());
  const double d = static_cast<double>(df);
  return std::log(1.0 + (n - d + 0.5) / (d + 0.5));
}

void InvertedIndex::save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  BinaryWriter w(out);
  out.write(kIndexMagic, sizeof(kIndexMagic));
  w.pod(params_.k1);
  w.pod(params_.b);
  w.pod<std::uint8_t>(params_.index_title);
  w.pod<std::uint8_t>(params_.tokenizer.stem);
  w.pod<std::uint8_t>(params_.tokenizer.remove_stopwords);
  w.pod<std::uint64_t>(doc_ids_.size());
  for (std::size_t i = 0; i < doc_ids_.size(); ++i) {
    w.str(doc_ids_[i]);
    w.pod(doc_lengths_[i]);
  }
  std::vector<const std::string*> terms;
  terms.reserve(postings_.size());
  for (const auto& [term, list] : postings_) terms.push_back(&term);
  std::sort(terms.begin(), terms.end(), [](const auto* a, const auto* b) { return *a < *b; });
  w.pod<std::uint64_t>(terms.size());
  for (const auto* term : terms) {
    const auto& list = postings_.at(*term);
    w.str(*term);
    w.pod<std::uint64_t>(list.size());
    for (const auto& p : list) {
      w.pod(p.doc);
      w.pod(p.tf);
    }
  }
  if (!out) throw ValidationError("write failed: " + path.string());
}

InvertedIndex InvertedIndex::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open index " + path.string());
  char magic[sizeof(kIndexMagic)] = {};
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kIndexMagic, sizeof(magic)) != 0) {
    throw ValidationError(path.string() + " is not an index file");
  }
  BinaryReader r(in, path);
  InvertedIndex index;
  index.params_.k1 = r.pod<double>();
  index.params_.b = r.pod<double>();
  index.params_.index_title = r.pod<std::uint8_t>() != 0;
  index.params_.tokenizer.stem = r.pod<std::uint8_t>() != 0;
  index.params_.tokenizer.remove_stopwords = r.pod<std::uint8_t>() != 0;
  const auto docs = r.pod<std::uint64_t>();
  double total = 0.0;
  for (std::uint64_t i = 0; i < docs; ++i) {
    index.doc_ids_.push_back(r.str());
    index.doc_lengths_.push_back(r.pod<std::uint32_t>());
    total += index.doc_lengths_.back();
  }
  if (docs == 0) throw ValidationError("index " + path.string() + " has no documents");
  index.avg_doc_length_ = total / static_cast<double>(docs);
  const auto terms = r.pod<std::uint64_t>();
  for (std::uint64_t t = 0; t < terms; ++t) {
    std::string term = r.str();
    const auto count = r.pod<std::uint64_t>();
    std::vector<Posting> list;
    list.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      Posting p;
      p.doc = r.pod<std::uint32_t>();
      p.tf = r.pod<std::uint32_t>();
      if (p.doc >= docs) throw ValidationError("corrupt posting in " + path.string());
      list.push_back(p);
    }
    index.postings_.emplace(std::move(term), std::move(list));
  }
  return index;
}

RetrievedSet RetrievedSet::truncated(int top_k) const {
  if (top_k < 0 || top_k > k) {
    throw ArgumentError("requested depth " + std::to_string(top_k) + " exceeds retrieval depth " +
                        std::to_string(k) + " for query '" + query_id + "'");
  }
  RetrievedSet out{query_id, {}, top_k};
  const auto n = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(top_k));
  out.entries.assign(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

void RetrievedSet::validate() const {
  if (entries.size() > static_cast<std::size_t>(std::max(k, 0))) {
    throw ValidationError("query '" + query_id + "' has more entries than k");
  }
  std::set<std::string_view> ids;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (entries[i].rank != static_cast<int>(i) + 1) {
      throw ValidationError("query '" + query_id + "' has non-contiguous ranks");
    }
    if (i > 0 && entries[i].score > entries[i - 1].score) {
      throw ValidationError("query '" + query_id + "' scores increase with rank");
    }
    if (!ids.insert(entries[i].doc_id).second) {
      throw ValidationError("query '" + query_id + "' lists doc_id '" + entries[i].doc_id + "' twice");
    }
  }
}

RetrievedSet search(const InvertedIndex& index, std::string_view query_id, std::string_view query,
                    int k) {
  if (k < 1) throw ArgumentError("search depth k must be >= 1, got " + std::to_string(k));
  const auto& params = index.params();
  const auto terms = text::tokenize(query, params.tokenizer);
  std::vector<double> scores(index.doc_count(), 0.0);
  std::vector<std::uint32_t> candidates;
  std::vector<char> seen(index.doc_count(), 0);
  const double avgdl = index.avg_doc_length();
  for (const auto& term : terms) {
    const auto* list = index.postings_for(term);
    if (list == nullptr) continue;
    const double idf = index.idf(list->size());
    for (const auto& p : *list) {
      const double tf = p.tf;
      const double len = index.doc_lengths()[p.doc];
      scores[p.doc] +=
          idf * (tf * (params.k1 + 1.0)) / (tf + params.k1 * (1.0 - params.b + params.b * len / avgdl));
      if (!seen[p.doc]) {
        seen[p.doc] = 1;
        candidates.push_back(p.doc);
      }
    }
  }
  std::vector<RetrievedEntry> entries;
  entries.reserve(candidates.size());
  for (const auto doc : candidates) entries.push_back({index.doc_ids()[doc], scores[doc], 0});
  const auto n = std::min<std::size_t>(entries.size(), static_cast<std::size_t>(k));
  std::partial_sort(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(n), entries.end(),
                    ranks_before);
  entries.resize(n);
  assign_ranks(entries);
  return RetrievedSet{std::string(query_id), std::move(entries), k};
}

std::vector<RetrievedSet> search_batch(const InvertedIndex& index, std::span<const Query> queries,
                                       int k, int threads) {
  if (threads < 1) throw ArgumentError("threads must be >= 1");
  if (k < 1) throw ArgumentError("search depth k must be >= 1, got " + std::to_string(k));
  std::vector<RetrievedSet> out(queries.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < queries.size();) {
      out[i] = search(index, queries[i].query_id, queries[i].text, k);
    }
  };
  const auto n = std::min<std::size_t>(static_cast<std::size_t>(threads), queries.size());
  std::vector<std::jthread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  return out;
}

RetrievalMap import_retrieval(const std::filesystem::path& path, const corpus::CorpusStore& corpus) {
  RetrievalMap out;
  std::set<std::string> missing;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    RetrievedSet set;
    set.query_id = jsonl::require_string(record, "query_id", path, line);
    auto entries = record.find("entries");
    if (entries == record.end() || !entries->is_array()) {
      throw ParseError(path.string(), line + 1, "missing 'entries' list");
    }
    std::set<std::string, std::less<>> ids;
    for (const auto& e : *entries) {
      if (!e.is_object()) throw ParseError(path.string(), line + 1, "entries must be objects");
      RetrievedEntry entry;
      entry.doc_id = jsonl::require_string(e, "doc_id", path, line);
      auto score = e.find("score");
      if (score == e.end() || !score->is_number()) {
        throw ParseError(path.string(), line + 1, "entry '" + entry.doc_id + "' has no numeric score");
      }
      entry.score = score->get<double>();
      if (!ids.insert(entry.doc_id).second) {
        throw ValidationError(path.string() + ":" + std::to_string(line + 1) + ": doc_id '" +
                              entry.doc_id + "' appears twice for query '" + set.query_id + "'");
      }
      if (!corpus.contains(entry.doc_id)) missing.insert(entry.doc_id);
      set.entries.push_back(std::move(entry));
    }
    std::stable_sort(set.entries.begin(), set.entries.end(), ranks_before);
    assign_ranks(set.entries);
    set.k = static_cast<int>(set.entries.size());
    if (auto k = record.find("k"); k != record.end()) {
      if (!k->is_number_integer() || k->get<int>() < set.k) {
        throw ParseError(path.string(), line + 1, "'k' must be an integer >= the entry count");
      }
      set.k = k->get<int>();
    }
    if (!out.emplace(set.query_id, set).second) {
      throw ValidationError(path.string() + ":" + std::to_string(line + 1) + ": duplicate query_id '" +
                            set.query_id + "'");
    }
  });
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ReferentialError(path.string() + ": doc_ids absent from the corpus: " + list);
  }
  return out;
}

namespace {

nlohmann::ordered_json to_json(const RetrievedSet& set) {
  nlohmann::ordered_json entries = nlohmann::ordered_json::array();
  for (const auto& e : set.entries) entries.push_back({{"doc_id", e.doc_id}, {"score", e.score}});
  return {{"query_id", set.query_id}, {"k", set.k}, {"entries", std::move(entries)}};
}

}  // namespace

void export_retrieval(const std::vector<RetrievedSet>& sets, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& set : sets) writer.write(to_json(set));
}

void export_retrieval(const RetrievalMap& sets, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& [id, set] : sets) writer.write(to_json(set));
}

std::vector<corpus::Document> top_documents(const corpus::CorpusStore& corpus,
                                            const RetrievedSet& retrieved, int k) {
  std::vector<corpus::Document> docs;
  const auto n = std::min<std::size_t>(retrieved.entries.size(), static_cast<std::size_t>(std::max(k, 0)));
  docs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) docs.push_back(corpus.at(retrieved.entries[i].doc_id));
  return docs;
}

namespace {

void check_depth(const RetrievedSet& retrieved, int k) {
  if (k < 0 || k > retrieved.k) {
    throw ArgumentError("depth " + std::to_string(k) + " outside retrieval depth " +
                        std::to_string(retrieved.k) + " for query '" + retrieved.query_id + "'");
  }
}

std::size_t relevant_in_top(const corpus::CorpusStore& corpus, const RetrievedSet& retrieved,
                            const corpus::QASample& sample, int k, bool stop_at_first) {
  const evaluation::AnswerMatcher matcher(sample.answer_groups);
  std::size_t hits = 0;
  const auto n = std::min<std::size_t>(retrieved.entries.size(), static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    if (matcher.any(corpus.at(retrieved.entries[i].doc_id).body)) {
      ++hits;
      if (stop_at_first) break;
    }
  }
  return hits;
}

}  // namespace

bool recall_at_k(const corpus::CorpusStore& corpus, const RetrievedSet& retrieved,
                 const corpus::QASample& sample, int k) {
  check_depth(retrieved, k);
  return relevant_in_top(corpus, retrieved, sample, k, true) > 0;
}

double precision_at_k(const corpus::CorpusStore& corpus, const RetrievedSet& retrieved,
                      const corpus::QASample& sample, int k) {
  check_depth(retrieved, k);
  if (k < 1) throw ArgumentError("precision@k needs k >= 1");
  return static_cast<double>(relevant_in_top(corpus, retrieved, sample, k, false)) / k;
}

}  // namespace rrag::retrieval
