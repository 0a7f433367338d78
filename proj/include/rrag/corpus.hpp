#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rrag::corpus {

/// One retrieval passage.
struct Document {
  std::string doc_id;
  std::string title;
  std::string body;

  bool operator==(const Document&) const = default;
};

enum class TaskTag { kPopQA, kTriviaQA, kNQ, kASQA, kTwoWikiMultiHop, kCustom };

std::string_view to_string(TaskTag tag);
TaskTag parse_task_tag(std::string_view text);

/// Default retrieval depth used for a task (5, or 10 for 2WikiMultiHopQA).
int default_top_k(TaskTag tag);

enum class Split { kTrain, kTest };

/// Published split sizes for the five benchmark tasks; nullopt for Custom.
std::optional<std::size_t> reference_split_size(TaskTag tag, Split split);

using AnswerGroup = std::vector<std::string>;

struct QASample {
  std::string sample_id;
  std::string question;
  /// One alias list per acceptable answer; several groups only for
  /// multi-interpretation tasks such as ASQA.
  std::vector<AnswerGroup> answer_groups;
  TaskTag task = TaskTag::kCustom;

  bool operator==(const QASample&) const = default;
};

/// Answer string shown to a generator: the first alias of every group,
/// joined by ", ".
std::string answer_text(const QASample& sample);

enum class CorpusFormat { kTsv, kJsonl };

CorpusFormat parse_corpus_format(std::string_view text);
/// Guesses from the file extension (".tsv" vs anything else).
CorpusFormat detect_corpus_format(const std::filesystem::path& path);

struct IngestOptions {
  std::size_t word_cap = 120;
  /// Over-cap bodies are reported as warnings unless strict.
  bool strict_word_cap = false;
};

/// Immutable document store keyed by doc_id. Iteration follows ingestion
/// order.
class CorpusStore {
 public:
  CorpusStore() = default;

  /// Throws IntegrityError on duplicate ids, ValidationError on empty bodies.
  static CorpusStore from_documents(std::vector<Document> documents,
                                    const IngestOptions& options = {});

  const Document* find(std::string_view doc_id) const;
  /// Throws ReferentialError for unknown ids.
  const Document& at(std::string_view doc_id) const;
  bool contains(std::string_view doc_id) const { return find(doc_id) != nullptr; }

  std::size_t count() const noexcept { return documents_.size(); }
  bool empty() const noexcept { return documents_.empty(); }
  const std::vector<Document>& documents() const noexcept { return documents_; }
  /// Over-cap warnings collected during ingestion.
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

 private:
  std::vector<Document> documents_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<std::string> warnings_;
};

CorpusStore ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                          const IngestOptions& options = {});

void write_corpus(const CorpusStore& store, const std::filesystem::path& path,
                  CorpusFormat format);

/// Loads QA JSONL. Records carry `question` plus either `answers` (flat alias
/// list, or a list of alias lists) or `answer_groups`. `id` is optional; the
/// 0-based line number is used when absent.
std::vector<QASample> ingest_qa(const std::filesystem::path& path, TaskTag task);

void write_qa(const std::vector<QASample>& samples, const std::filesystem::path& path);

/// Validates answer-group invariants; throws ValidationError.
void validate_sample(const QASample& sample);

}  // namespace rrag::corpus
