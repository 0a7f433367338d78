#include "rrag/corpus.hpp"

#include <fstream>
#include <set>

#include <spdlog/spdlog.h>

#include "rrag/error.hpp"
#include "rrag/jsonl.hpp"
#include "rrag/text.hpp"

namespace rrag::corpus {
namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

// DPR dumps quote passage text csv-style: "..." with "" for a literal quote.
std::string unquote(const std::string& field) {
  if (field.size() < 2 || field.front() != '"' || field.back() != '"') return field;
  std::string out;
  out.reserve(field.size() - 2);
  for (std::size_t i = 1; i + 1 < field.size(); ++i) {
    out.push_back(field[i]);
    if (field[i] == '"' && i + 2 < field.size() && field[i + 1] == '"') ++i;
  }
  return out;
}

bool needs_quoting(const std::string& field) {
  return field.find('"') != std::string::npos || field.find('\t') != std::string::npos;
}

std::string quote(const std::string& field) {
  std::string out = "\"";
  for (const char c : field) {
    out.push_back(c);
    if (c == '"') out.push_back('"');
  }
  out.push_back('"');
  return out;
}

std::string id_field(const nlohmann::json& value, const std::filesystem::path& path,
                     std::size_t line) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_number_integer()) return std::to_string(value.get<long long>());
  throw ParseError(path.string(), line + 1, "id must be a string or integer");
}

std::vector<std::string> string_list(const nlohmann::json& value, const std::filesystem::path& path,
                                     std::size_t line, const char* what) {
  if (!value.is_array()) throw ParseError(path.string(), line + 1, std::string(what) + " must be a list");
  std::vector<std::string> out;
  for (const auto& item : value) {
    if (item.is_string()) {
      out.push_back(item.get<std::string>());
    } else if (item.is_number()) {
      out.push_back(item.dump());
    } else {
      throw ParseError(path.string(), line + 1, std::string(what) + " entries must be strings");
    }
  }
  return out;
}

}  // namespace

std::string_view to_string(TaskTag tag) {
  switch (tag) {
    case TaskTag::kPopQA: return "popqa";
    case TaskTag::kTriviaQA: return "triviaqa";
    case TaskTag::kNQ: return "nq";
    case TaskTag::kASQA: return "asqa";
    case TaskTag::kTwoWikiMultiHop: return "2wikimultihop";
    case TaskTag::kCustom: return "custom";
  }
  return "custom";
}

TaskTag parse_task_tag(std::string_view text) {
  for (const auto tag : {TaskTag::kPopQA, TaskTag::kTriviaQA, TaskTag::kNQ, TaskTag::kASQA,
                         TaskTag::kTwoWikiMultiHop, TaskTag::kCustom}) {
    if (text == to_string(tag)) return tag;
  }
  throw ArgumentError("unknown task '" + std::string(text) +
                      "' (popqa, triviaqa, nq, asqa, 2wikimultihop, custom)");
}

int default_top_k(TaskTag tag) { return tag == TaskTag::kTwoWikiMultiHop ? 10 : 5; }

std::optional<std::size_t> reference_split_size(TaskTag tag, Split split) {
  const bool train = split == Split::kTrain;
  switch (tag) {
    case TaskTag::kPopQA: return train ? 12868 : 1399;
    case TaskTag::kTriviaQA: return train ? 78785 : 11313;
    case TaskTag::kNQ: return train ? 79168 : 3610;
    case TaskTag::kASQA: return train ? 4353 : 948;
    case TaskTag::kTwoWikiMultiHop: return train ? 167454 : 12576;
    case TaskTag::kCustom: return std::nullopt;
  }
  return std::nullopt;
}

std::string answer_text(const QASample& sample) {
  std::string out;
  for (const auto& group : sample.answer_groups) {
    if (group.empty()) continue;
    if (!out.empty()) out += ", ";
    out += group.front();
  }
  return out;
}

CorpusFormat parse_corpus_format(std::string_view text) {
  if (text == "tsv") return CorpusFormat::kTsv;
  if (text == "jsonl") return CorpusFormat::kJsonl;
  throw ArgumentError("unknown corpus format '" + std::string(text) + "' (tsv, jsonl)");
}

CorpusFormat detect_corpus_format(const std::filesystem::path& path) {
  return path.extension() == ".tsv" ? CorpusFormat::kTsv : CorpusFormat::kJsonl;
}

CorpusStore CorpusStore::from_documents(std::vector<Document> documents,
                                        const IngestOptions& options) {
  CorpusStore store;
  store.index_.reserve(documents.size());
  for (std::size_t i = 0; i < documents.size(); ++i) {
    const Document& doc = documents[i];
    if (doc.doc_id.empty()) throw ValidationError("document at position " + std::to_string(i) + " has an empty id");
    if (doc.body.empty()) throw ValidationError("document '" + doc.doc_id + "' has an empty body");
    if (!store.index_.emplace(doc.doc_id, i).second) {
      throw IntegrityError("duplicate doc_id '" + doc.doc_id + "'");
    }
    const std::size_t words = text::word_count(doc.body);
    if (words > options.word_cap) {
      std::string message = "document '" + doc.doc_id + "' has " + std::to_string(words) +
                            " words (cap " + std::to_string(options.word_cap) + ")";
      if (options.strict_word_cap) throw ValidationError(message);
      store.warnings_.push_back(std::move(message));
    }
  }
  store.documents_ = std::move(documents);
  if (!store.warnings_.empty()) {
    spdlog::warn("{} document(s) exceed the word cap; first: {}", store.warnings_.size(),
                 store.warnings_.front());
  }
  return store;
}

const Document* CorpusStore::find(std::string_view doc_id) const {
  auto it = index_.find(std::string(doc_id));
  return it == index_.end() ? nullptr : &documents_[it->second];
}

const Document& CorpusStore::at(std::string_view doc_id) const {
  if (const Document* doc = find(doc_id)) return *doc;
  throw ReferentialError("unknown doc_id '" + std::string(doc_id) + "'");
}

CorpusStore ingest_corpus(const std::filesystem::path& path, CorpusFormat format,
                          const IngestOptions& options) {
  std::vector<Document> documents;
  std::set<std::string, std::less<>> seen;
  auto add = [&](Document doc, std::size_t line) {
    if (doc.body.empty()) throw ParseError(path.string(), line + 1, "empty passage text");
    if (!seen.insert(doc.doc_id).second) {
      throw IntegrityError(path.string() + ":" + std::to_string(line + 1) + ": duplicate doc_id '" +
                           doc.doc_id + "'");
    }
    documents.push_back(std::move(doc));
  };

  if (format == CorpusFormat::kTsv) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open " + path.string());
    std::string line;
    bool first = true;
    for (std::size_t line_no = 0; std::getline(in, line); ++line_no) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_tabs(line);
      if (first && !fields.empty() && fields[0] == "id") {
        first = false;
        continue;
      }
      first = false;
      if (fields.size() != 3) {
        throw ParseError(path.string(), line_no + 1,
                         "expected 3 tab-separated fields (id, text, title), found " +
                             std::to_string(fields.size()));
      }
      if (fields[0].empty()) throw ParseError(path.string(), line_no + 1, "empty id");
      add(Document{fields[0], unquote(fields[2]), unquote(fields[1])}, line_no);
    }
  } else {
    jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
      const auto id_it = record.contains("id") ? record.find("id") : record.find("doc_id");
      if (id_it == record.end()) throw ParseError(path.string(), line + 1, "missing 'id'");
      Document doc;
      doc.doc_id = id_field(*id_it, path, line);
      doc.title = record.contains("title") ? jsonl::require_string(record, "title", path, line) : "";
      doc.body = jsonl::require_string(record, record.contains("text") ? "text" : "body", path, line);
      add(std::move(doc), line);
    });
  }
  return CorpusStore::from_documents(std::move(documents), options);
}

void write_corpus(const CorpusStore& store, const std::filesystem::path& path,
                  CorpusFormat format) {
  if (format == CorpusFormat::kJsonl) {
    jsonl::Writer writer(path);
    for (const auto& doc : store.documents()) {
      writer.write({{"id", doc.doc_id}, {"title", doc.title}, {"text", doc.body}});
    }
    return;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << "id\ttext\ttitle\n";
  for (const auto& doc : store.documents()) {
    if (doc.doc_id.find_first_of("\t\n") != std::string::npos ||
        doc.body.find('\n') != std::string::npos || doc.title.find('\n') != std::string::npos) {
      throw ValidationError("document '" + doc.doc_id + "' cannot be written as TSV");
    }
    const std::string body = needs_quoting(doc.body) ? quote(doc.body) : doc.body;
    const std::string title = needs_quoting(doc.title) ? quote(doc.title) : doc.title;
    out << doc.doc_id << '\t' << body << '\t' << title << '\n';
  }
}

void validate_sample(const QASample& sample) {
  if (sample.answer_groups.empty()) {
    throw ValidationError("sample '" + sample.sample_id + "' has no answers");
  }
  for (const auto& group : sample.answer_groups) {
    if (group.empty()) throw ValidationError("sample '" + sample.sample_id + "' has an empty answer group");
    for (const auto& alias : group) {
      if (text::normalize(alias).empty()) {
        throw ValidationError("sample '" + sample.sample_id + "' has an empty answer alias");
      }
    }
  }
  if (sample.task != TaskTag::kASQA && sample.task != TaskTag::kCustom &&
      sample.answer_groups.size() != 1) {
    throw ValidationError("sample '" + sample.sample_id + "' of single-answer task " +
                          std::string(to_string(sample.task)) + " has " +
                          std::to_string(sample.answer_groups.size()) + " answer groups");
  }
}

std::vector<QASample> ingest_qa(const std::filesystem::path& path, TaskTag task) {
  std::vector<QASample> samples;
  std::set<std::string, std::less<>> seen;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    QASample sample;
    sample.task = task;
    sample.sample_id = record.contains("id") ? id_field(record["id"], path, line) : std::to_string(line);
    sample.question = jsonl::require_string(record, "question", path, line);
    if (record.contains("answer_groups")) {
      const auto& groups = record["answer_groups"];
      if (!groups.is_array()) throw ParseError(path.string(), line + 1, "answer_groups must be a list");
      for (const auto& group : groups) sample.answer_groups.push_back(string_list(group, path, line, "answer group"));
    } else if (record.contains("answers")) {
      const auto& answers = record["answers"];
      if (answers.is_array() && !answers.empty() && answers.front().is_array()) {
        for (const auto& group : answers) sample.answer_groups.push_back(string_list(group, path, line, "answer group"));
      } else {
        auto flat = string_list(answers, path, line, "answers");
        if (!flat.empty()) sample.answer_groups.push_back(std::move(flat));
      }
    }
    try {
      validate_sample(sample);
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line + 1) + ": " + e.what());
    }
    if (!seen.insert(sample.sample_id).second) {
      throw IntegrityError(path.string() + ":" + std::to_string(line + 1) + ": duplicate sample id '" +
                           sample.sample_id + "'");
    }
    samples.push_back(std::move(sample));
  });
  return samples;
}

void write_qa(const std::vector<QASample>& samples, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& sample : samples) {
    nlohmann::ordered_json record{{"id", sample.sample_id}, {"question", sample.question}};
    if (sample.answer_groups.size() == 1) {
      record["answers"] = sample.answer_groups.front();
    } else {
      record["answer_groups"] = sample.answer_groups;
    }
    writer.write(record);
  }
}

}  // namespace rrag::corpus
