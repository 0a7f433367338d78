#include "rrag/synthesis.hpp"

#include <map>
#include <set>

#include "rrag/error.hpp"
#include "rrag/jsonl.hpp"
#include "rrag/matching.hpp"
#include "rrag/template_resources.hpp"

namespace rrag::synthesis {
namespace {

nlohmann::ordered_json rationale_json(const Rationale& r) {
  return {{"sample_id", r.sample_id},
          {"text", r.text},
          {"variant", to_string(r.kind)},
          {"consistent", r.consistent},
          {"relevant_doc_present", r.relevant_doc_present},
          {"model", r.model}};
}

Rationale rationale_from_json(const nlohmann::json& record, const std::filesystem::path& path,
                              std::size_t line) {
  Rationale r;
  r.sample_id = jsonl::require_string(record, "sample_id", path, line);
  r.text = jsonl::require_string(record, "text", path, line);
  r.kind = parse_rationale_kind(jsonl::require_string(record, "variant", path, line));
  r.consistent = record.value("consistent", false);
  r.relevant_doc_present = record.value("relevant_doc_present", false);
  r.model = record.value("model", "");
  if (r.text.empty()) throw ParseError(path.string(), line + 1, "empty rationale text");
  return r;
}

nlohmann::ordered_json sample_json(const corpus::QASample& s) {
  return {{"id", s.sample_id},
          {"question", s.question},
          {"answer_groups", s.answer_groups},
          {"task", corpus::to_string(s.task)}};
}

corpus::QASample sample_from_json(const nlohmann::json& record, const std::filesystem::path& path,
                                  std::size_t line) {
  corpus::QASample s;
  s.sample_id = jsonl::require_string(record, "id", path, line);
  s.question = jsonl::require_string(record, "question", path, line);
  s.answer_groups = record.at("answer_groups").get<std::vector<corpus::AnswerGroup>>();
  s.task = corpus::parse_task_tag(jsonl::require_string(record, "task", path, line));
  return s;
}

}  // namespace

std::string_view to_string(RationaleKind kind) {
  switch (kind) {
    case RationaleKind::kWithBoth: return "with-both";
    case RationaleKind::kNoAnswer: return "no-answer";
    case RationaleKind::kNoDocs: return "no-docs";
    case RationaleKind::kTemplate: return "template";
  }
  return "unknown";
}

RationaleKind parse_rationale_kind(std::string_view text) {
  for (const auto k : {RationaleKind::kWithBoth, RationaleKind::kNoAnswer, RationaleKind::kNoDocs,
                       RationaleKind::kTemplate}) {
    if (text == to_string(k)) return k;
  }
  throw ArgumentError("unknown rationale variant '" + std::string(text) +
                      "' (with-both, no-answer, no-docs, template)");
}

RationaleKind to_kind(prompting::RationaleVariant variant) {
  switch (variant) {
    case prompting::RationaleVariant::kWithBoth: return RationaleKind::kWithBoth;
    case prompting::RationaleVariant::kNoAnswer: return RationaleKind::kNoAnswer;
    case prompting::RationaleVariant::kNoDocs: return RationaleKind::kNoDocs;
  }
  return RationaleKind::kWithBoth;
}

bool check_consistency(std::string_view rationale_text,
                       const std::vector<corpus::AnswerGroup>& answer_groups) {
  return evaluation::accuracy(rationale_text, answer_groups);
}

SynthesisResult synthesize(const std::vector<corpus::QASample>& dataset,
                           const corpus::CorpusStore& corpus,
                           const retrieval::RetrievalMap& retrievals, const lm::Gateway& gateway,
                           prompting::RationaleVariant variant,
                           const prompting::TaskInstruction& instruction,
                           const SynthesisOptions& options) {
  if (options.top_k < 1) throw ArgumentError("synthesis top_k must be >= 1");
  const bool needs_docs = variant != prompting::RationaleVariant::kNoDocs;
  std::vector<lm::CompletionRequest> requests;
  std::vector<bool> relevant;
  requests.reserve(dataset.size());
  for (const auto& sample : dataset) {
    auto it = retrievals.find(sample.sample_id);
    if (it == retrievals.end() && needs_docs) {
      throw ReferentialError("no retrieval for sample '" + sample.sample_id + "'");
    }
    std::vector<corpus::Document> docs;
    bool has_relevant = false;
    if (it != retrievals.end()) {
      const int depth = std::min(options.top_k, it->second.k);
      docs = retrieval::top_documents(corpus, it->second, depth);
      has_relevant = retrieval::recall_at_k(corpus, it->second, sample, depth);
    }
    requests.push_back({prompting::render_rationale_gen(sample, docs, variant, instruction),
                        options.decode, sample.sample_id});
    relevant.push_back(has_relevant);
  }

  const auto completions = gateway.batch_complete(requests, options.parallelism);
  SynthesisResult result;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& c = completions[i];
    if (!c.ok()) {
      result.failures.push_back({dataset[i].sample_id, c.error});
      continue;
    }
    if (c.text->empty()) {
      result.failures.push_back({dataset[i].sample_id, "empty completion"});
      continue;
    }
    Rationale r;
    r.sample_id = dataset[i].sample_id;
    r.text = *c.text;
    r.kind = to_kind(variant);
    r.consistent = check_consistency(r.text, dataset[i].answer_groups);
    r.relevant_doc_present = relevant[i];
    r.model = gateway.model_name();
    result.rationales.push_back(std::move(r));
  }
  return result;
}

double consistency_ratio(const std::vector<Rationale>& rationales, bool restrict_to_relevant) {
  std::size_t total = 0;
  std::size_t consistent = 0;
  for (const auto& r : rationales) {
    if (restrict_to_relevant && !r.relevant_doc_present) continue;
    ++total;
    consistent += r.consistent ? 1 : 0;
  }
  if (total == 0) {
    throw StatisticsError(restrict_to_relevant ? "no rationale has a relevant document"
                                               : "no rationales to score");
  }
  return static_cast<double>(consistent) / static_cast<double>(total);
}

Rationale template_rationale(const corpus::CorpusStore& corpus, const corpus::QASample& sample,
                             const retrieval::RetrievedSet& retrieved, int top_k) {
  corpus::validate_sample(sample);
  const evaluation::AnswerMatcher matcher(sample.answer_groups);
  const auto docs = retrieval::top_documents(corpus, retrieved, top_k);
  std::string indices;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!matcher.any(docs[i].body)) continue;
    if (!indices.empty()) indices += ", ";
    indices += "[" + std::to_string(i + 1) + "]";
  }
  const std::string& answer = sample.answer_groups.front().front();
  Rationale r;
  r.sample_id = sample.sample_id;
  r.kind = RationaleKind::kTemplate;
  r.model = "template";
  r.relevant_doc_present = !indices.empty();
  if (r.relevant_doc_present) {
    r.text = prompting::fill(prompting::resources::get("rationale_template_positive"),
                             {{"documents", indices}, {"answer", answer}});
  } else {
    r.text = prompting::fill(prompting::resources::get("rationale_template_negative"),
                             {{"answer", answer}});
  }
  r.consistent = check_consistency(r.text, sample.answer_groups);
  return r;
}

std::vector<Rationale> synthesize_templates(const std::vector<corpus::QASample>& dataset,
                                            const corpus::CorpusStore& corpus,
                                            const retrieval::RetrievalMap& retrievals, int top_k) {
  std::vector<Rationale> out;
  out.reserve(dataset.size());
  for (const auto& sample : dataset) {
    auto it = retrievals.find(sample.sample_id);
    if (it == retrievals.end()) throw ReferentialError("no retrieval for sample '" + sample.sample_id + "'");
    out.push_back(template_rationale(corpus, sample, it->second, std::min(top_k, it->second.k)));
  }
  return out;
}

std::string_view to_string(AugmentPolicy policy) {
  return policy == AugmentPolicy::kKeepAll ? "keep-all" : "keep-consistent";
}

AugmentPolicy parse_augment_policy(std::string_view text) {
  if (text == "keep-all") return AugmentPolicy::kKeepAll;
  if (text == "keep-consistent") return AugmentPolicy::kKeepConsistentOnly;
  throw ArgumentError("unknown augment policy '" + std::string(text) + "' (keep-all, keep-consistent)");
}

AugmentedDataset augment(const std::vector<corpus::QASample>& dataset,
                         const std::vector<Rationale>& rationales, AugmentPolicy policy,
                         Provenance provenance) {
  std::map<std::string_view, const Rationale*> by_id;
  std::set<std::string_view> known;
  for (const auto& s : dataset) known.insert(s.sample_id);
  for (const auto& r : rationales) {
    if (!known.contains(r.sample_id)) {
      throw ReferentialError("rationale references unknown sample '" + r.sample_id + "'");
    }
    if (!by_id.emplace(r.sample_id, &r).second) {
      throw IntegrityError("sample '" + r.sample_id + "' has more than one rationale");
    }
  }
  AugmentedDataset out;
  out.provenance = std::move(provenance);
  for (const auto& sample : dataset) {
    auto it = by_id.find(sample.sample_id);
    if (it == by_id.end()) continue;
    if (policy == AugmentPolicy::kKeepConsistentOnly && !it->second->consistent) continue;
    out.pairs.push_back({sample, *it->second});
  }
  return out;
}

void write_rationales(const std::vector<Rationale>& rationales, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& r : rationales) writer.write(rationale_json(r));
}

std::vector<Rationale> read_rationales(const std::filesystem::path& path) {
  std::vector<Rationale> out;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    out.push_back(rationale_from_json(record, path, line));
  });
  return out;
}

void write_failures(const std::vector<SampleFailure>& failures, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& f : failures) writer.write({{"sample_id", f.sample_id}, {"error", f.message}});
}

void write_augmented(const AugmentedDataset& dataset, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  writer.write({{"provenance",
                 {{"model", dataset.provenance.model},
                  {"variant", to_string(dataset.provenance.kind)},
                  {"timestamp", dataset.provenance.timestamp}}}});
  for (const auto& pair : dataset.pairs) {
    writer.write({{"sample", sample_json(pair.sample)}, {"rationale", rationale_json(pair.rationale)}});
  }
}

AugmentedDataset read_augmented(const std::filesystem::path& path) {
  AugmentedDataset out;
  bool header = false;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    try {
      if (!header) {
        const auto& p = record.at("provenance");
        out.provenance.model = p.at("model").get<std::string>();
        out.provenance.kind = parse_rationale_kind(p.at("variant").get<std::string>());
        out.provenance.timestamp = p.at("timestamp").get<std::string>();
        header = true;
        return;
      }
      out.pairs.push_back({sample_from_json(record.at("sample"), path, line),
                           rationale_from_json(record.at("rationale"), path, line)});
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(path.string(), line + 1, e.what());
    }
  });
  if (!header) throw ParseError(path.string(), 1, "missing provenance header");
  return out;
}

}  // namespace rrag::synthesis
