#include "rrag/inference.hpp"

#include <algorithm>
#include <numeric>

#include <fmt/format.h>

#include "rrag/error.hpp"
#include "rrag/hash.hpp"
#include "rrag/jsonl.hpp"
#include "rrag/matching.hpp"

namespace rrag::inference {
namespace {

bool needs_documents(Mode mode) { return mode != Mode::kZeroShot; }

double mean_accuracy(const RunResult& result, const std::vector<corpus::QASample>& dataset) {
  if (dataset.empty()) return 0.0;
  std::map<std::string_view, const GenerationRecord*> by_id;
  for (const auto& r : result.records) by_id.emplace(r.sample_id, &r);
  std::size_t correct = 0;
  for (const auto& sample : dataset) {
    auto it = by_id.find(sample.sample_id);
    // A failed sample counts as incorrect.
    if (it != by_id.end() && evaluation::accuracy(it->second->output, sample.answer_groups)) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

double mean_precision(const std::vector<corpus::QASample>& dataset, const corpus::CorpusStore& corpus,
                      const retrieval::RetrievalMap& retrievals, int k) {
  if (dataset.empty() || k < 1) return 0.0;
  double sum = 0.0;
  for (const auto& sample : dataset) {
    sum += retrieval::precision_at_k(corpus, retrievals.at(sample.sample_id), sample, k);
  }
  return sum / static_cast<double>(dataset.size());
}

void check_depths(const std::vector<corpus::QASample>& dataset,
                  const retrieval::RetrievalMap& retrievals, int k) {
  for (const auto& sample : dataset) {
    auto it = retrievals.find(sample.sample_id);
    if (it == retrievals.end()) {
      throw ReferentialError("no retrieval for sample '" + sample.sample_id + "'");
    }
    if (k > it->second.k) {
      throw ArgumentError("k = " + std::to_string(k) + " exceeds the retrieval depth " +
                          std::to_string(it->second.k) + " of sample '" + sample.sample_id + "'");
    }
  }
}

}  // namespace

std::string_view to_string(Mode mode) {
  switch (mode) {
    case Mode::kZeroShot: return "zero-shot";
    case Mode::kRALM: return "ralm";
    case Mode::kFewShotQA: return "few-shot-qa";
    case Mode::kInstructICL: return "instruct-icl";
    case Mode::kInstructFT: return "instruct-ft";
  }
  return "unknown";
}

Mode parse_mode(std::string_view text) {
  for (const auto m : {Mode::kZeroShot, Mode::kRALM, Mode::kFewShotQA, Mode::kInstructICL, Mode::kInstructFT}) {
    if (text == to_string(m)) return m;
  }
  throw ArgumentError("unknown inference mode '" + std::string(text) +
                      "' (zero-shot, ralm, few-shot-qa, instruct-icl, instruct-ft)");
}

bool uses_demonstrations(Mode mode) { return mode == Mode::kFewShotQA || mode == Mode::kInstructICL; }

int default_max_new_tokens(Mode mode) {
  return mode == Mode::kInstructICL || mode == Mode::kInstructFT ? 512 : 128;
}

InferenceJob InferenceJob::for_mode(Mode mode, int k_docs) {
  InferenceJob job;
  job.mode = mode;
  job.k_docs = k_docs;
  job.decode = {0.0, default_max_new_tokens(mode)};
  return job;
}

bool GenerationRecord::operator==(const GenerationRecord& other) const {
  return sample_id == other.sample_id && mode == other.mode && k_docs == other.k_docs &&
         output == other.output && prompt_hash == other.prompt_hash && model == other.model;
}

prompting::ChatPrompt build_prompt(const InferenceJob& job, const corpus::QASample& sample,
                                   const std::vector<corpus::Document>& docs,
                                   const std::vector<learning::SampledDemo>& demos) {
  switch (job.mode) {
    case Mode::kZeroShot:
      return prompting::render_ralm(sample.question, {});
    case Mode::kRALM:
      return prompting::render_ralm(sample.question, docs);
    case Mode::kInstructFT:
      return prompting::render_ft(sample.question, docs);
    case Mode::kFewShotQA:
    case Mode::kInstructICL: {
      const auto response = job.mode == Mode::kFewShotQA ? learning::DemoResponse::kAnswer
                                                         : learning::DemoResponse::kRationale;
      std::vector<prompting::Demonstration> shown;
      shown.reserve(demos.size());
      for (const auto& d : demos) shown.push_back(d.as(response));
      return prompting::render_icl(sample.question, docs, shown);
    }
  }
  throw ArgumentError("unhandled inference mode");
}

RunResult run(const InferenceJob& job, const std::vector<corpus::QASample>& dataset,
              const corpus::CorpusStore& corpus, const retrieval::RetrievalMap& retrievals,
              const synthesis::AugmentedDataset* aug, const lm::Gateway& gateway) {
  const bool with_docs = needs_documents(job.mode);
  if (with_docs) {
    if (job.k_docs < 0) throw ArgumentError("k_docs must be >= 0");
    check_depths(dataset, retrievals, job.k_docs);
  }
  const bool with_demos = uses_demonstrations(job.mode);
  if (with_demos && aug == nullptr) {
    throw ArgumentError(std::string(to_string(job.mode)) + " needs an augmented dataset for demonstrations");
  }

  std::vector<learning::SampledDemo> global_demos;
  if (with_demos && job.icl.scope == learning::DemoScope::kGlobal) {
    global_demos = learning::sample_demonstrations(*aug, job.icl);
  }

  std::vector<lm::CompletionRequest> requests;
  requests.reserve(dataset.size());
  for (const auto& sample : dataset) {
    std::vector<corpus::Document> docs;
    if (with_docs) docs = retrieval::top_documents(corpus, retrievals.at(sample.sample_id), job.k_docs);
    std::vector<learning::SampledDemo> demos;
    if (with_demos) {
      if (job.icl.scope == learning::DemoScope::kGlobal) {
        demos = global_demos;
      } else {
        learning::ICLConfig config = job.icl;
        config.seed = learning::per_query_seed(job.icl.seed, sample.sample_id);
        demos = learning::sample_demonstrations(*aug, config, {sample.sample_id});
      }
    }
    auto prompt = build_prompt(job, sample, docs, demos);
    prompting::check_budget(prompt, job.max_prompt_chars);
    requests.push_back({std::move(prompt), job.decode, sample.sample_id});
  }

  const auto completions = gateway.batch_complete(requests, job.parallelism);
  RunResult result;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& c = completions[i];
    if (!c.ok()) {
      result.failures.push_back({dataset[i].sample_id, c.error});
      continue;
    }
    GenerationRecord record;
    record.sample_id = dataset[i].sample_id;
    record.mode = job.mode;
    record.k_docs = with_docs ? job.k_docs : 0;
    record.output = *c.text;
    record.prompt_hash = sha256_hex(prompting::render_raw(requests[i].prompt));
    record.model = gateway.model_name();
    record.latency = c.latency;
    result.records.push_back(std::move(record));
  }
  return result;
}

std::vector<SweepRow> sweep_documents(const InferenceJob& job,
                                      const std::vector<corpus::QASample>& dataset,
                                      const corpus::CorpusStore& corpus,
                                      const retrieval::RetrievalMap& retrievals,
                                      const synthesis::AugmentedDataset* aug,
                                      const lm::Gateway& gateway, const std::vector<int>& k_values) {
  if (!needs_documents(job.mode)) throw ArgumentError("a document sweep needs a retrieval mode");
  if (k_values.empty()) throw ArgumentError("document sweep needs at least one k");
  for (const int k : k_values) {
    if (k < 1) throw ArgumentError("sweep values of k must be >= 1");
    check_depths(dataset, retrievals, k);
  }
  std::vector<SweepRow> rows;
  for (const int k : k_values) {
    InferenceJob row_job = job;
    row_job.k_docs = k;
    const auto result = run(row_job, dataset, corpus, retrievals, aug, gateway);
    rows.push_back({k, mean_accuracy(result, dataset), mean_precision(dataset, corpus, retrievals, k)});
  }
  return rows;
}

std::vector<SweepRow> sweep_demos(const InferenceJob& job,
                                  const std::vector<corpus::QASample>& dataset,
                                  const corpus::CorpusStore& corpus,
                                  const retrieval::RetrievalMap& retrievals,
                                  const synthesis::AugmentedDataset& aug,
                                  const lm::Gateway& gateway, const std::vector<int>& n_values) {
  if (!uses_demonstrations(job.mode)) {
    throw ArgumentError("a demonstration sweep needs mode few-shot-qa or instruct-icl");
  }
  if (n_values.empty()) throw ArgumentError("demonstration sweep needs at least one n");
  for (const int n : n_values) {
    if (n < 0) throw ArgumentError("sweep values of n must be >= 0");
    if (static_cast<std::size_t>(n) > aug.pairs.size()) {
      throw SamplingError("n = " + std::to_string(n) + " exceeds the " +
                          std::to_string(aug.pairs.size()) + " augmented pairs");
    }
  }
  check_depths(dataset, retrievals, job.k_docs);
  const double precision = mean_precision(dataset, corpus, retrievals, job.k_docs);
  std::vector<SweepRow> rows;
  for (const int n : n_values) {
    InferenceJob row_job = job;
    row_job.icl.n_demos = n;
    row_job.icl.seed = job.icl.seed + static_cast<std::uint64_t>(n);
    const auto result = run(row_job, dataset, corpus, retrievals, &aug, gateway);
    rows.push_back({n, mean_accuracy(result, dataset), precision});
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out = "k_or_n,accuracy,precision\n";
  for (const auto& r : rows) out += fmt::format("{},{},{}\n", r.k_or_n, r.accuracy, r.precision);
  return out;
}

void write_generations(const std::vector<GenerationRecord>& records,
                       const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& r : records) {
    writer.write({{"sample_id", r.sample_id},
                  {"mode", to_string(r.mode)},
                  {"k_docs", r.k_docs},
                  {"output", r.output},
                  {"prompt_hash", r.prompt_hash},
                  {"model", r.model}});
  }
}

std::vector<GenerationRecord> read_generations(const std::filesystem::path& path) {
  std::vector<GenerationRecord> out;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    GenerationRecord r;
    r.sample_id = jsonl::require_string(record, "sample_id", path, line);
    r.mode = parse_mode(jsonl::require_string(record, "mode", path, line));
    r.k_docs = record.value("k_docs", 0);
    r.output = jsonl::require_string(record, "output", path, line);
    r.prompt_hash = record.value("prompt_hash", "");
    r.model = record.value("model", "");
    out.push_back(std::move(r));
  });
  return out;
}

}  // namespace rrag::inference
