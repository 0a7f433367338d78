#pragma once

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "rrag/corpus.hpp"
#include "rrag/learning.hpp"
#include "rrag/lm.hpp"
#include "rrag/retrieval.hpp"
#include "rrag/synthesis.hpp"

namespace rrag::inference {

enum class Mode { kZeroShot, kRALM, kFewShotQA, kInstructICL, kInstructFT };

std::string_view to_string(Mode mode);
Mode parse_mode(std::string_view text);
bool uses_demonstrations(Mode mode);
/// 512 for rationale-producing modes, 128 otherwise.
int default_max_new_tokens(Mode mode);

struct InferenceJob {
  Mode mode = Mode::kRALM;
  int k_docs = 5;
  learning::ICLConfig icl;
  lm::DecodeParams decode{0.0, 128};
  int parallelism = 8;
  /// Hard limit on the raw prompt length; 0 disables.
  std::size_t max_prompt_chars = 0;

  static InferenceJob for_mode(Mode mode, int k_docs);
};

struct GenerationRecord {
  std::string sample_id;
  Mode mode = Mode::kRALM;
  int k_docs = 0;
  std::string output;
  std::string prompt_hash;
  std::string model;
  std::chrono::nanoseconds latency{0};

  /// Equality ignores latency.
  bool operator==(const GenerationRecord& other) const;
};

struct RunResult {
  std::vector<GenerationRecord> records;  // dataset order, failures omitted
  std::vector<synthesis::SampleFailure> failures;
};

/// Prompts every sample per the job's mode and completes it. Retrievals must
/// cover the dataset unless the mode is ZeroShot; ICL modes need `aug`.
RunResult run(const InferenceJob& job, const std::vector<corpus::QASample>& dataset,
              const corpus::CorpusStore& corpus, const retrieval::RetrievalMap& retrievals,
              const synthesis::AugmentedDataset* aug, const lm::Gateway& gateway);

/// Prompt the job would send for one sample. `demos` is ignored by modes
/// without demonstrations.
prompting::ChatPrompt build_prompt(const InferenceJob& job, const corpus::QASample& sample,
                                   const std::vector<corpus::Document>& docs,
                                   const std::vector<learning::SampledDemo>& demos);

struct SweepRow {
  int k_or_n = 0;
  double accuracy = 0.0;
  double precision = 0.0;

  bool operator==(const SweepRow&) const = default;
};

/// One run per k over top-k prefixes of the retrievals. Throws ArgumentError
/// when some k exceeds a retrieval's depth.
std::vector<SweepRow> sweep_documents(const InferenceJob& job,
                                      const std::vector<corpus::QASample>& dataset,
                                      const corpus::CorpusStore& corpus,
                                      const retrieval::RetrievalMap& retrievals,
                                      const synthesis::AugmentedDataset* aug,
                                      const lm::Gateway& gateway, const std::vector<int>& k_values);

/// One run per demonstration count; row n uses seed = job.icl.seed + n.
/// The precision column holds mean precision@k_docs.
std::vector<SweepRow> sweep_demos(const InferenceJob& job,
                                  const std::vector<corpus::QASample>& dataset,
                                  const corpus::CorpusStore& corpus,
                                  const retrieval::RetrievalMap& retrievals,
                                  const synthesis::AugmentedDataset& aug,
                                  const lm::Gateway& gateway, const std::vector<int>& n_values);

/// Header `k_or_n,accuracy,precision`, shortest round-trip decimals.
std::string sweep_csv(const std::vector<SweepRow>& rows);

void write_generations(const std::vector<GenerationRecord>& records,
                       const std::filesystem::path& path);
std::vector<GenerationRecord> read_generations(const std::filesystem::path& path);

}  // namespace rrag::inference
