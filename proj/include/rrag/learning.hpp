#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "rrag/corpus.hpp"
#include "rrag/prompting.hpp"
#include "rrag/retrieval.hpp"
#include "rrag/synthesis.hpp"

namespace rrag::learning {

enum class DemoScope { kGlobal, kPerQuery };

std::string_view to_string(DemoScope scope);
DemoScope parse_demo_scope(std::string_view text);

struct ICLConfig {
  int n_demos = 2;
  std::uint64_t seed = 0;
  DemoScope scope = DemoScope::kGlobal;
};

/// What a demonstration shows after its question.
enum class DemoResponse { kRationale, kAnswer };

struct SampledDemo {
  std::string sample_id;
  std::string question;
  std::string rationale;
  std::string answer;

  bool operator==(const SampledDemo&) const = default;

  prompting::Demonstration as(DemoResponse response) const;
};

/// Uniform draw of n_demos pairs without replacement, in draw order.
/// Excluded sample ids are never drawn. Throws SamplingError when fewer than
/// n_demos candidates remain, ArgumentError for negative n_demos.
std::vector<SampledDemo> sample_demonstrations(const synthesis::AugmentedDataset& aug,
                                               const ICLConfig& config,
                                               const std::set<std::string, std::less<>>& exclude_ids = {});

/// Seed used for a query under per-query scope: base seed mixed with the
/// query's sample id.
std::uint64_t per_query_seed(std::uint64_t base_seed, std::string_view sample_id);

void write_demonstrations(const std::vector<SampledDemo>& demos, const std::filesystem::path& path);
std::vector<SampledDemo> read_demonstrations(const std::filesystem::path& path);

struct SFTRecord {
  std::string sample_id;
  std::string prompt_question;
  std::vector<std::string> prompt_doc_ids;
  std::string prompt_documents;  // rendered block
  std::vector<prompting::Message> messages;  // user prompt + assistant target

  const std::string& target() const { return messages.back().content; }
};

/// One record per pair: the FT inference prompt over the pair's top-k
/// documents, with the rationale as assistant target. Throws ReferentialError
/// when a pair has no retrieval.
std::vector<SFTRecord> build_sft(const synthesis::AugmentedDataset& aug,
                                 const corpus::CorpusStore& corpus,
                                 const retrieval::RetrievalMap& retrievals, int top_k);

/// Writes {"messages": [...]} per line; returns the record count.
std::size_t export_sft(const synthesis::AugmentedDataset& aug, const corpus::CorpusStore& corpus,
                       const retrieval::RetrievalMap& retrievals, int top_k,
                       const std::filesystem::path& path);

/// Messages of every exported record, in file order.
std::vector<std::vector<prompting::Message>> read_sft(const std::filesystem::path& path);

}  // namespace rrag::learning
