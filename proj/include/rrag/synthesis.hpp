#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "rrag/corpus.hpp"
#include "rrag/lm.hpp"
#include "rrag/prompting.hpp"
#include "rrag/retrieval.hpp"

namespace rrag::synthesis {

/// How a rationale was produced: one of the LM prompt variants, or the
/// substring-matching template.
enum class RationaleKind { kWithBoth, kNoAnswer, kNoDocs, kTemplate };

std::string_view to_string(RationaleKind kind);
RationaleKind parse_rationale_kind(std::string_view text);
RationaleKind to_kind(prompting::RationaleVariant variant);

struct Rationale {
  std::string sample_id;
  std::string text;
  RationaleKind kind = RationaleKind::kWithBoth;
  bool consistent = false;
  bool relevant_doc_present = false;
  std::string model;

  bool operator==(const Rationale&) const = default;
};

struct SampleFailure {
  std::string sample_id;
  std::string message;

  bool operator==(const SampleFailure&) const = default;
};

struct SynthesisOptions {
  /// Documents shown per sample, also the depth for relevant_doc_present.
  int top_k = 5;
  int parallelism = 8;
  lm::DecodeParams decode{0.0, 512};
};

struct SynthesisResult {
  std::vector<Rationale> rationales;  // dataset order, failures omitted
  std::vector<SampleFailure> failures;
};

/// Renders the rationale-generation prompt for every sample and completes it
/// through the gateway. Every sample needs a retrieval unless the variant is
/// NoDocs (ReferentialError otherwise).
SynthesisResult synthesize(const std::vector<corpus::QASample>& dataset,
                           const corpus::CorpusStore& corpus,
                           const retrieval::RetrievalMap& retrievals, const lm::Gateway& gateway,
                           prompting::RationaleVariant variant,
                           const prompting::TaskInstruction& instruction,
                           const SynthesisOptions& options = {});

/// True iff some gold alias is a normalized substring of the text.
bool check_consistency(std::string_view rationale_text,
                       const std::vector<corpus::AnswerGroup>& answer_groups);

/// Fraction of consistent rationales, optionally over those with a relevant
/// document only. Throws StatisticsError when nothing is left to count.
double consistency_ratio(const std::vector<Rationale>& rationales, bool restrict_to_relevant);

/// Substring-matching rationale: lists the top-k documents containing a gold
/// alias, or states none do, then gives the first alias of the first group.
Rationale template_rationale(const corpus::CorpusStore& corpus, const corpus::QASample& sample,
                             const retrieval::RetrievedSet& retrieved, int top_k);

std::vector<Rationale> synthesize_templates(const std::vector<corpus::QASample>& dataset,
                                            const corpus::CorpusStore& corpus,
                                            const retrieval::RetrievalMap& retrievals, int top_k);

enum class AugmentPolicy { kKeepAll, kKeepConsistentOnly };

std::string_view to_string(AugmentPolicy policy);
AugmentPolicy parse_augment_policy(std::string_view text);

struct Provenance {
  std::string model;
  RationaleKind kind = RationaleKind::kWithBoth;
  std::string timestamp;

  bool operator==(const Provenance&) const = default;
};

struct AugmentedPair {
  corpus::QASample sample;
  Rationale rationale;

  bool operator==(const AugmentedPair&) const = default;
};

struct AugmentedDataset {
  std::vector<AugmentedPair> pairs;
  Provenance provenance;

  bool operator==(const AugmentedDataset&) const = default;
};

/// Pairs samples with their rationales in dataset order. Throws
/// ReferentialError for rationales naming unknown samples and IntegrityError
/// for a sample with two rationales.
AugmentedDataset augment(const std::vector<corpus::QASample>& dataset,
                         const std::vector<Rationale>& rationales, AugmentPolicy policy,
                         Provenance provenance);

void write_rationales(const std::vector<Rationale>& rationales, const std::filesystem::path& path);
std::vector<Rationale> read_rationales(const std::filesystem::path& path);

void write_failures(const std::vector<SampleFailure>& failures, const std::filesystem::path& path);

/// First line {"provenance": {...}}, then one {"sample": ..., "rationale": ...}
/// per pair.
void write_augmented(const AugmentedDataset& dataset, const std::filesystem::path& path);
AugmentedDataset read_augmented(const std::filesystem::path& path);

}  // namespace rrag::synthesis
