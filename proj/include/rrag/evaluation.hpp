#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrag/corpus.hpp"
#include "rrag/inference.hpp"
#include "rrag/lm.hpp"
#include "rrag/matching.hpp"
#include "rrag/retrieval.hpp"
#include "rrag/synthesis.hpp"

namespace rrag::evaluation {

enum class Verdict { kAligned, kNotAligned, kUnparseable };

std::string_view to_string(Verdict verdict);
Verdict parse_verdict_name(std::string_view text);

/// Reads a judge reply. With the verdict suffix (verbatim = false) only a
/// final `VERDICT: ALIGNED|NOT_ALIGNED` line counts; several conflicting
/// verdict lines are Unparseable. In verbatim mode the concluding sentence
/// of free-form analysis is read instead.
Verdict parse_verdict(std::string_view reply, bool verbatim);

/// Renders the judge prompt, completes it, parses the reply. Gateway errors
/// propagate.
Verdict judge(const lm::Gateway& gateway, std::string_view question, std::string_view gold_answer,
              std::string_view rationale, bool verbatim = false, std::string_view sample_id = {});

struct JudgeRecord {
  std::string sample_id;
  Verdict verdict = Verdict::kUnparseable;
  std::string reply;

  bool operator==(const JudgeRecord&) const = default;
};

struct JudgeRun {
  std::vector<JudgeRecord> records;
  std::vector<synthesis::SampleFailure> failures;
};

/// Judges every generation against answer_text() of its sample.
JudgeRun judge_generations(const lm::Gateway& gateway,
                           const std::vector<corpus::QASample>& dataset,
                           const std::vector<inference::GenerationRecord>& generations,
                           bool verbatim, int parallelism, const lm::DecodeParams& decode = {0.0, 512});

void write_judgments(const std::vector<JudgeRecord>& records, const std::filesystem::path& path);
std::vector<JudgeRecord> read_judgments(const std::filesystem::path& path);

struct MetricSelection {
  bool accuracy = true;
  bool str_em = true;
  /// Retrieval statistics at this depth; 0 skips them.
  int retrieval_k = 0;
  bool judge = false;
};

struct SampleRow {
  std::string sample_id;
  bool correct = false;
  double str_em = 0.0;
  std::optional<bool> recall;
  std::optional<double> precision;
  std::optional<Verdict> verdict;

  bool operator==(const SampleRow&) const = default;
};

struct Aggregates {
  std::size_t samples = 0;
  std::optional<double> accuracy;
  std::optional<double> str_em;
  std::optional<double> mean_recall;
  std::optional<double> mean_precision;
  std::optional<double> judge_alignment_rate;
  std::size_t judge_unparseable = 0;
  std::size_t judge_missing = 0;

  bool operator==(const Aggregates&) const = default;
};

struct EvalReport {
  std::vector<SampleRow> rows;
  Aggregates aggregates;
  MetricSelection selection;
  nlohmann::ordered_json config;
};

/// Aggregates are a pure function of the rows. Unparseable verdicts are
/// excluded from the alignment denominator and counted separately.
Aggregates recompute_aggregates(const std::vector<SampleRow>& rows, const MetricSelection& selection);

/// Scores each dataset sample's generation. Throws ReferentialError when a
/// sample has no generation, or a retrieval when retrieval metrics are on.
EvalReport aggregate(const std::vector<inference::GenerationRecord>& generations,
                     const std::vector<corpus::QASample>& dataset,
                     const corpus::CorpusStore* corpus, const retrieval::RetrievalMap* retrievals,
                     const MetricSelection& selection,
                     const std::map<std::string, Verdict, std::less<>>& verdicts = {},
                     nlohmann::ordered_json config = nlohmann::ordered_json::object());

nlohmann::ordered_json to_json(const EvalReport& report);
std::string summary_text(const EvalReport& report);

}  // namespace rrag::evaluation
