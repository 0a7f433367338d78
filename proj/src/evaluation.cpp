#include "rrag/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "rrag/error.hpp"
#include "rrag/jsonl.hpp"

namespace rrag::evaluation {
namespace {

std::string trim(std::string_view s, std::string_view chars = " \t\r\n") {
  const auto begin = s.find_first_not_of(chars);
  if (begin == std::string_view::npos) return {};
  const auto end = s.find_last_not_of(chars);
  return std::string(s.substr(begin, end - begin + 1));
}

std::string upper(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::toupper(c); });
  return s;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

// Verdicts from `VERDICT: ...` lines, decorations such as ** or ` stripped.
std::vector<Verdict> verdict_lines(std::string_view reply) {
  std::vector<Verdict> found;
  std::istringstream lines{std::string(reply)};
  std::string line;
  while (std::getline(lines, line)) {
    const std::string cleaned = trim(line, " \t\r*`#>");
    if (cleaned.size() < 8 || upper(cleaned.substr(0, 8)) != "VERDICT:") continue;
    std::string value = upper(trim(cleaned.substr(8), " \t*`.\"'"));
    std::replace(value.begin(), value.end(), ' ', '_');
    if (value == "ALIGNED") {
      found.push_back(Verdict::kAligned);
    } else if (value == "NOT_ALIGNED") {
      found.push_back(Verdict::kNotAligned);
    } else {
      found.push_back(Verdict::kUnparseable);
    }
  }
  return found;
}

std::string last_sentence(std::string_view reply) {
  const std::string text = trim(reply);
  std::size_t end = text.size();
  while (end > 0 && std::string_view(".!? \n\t").find(text[end - 1]) != std::string_view::npos) --end;
  std::size_t start = end;
  while (start > 0) {
    const char c = text[start - 1];
    if ((c == '.' || c == '!' || c == '?' || c == '\n') &&
        (start == end || std::isspace(static_cast<unsigned char>(text[start])))) {
      break;
    }
    --start;
  }
  return text.substr(start, end - start);
}

Verdict read_conclusion(std::string_view reply) {
  const std::string sentence = lower(last_sentence(reply));
  static constexpr std::string_view kNegative[] = {"does not align", "do not align", "doesn't align",
                                                   "not aligned", "misaligned", "does not match"};
  static constexpr std::string_view kPositive[] = {"aligns with", "is aligned", "align with",
                                                   "matches the true answer"};
  for (const auto p : kNegative) {
    if (sentence.find(p) != std::string::npos) return Verdict::kNotAligned;
  }
  for (const auto p : kPositive) {
    if (sentence.find(p) != std::string::npos) return Verdict::kAligned;
  }
  return Verdict::kUnparseable;
}

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::string_view to_string(Verdict verdict) {
  switch (verdict) {
    case Verdict::kAligned: return "aligned";
    case Verdict::kNotAligned: return "not_aligned";
    case Verdict::kUnparseable: return "unparseable";
  }
  return "unparseable";
}

Verdict parse_verdict_name(std::string_view text) {
  for (const auto v : {Verdict::kAligned, Verdict::kNotAligned, Verdict::kUnparseable}) {
    if (text == to_string(v)) return v;
  }
  throw ArgumentError("unknown verdict '" + std::string(text) + "'");
}

Verdict parse_verdict(std::string_view reply, bool verbatim) {
  const auto found = verdict_lines(reply);
  if (!found.empty()) {
    const std::set<Verdict> distinct(found.begin(), found.end());
    return distinct.size() == 1 ? found.front() : Verdict::kUnparseable;
  }
  return verbatim ? read_conclusion(reply) : Verdict::kUnparseable;
}

Verdict judge(const lm::Gateway& gateway, std::string_view question, std::string_view gold_answer,
              std::string_view rationale, bool verbatim, std::string_view sample_id) {
  lm::CompletionRequest request{
      prompting::render_judge(question, gold_answer, rationale, {verbatim}), {0.0, 512},
      std::string(sample_id)};
  return parse_verdict(gateway.complete(request), verbatim);
}

JudgeRun judge_generations(const lm::Gateway& gateway, const std::vector<corpus::QASample>& dataset,
                           const std::vector<inference::GenerationRecord>& generations,
                           bool verbatim, int parallelism, const lm::DecodeParams& decode) {
  std::map<std::string_view, const corpus::QASample*> samples;
  for (const auto& s : dataset) samples.emplace(s.sample_id, &s);
  JudgeRun run;
  std::vector<lm::CompletionRequest> requests;
  std::vector<std::string> ids;
  for (const auto& g : generations) {
    auto it = samples.find(g.sample_id);
    if (it == samples.end()) throw ReferentialError("generation for unknown sample '" + g.sample_id + "'");
    if (g.output.empty()) {
      run.failures.push_back({g.sample_id, "empty generation"});
      continue;
    }
    requests.push_back({prompting::render_judge(it->second->question, corpus::answer_text(*it->second),
                                                g.output, {verbatim}),
                        decode, g.sample_id});
    ids.push_back(g.sample_id);
  }
  const auto completions = gateway.batch_complete(requests, parallelism);
  for (std::size_t i = 0; i < completions.size(); ++i) {
    if (!completions[i].ok()) {
      run.failures.push_back({ids[i], completions[i].error});
      continue;
    }
    run.records.push_back({ids[i], parse_verdict(*completions[i].text, verbatim), *completions[i].text});
  }
  return run;
}

void write_judgments(const std::vector<JudgeRecord>& records, const std::filesystem::path& path) {
  jsonl::Writer writer(path);
  for (const auto& r : records) {
    writer.write({{"sample_id", r.sample_id}, {"verdict", to_string(r.verdict)}, {"reply", r.reply}});
  }
}

std::vector<JudgeRecord> read_judgments(const std::filesystem::path& path) {
  std::vector<JudgeRecord> out;
  jsonl::for_each(path, [&](const nlohmann::json& record, std::size_t line) {
    out.push_back({jsonl::require_string(record, "sample_id", path, line),
                   parse_verdict_name(jsonl::require_string(record, "verdict", path, line)),
                   record.value("reply", "")});
  });
  return out;
}

Aggregates recompute_aggregates(const std::vector<SampleRow>& rows, const MetricSelection& selection) {
  Aggregates a;
  a.samples = rows.size();
  if (rows.empty()) return a;
  const auto n = static_cast<double>(rows.size());
  if (selection.accuracy) {
    a.accuracy = static_cast<double>(std::count_if(rows.begin(), rows.end(),
                                                   [](const SampleRow& r) { return r.correct; })) / n;
  }
  if (selection.str_em) {
    double sum = 0.0;
    for (const auto& r : rows) sum += r.str_em;
    a.str_em = sum / n;
  }
  if (selection.retrieval_k > 0) {
    std::size_t recall_rows = 0, recall_hits = 0, precision_rows = 0;
    double precision_sum = 0.0;
    for (const auto& r : rows) {
      if (r.recall) {
        ++recall_rows;
        recall_hits += *r.recall ? 1 : 0;
      }
      if (r.precision) {
        ++precision_rows;
        precision_sum += *r.precision;
      }
    }
    if (recall_rows > 0) a.mean_recall = static_cast<double>(recall_hits) / static_cast<double>(recall_rows);
    if (precision_rows > 0) a.mean_precision = precision_sum / static_cast<double>(precision_rows);
  }
  if (selection.judge) {
    std::size_t aligned = 0, not_aligned = 0;
    for (const auto& r : rows) {
      if (!r.verdict) {
        ++a.judge_missing;
      } else if (*r.verdict == Verdict::kAligned) {
        ++aligned;
      } else if (*r.verdict == Verdict::kNotAligned) {
        ++not_aligned;
      } else {
        ++a.judge_unparseable;
      }
    }
    if (aligned + not_aligned > 0) {
      a.judge_alignment_rate = static_cast<double>(aligned) / static_cast<double>(aligned + not_aligned);
    }
  }
  return a;
}

EvalReport aggregate(const std::vector<inference::GenerationRecord>& generations,
                     const std::vector<corpus::QASample>& dataset,
                     const corpus::CorpusStore* corpus, const retrieval::RetrievalMap* retrievals,
                     const MetricSelection& selection,
                     const std::map<std::string, Verdict, std::less<>>& verdicts,
                     nlohmann::ordered_json config) {
  if (selection.retrieval_k > 0 && (corpus == nullptr || retrievals == nullptr)) {
    throw ArgumentError("retrieval metrics need the corpus and the retrievals");
  }
  std::map<std::string_view, const inference::GenerationRecord*> by_id;
  for (const auto& g : generations) {
    if (!by_id.emplace(g.sample_id, &g).second) {
      throw IntegrityError("two generations for sample '" + g.sample_id + "'");
    }
  }
  EvalReport report;
  report.selection = selection;
  report.config = std::move(config);
  for (const auto& sample : dataset) {
    auto it = by_id.find(sample.sample_id);
    if (it == by_id.end()) throw ReferentialError("no generation for sample '" + sample.sample_id + "'");
    const AnswerMatcher matcher(sample.answer_groups);
    SampleRow row;
    row.sample_id = sample.sample_id;
    const auto& output = it->second->output;
    const auto hits = matcher.groups_hit(output);
    row.correct = hits > 0;
    row.str_em = static_cast<double>(hits) / static_cast<double>(matcher.group_count());
    if (selection.retrieval_k > 0) {
      auto r = retrievals->find(sample.sample_id);
      if (r == retrievals->end()) throw ReferentialError("no retrieval for sample '" + sample.sample_id + "'");
      row.recall = retrieval::recall_at_k(*corpus, r->second, sample, selection.retrieval_k);
      row.precision = retrieval::precision_at_k(*corpus, r->second, sample, selection.retrieval_k);
    }
    if (selection.judge) {
      if (auto v = verdicts.find(sample.sample_id); v != verdicts.end()) row.verdict = v->second;
    }
    report.rows.push_back(std::move(row));
  }
  report.aggregates = recompute_aggregates(report.rows, selection);
  return report;
}

nlohmann::ordered_json to_json(const EvalReport& report) {
  const auto& s = report.selection;
  const auto& a = report.aggregates;
  nlohmann::ordered_json aggregates{{"samples", a.samples}};
  if (s.accuracy) aggregates["accuracy"] = optional_number(a.accuracy);
  if (s.str_em) aggregates["str_em"] = optional_number(a.str_em);
  if (s.retrieval_k > 0) {
    aggregates["retrieval_k"] = s.retrieval_k;
    aggregates["mean_recall"] = optional_number(a.mean_recall);
    aggregates["mean_precision"] = optional_number(a.mean_precision);
  }
  if (s.judge) {
    aggregates["judge_alignment_rate"] = optional_number(a.judge_alignment_rate);
    aggregates["judge_unparseable"] = a.judge_unparseable;
    aggregates["judge_missing"] = a.judge_missing;
  }
  // Reserved: citation metrics need an external entailment model.
  aggregates["citation_precision"] = nullptr;
  aggregates["citation_recall"] = nullptr;

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : report.rows) {
    nlohmann::ordered_json row{{"sample_id", r.sample_id}};
    if (s.accuracy) row["correct"] = r.correct;
    if (s.str_em) row["str_em"] = r.str_em;
    if (r.recall) row["recall"] = *r.recall;
    if (r.precision) row["precision"] = *r.precision;
    if (s.judge) {
      row["verdict"] = r.verdict ? nlohmann::ordered_json(to_string(*r.verdict)) : nlohmann::ordered_json(nullptr);
    }
    rows.push_back(std::move(row));
  }
  return {{"config", report.config}, {"aggregates", std::move(aggregates)}, {"per_sample", std::move(rows)}};
}

std::string summary_text(const EvalReport& report) {
  const auto& a = report.aggregates;
  auto pct = [](const std::optional<double>& v) {
    return v ? fmt::format("{:.2f}%", *v * 100.0) : std::string("n/a");
  };
  std::string out = fmt::format("samples: {}\n", a.samples);
  if (report.selection.accuracy) out += fmt::format("accuracy: {}\n", pct(a.accuracy));
  if (report.selection.str_em) out += fmt::format("str-em: {}\n", pct(a.str_em));
  if (report.selection.retrieval_k > 0) {
    out += fmt::format("recall@{}: {}\n", report.selection.retrieval_k, pct(a.mean_recall));
    out += fmt::format("precision@{}: {}\n", report.selection.retrieval_k, pct(a.mean_precision));
  }
  if (report.selection.judge) {
    out += fmt::format("judge alignment: {} (unparseable {}, missing {})\n", pct(a.judge_alignment_rate),
                       a.judge_unparseable, a.judge_missing);
  }
  return out;
}

}  // namespace rrag::evaluation
