#include <algorithm>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "prompt_fixtures.hpp"
#include "rrag/error.hpp"
#include "rrag/evaluation.hpp"
#include "synthetic.hpp"
#include "test_util.hpp"

using namespace rrag;
using namespace rrag::evaluation;

namespace {

inference::GenerationRecord gen(std::string id, std::string output) {
  inference::GenerationRecord r;
  r.sample_id = std::move(id);
  r.output = std::move(output);
  r.model = "m";
  return r;
}

std::vector<corpus::QASample> three_samples() {
  return {{"a", "Qa?", {{"Paris"}}, corpus::TaskTag::kPopQA},
          {"b", "Qb?", {{"Berlin"}, {"Bonn"}}, corpus::TaskTag::kASQA},
          {"c", "Qc?", {{"Rome", "Roma"}}, corpus::TaskTag::kPopQA}};
}

}  // namespace

TEST(ParseVerdict, SuffixLine) {
  EXPECT_EQ(parse_verdict("The rationale agrees.\nVERDICT: ALIGNED", false), Verdict::kAligned);
  EXPECT_EQ(parse_verdict("Differs.\n**Verdict: not aligned**", false), Verdict::kNotAligned);
  EXPECT_EQ(parse_verdict("verdict: NOT_ALIGNED\n", false), Verdict::kNotAligned);
  EXPECT_EQ(parse_verdict("VERDICT: ALIGNED\nVERDICT: ALIGNED", false), Verdict::kAligned);
  EXPECT_EQ(parse_verdict("VERDICT: ALIGNED\nVERDICT: NOT_ALIGNED", false), Verdict::kUnparseable);
  EXPECT_EQ(parse_verdict("VERDICT: MAYBE", false), Verdict::kUnparseable);
  EXPECT_EQ(parse_verdict("It aligns with the true answer.", false), Verdict::kUnparseable);
  EXPECT_EQ(parse_verdict("", false), Verdict::kUnparseable);
}

TEST(ParseVerdict, VerbatimConclusion) {
  const auto reply = fixtures::read_file(fixtures::golden_dir() / "judge_reply_verbatim.txt");
  EXPECT_EQ(parse_verdict(reply, true), Verdict::kNotAligned);
  EXPECT_EQ(parse_verdict(reply, false), Verdict::kUnparseable);
  EXPECT_EQ(parse_verdict("Both say Paris. Therefore, the predicted answer aligns with the true answer.", true),
            Verdict::kAligned);
  EXPECT_EQ(parse_verdict("It is misaligned.", true), Verdict::kNotAligned);
  EXPECT_EQ(parse_verdict("Hard to say.", true), Verdict::kUnparseable);
  // An explicit verdict line still wins in verbatim mode.
  EXPECT_EQ(parse_verdict("It aligns with the answer.\nVERDICT: NOT_ALIGNED", true), Verdict::kNotAligned);
}

TEST(ParseVerdict, NamesRoundTrip) {
  for (const auto v : {Verdict::kAligned, Verdict::kNotAligned, Verdict::kUnparseable}) {
    EXPECT_EQ(parse_verdict_name(to_string(v)), v);
  }
}

TEST(Judge, ScriptedGenerationsAndFiles) {
  const auto samples = three_samples();
  std::map<std::string, lm::ScriptedReply> replies{
      {"a", {"VERDICT: ALIGNED", false}}, {"b", {"nonsense", false}}, {"c", {"", true}}};
  lm::Gateway gateway(lm::MockModel::scripted(replies));
  const auto run = judge_generations(gateway, samples, {gen("a", "x"), gen("b", "y"), gen("c", "z")}, false, 2);
  ASSERT_EQ(run.records.size(), 2u);
  EXPECT_EQ(run.records[0].verdict, Verdict::kAligned);
  EXPECT_EQ(run.records[1].verdict, Verdict::kUnparseable);
  EXPECT_EQ(run.records[1].reply, "nonsense");
  ASSERT_EQ(run.failures.size(), 1u);
  EXPECT_EQ(run.failures[0].sample_id, "c");

  fixtures::TempDir dir;
  write_judgments(run.records, dir / "j.jsonl");
  EXPECT_EQ(read_judgments(dir / "j.jsonl"), run.records);

  EXPECT_THROW(judge_generations(gateway, samples, {gen("zz", "x")}, false, 1), ReferentialError);
}

TEST(Judge, PromptCarriesGoldAnswer) {
  std::string seen;
  lm::Gateway gateway(std::make_shared<lm::CallbackModel>("cb", [&](const lm::CompletionRequest& r) {
    seen = r.prompt.messages[0].content;
    return std::string("VERDICT: NOT_ALIGNED");
  }));
  EXPECT_EQ(judge(gateway, fixtures::kTishemQuestion, fixtures::kTishemAnswer, fixtures::kTishemRationale),
            Verdict::kNotAligned);
  EXPECT_EQ(seen, prompting::render_judge(fixtures::kTishemQuestion, fixtures::kTishemAnswer,
                                          fixtures::kTishemRationale)
                      .messages[0]
                      .content);
}

TEST(Aggregate, MetricsMatchOracles) {
  const auto samples = three_samples();
  const std::vector gens{gen("a", "It is paris."), gen("b", "Berlin only"), gen("c", "No idea")};
  std::map<std::string, Verdict, std::less<>> verdicts{{"a", Verdict::kAligned}, {"b", Verdict::kUnparseable}};
  MetricSelection sel;
  sel.judge = true;
  const auto report = aggregate(gens, samples, nullptr, nullptr, sel, verdicts);
  ASSERT_EQ(report.rows.size(), 3u);
  double acc = 0;
  double em = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(report.rows[i].correct, oracle::accuracy(gens[i].output, samples[i].answer_groups));
    EXPECT_DOUBLE_EQ(report.rows[i].str_em, oracle::str_em(gens[i].output, samples[i].answer_groups));
    acc += oracle::accuracy(gens[i].output, samples[i].answer_groups) ? 1 : 0;
    em += oracle::str_em(gens[i].output, samples[i].answer_groups);
  }
  EXPECT_DOUBLE_EQ(*report.aggregates.accuracy, acc / 3);
  EXPECT_DOUBLE_EQ(*report.aggregates.str_em, em / 3);
  EXPECT_DOUBLE_EQ(*report.aggregates.judge_alignment_rate, 1.0);
  EXPECT_EQ(report.aggregates.judge_unparseable, 1u);
  EXPECT_EQ(report.aggregates.judge_missing, 1u);
  EXPECT_EQ(recompute_aggregates(report.rows, sel), report.aggregates);
}

TEST(Aggregate, Errors) {
  const auto samples = three_samples();
  MetricSelection sel;
  EXPECT_THROW(aggregate({gen("a", "x"), gen("b", "y")}, samples, nullptr, nullptr, sel), ReferentialError);
  EXPECT_THROW(aggregate({gen("a", "x"), gen("a", "x"), gen("b", "y"), gen("c", "z")}, samples, nullptr, nullptr, sel),
               IntegrityError);
  sel.retrieval_k = 3;
  EXPECT_THROW(aggregate({gen("a", "x"), gen("b", "y"), gen("c", "z")}, samples, nullptr, nullptr, sel),
               ArgumentError);
}

TEST(Aggregate, RetrievalStatistics) {
  const auto data = fixtures::make_synthetic({.samples = 10});
  const auto store = data.store();
  const auto retrievals = fixtures::retrieve_all(store, data.samples, 5);
  std::vector<inference::GenerationRecord> gens;
  for (const auto& s : data.samples) gens.push_back(gen(s.sample_id, "?"));
  MetricSelection sel;
  sel.retrieval_k = 4;
  const auto report = aggregate(gens, data.samples, &store, &retrievals, sel);
  double recall = 0;
  double precision = 0;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const auto& s = data.samples[i];
    std::vector<std::string> bodies;
    for (const auto& d : retrieval::top_documents(store, retrievals.at(s.sample_id), 5)) bodies.push_back(d.body);
    const auto relevant = oracle::relevance(bodies, s.answer_groups);
    EXPECT_EQ(*report.rows[i].recall, oracle::recall(relevant, 4));
    recall += oracle::recall(relevant, 4) ? 1 : 0;
    precision += oracle::precision(relevant, 4);
  }
  EXPECT_DOUBLE_EQ(*report.aggregates.mean_recall, recall / 10);
  EXPECT_DOUBLE_EQ(*report.aggregates.mean_precision, precision / 10);
  sel.retrieval_k = 6;
  EXPECT_THROW(aggregate(gens, data.samples, &store, &retrievals, sel), ArgumentError);
}

TEST(Report, JsonShape) {
  const auto samples = three_samples();
  const std::vector gens{gen("a", "Paris"), gen("b", "Bonn"), gen("c", "Roma")};
  MetricSelection sel;
  sel.str_em = false;
  const auto json = to_json(aggregate(gens, samples, nullptr, nullptr, sel, {}, {{"mode", "ralm"}}));
  EXPECT_EQ(json["config"]["mode"], "ralm");
  const auto& agg = json["aggregates"];
  EXPECT_EQ(agg["samples"], 3);
  EXPECT_EQ(agg["accuracy"], 1.0);
  EXPECT_FALSE(agg.contains("str_em"));
  EXPECT_FALSE(agg.contains("judge_alignment_rate"));
  EXPECT_FALSE(agg.contains("mean_recall"));
  EXPECT_TRUE(agg["citation_precision"].is_null());
  EXPECT_TRUE(agg["citation_recall"].is_null());
  ASSERT_EQ(json["per_sample"].size(), 3u);
  EXPECT_FALSE(json["per_sample"][0].contains("verdict"));
  EXPECT_NE(summary_text(aggregate(gens, samples, nullptr, nullptr, {})).find("100.00%"), std::string::npos);
}

// Shuffling the generation file never changes the report.
TEST(ReportProperty, IndependentOfGenerationOrder) {
  const auto data = fixtures::make_synthetic({.samples = 25});
  fixtures::Gen g(99);
  std::vector<inference::GenerationRecord> gens;
  for (const auto& s : data.samples) {
    gens.push_back(gen(s.sample_id, g.chance(0.5) ? "so " + s.answer_groups[0][static_cast<std::size_t>(g.integer(0, 1))] : g.messy_text(20)));
  }
  const auto base = to_json(aggregate(gens, data.samples, nullptr, nullptr, {})).dump();
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(gens.begin(), gens.end(), g.engine());
    EXPECT_EQ(to_json(aggregate(gens, data.samples, nullptr, nullptr, {})).dump(), base);
  }
}
