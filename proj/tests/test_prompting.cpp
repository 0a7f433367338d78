#include <gtest/gtest.h>

#include "prompt_fixtures.hpp"
#include "rrag/error.hpp"
#include "rrag/prompting.hpp"
#include "rrag/template_resources.hpp"
#include "test_util.hpp"

using namespace rrag;
using namespace rrag::prompting;

TEST(Golden, RawTranscriptsAreByteIdentical) {
  for (const auto& c : fixtures::golden_cases()) {
    const auto expected = fixtures::read_file(fixtures::golden_dir() / c.file);
    ASSERT_FALSE(expected.empty()) << c.file;
    EXPECT_EQ(render_raw(c.prompt), expected) << c.file;
  }
}

TEST(Golden, TagsFollowTemplates) {
  const auto cases = fixtures::golden_cases();
  EXPECT_EQ(cases[0].prompt.tag, TemplateTag::kRationaleGen);
  EXPECT_EQ(cases[3].prompt.tag, TemplateTag::kRALM);
  EXPECT_EQ(cases[4].prompt.tag, TemplateTag::kICL);
  EXPECT_EQ(cases[5].prompt.tag, TemplateTag::kFTInference);
  EXPECT_EQ(cases[6].prompt.tag, TemplateTag::kJudge);
}

TEST(Fill, SinglePassSubstitution) {
  EXPECT_EQ(fill("{a} and {b}", {{"a", "{b}"}, {"b", "x"}}), "{b} and x");
}

TEST(Fill, NonMarkerBracesAreLiteral) {
  EXPECT_EQ(fill("{\"k\": {v}} {Up} {} {a-b}", {{"v", "1"}}), "{\"k\": 1} {Up} {} {a-b}");
  EXPECT_EQ(fill("{unclosed", {}), "{unclosed");
}

TEST(Fill, MissingValueIsArgumentError) { EXPECT_THROW(fill("{nope}", {}), ArgumentError); }

TEST(FormatDocuments, NumbersFromOne) {
  const std::vector<corpus::Document> docs{{"a", "T1", "B1"}, {"b", "", "B2"}};
  EXPECT_EQ(format_documents(docs), "Document [1] (Title: T1): B1\nDocument [2] (Title: ): B2");
  EXPECT_EQ(format_documents({}), "");
}

TEST(RationaleGen, DocumentVariantsNeedDocuments) {
  const auto sample = fixtures::carol_sample();
  const auto instruction = builtin_instruction(corpus::TaskTag::kPopQA);
  EXPECT_THROW(render_rationale_gen(sample, {}, RationaleVariant::kWithBoth, instruction), ArgumentError);
  EXPECT_THROW(render_rationale_gen(sample, {}, RationaleVariant::kNoAnswer, instruction), ArgumentError);
  const auto docs = fixtures::carol_documents();
  const auto no_docs = render_rationale_gen(sample, docs, RationaleVariant::kNoDocs, instruction);
  EXPECT_EQ(no_docs.messages.front().content.find("Document ["), std::string::npos);
}

TEST(RationaleGen, NoAnswerVariantHidesTheAnswer) {
  const auto p = render_rationale_gen(fixtures::carol_sample(), fixtures::carol_documents(),
                                      RationaleVariant::kNoAnswer, builtin_instruction(corpus::TaskTag::kPopQA));
  EXPECT_EQ(p.messages.front().content.find("answer: Todd"), std::string::npos);
}

TEST(RationaleGen, MultipleGroupsListFirstAliases) {
  const corpus::QASample s{"a", "Q?", {{"x", "ex"}, {"y"}}, corpus::TaskTag::kASQA};
  const auto p = render_rationale_gen(s, {}, RationaleVariant::kNoDocs, builtin_instruction(corpus::TaskTag::kASQA));
  EXPECT_NE(p.messages.front().content.find("the answer: x, y."), std::string::npos);
}

TEST(Instructions, BuiltinPerTaskAndCustom) {
  EXPECT_EQ(builtin_instruction(corpus::TaskTag::kTriviaQA).text, builtin_instruction(corpus::TaskTag::kNQ).text);
  EXPECT_EQ(builtin_instruction(corpus::TaskTag::kNQ).text,
            builtin_instruction(corpus::TaskTag::kTwoWikiMultiHop).text);
  EXPECT_NE(builtin_instruction(corpus::TaskTag::kASQA).text, builtin_instruction(corpus::TaskTag::kPopQA).text);
  EXPECT_THROW(builtin_instruction(corpus::TaskTag::kCustom), ArgumentError);
  EXPECT_THROW(custom_instruction(""), ArgumentError);
  const auto p = render_rationale_gen(fixtures::carol_sample(), {}, RationaleVariant::kNoDocs,
                                      custom_instruction("Answer briefly."));
  EXPECT_TRUE(p.messages.front().content.ends_with("\n\nAnswer briefly."));
}

TEST(Ralm, WithoutDocumentsOnlyAsksTheQuestion) {
  EXPECT_EQ(render_ralm("Q?", {}).messages.front().content,
            "Based on your knowledge and the provided information, answer the question: Q?");
}

TEST(Icl, WithoutDemonstrationsOmitsTheExamplesHeader) {
  const auto p = render_icl("Q?", fixtures::carol_documents(), {});
  EXPECT_EQ(p.messages.front().content.find("Below are some examples"), std::string::npos);
  const std::vector<Demonstration> two{{"q1", "r1"}, {"q2", "r2"}};
  const auto content = render_icl("Q?", {}, two).messages.front().content;
  EXPECT_NE(content.find("question:\nq1\nr1\nq2\nr2\nBased on"), std::string::npos);
}

TEST(Ft, SameTextAsRalm) {
  const auto docs = fixtures::carol_documents();
  EXPECT_EQ(render_ft("Q?", docs).messages, render_ralm("Q?", docs).messages);
}

TEST(Judge, EscapesJsonValues) {
  const auto p = render_judge("a \"quoted\"\nq", "x\\y", "r", {true});
  EXPECT_NE(p.messages.front().content.find("{\"question\": \"a \\\"quoted\\\"\\nq\",\n\"true_answer\": \"x\\\\y\""),
            std::string::npos);
  EXPECT_THROW(render_judge("", "a", "r", {}), ArgumentError);
  EXPECT_THROW(render_judge("q", "", "r", {}), ArgumentError);
  EXPECT_THROW(render_judge("q", "a", "", {}), ArgumentError);
}

TEST(Raw, MultiTurnLayout) {
  const ChatPrompt p{{{Role::kUser, "hi"}, {Role::kAssistant, "yo"}}, TemplateTag::kFTInference};
  EXPECT_EQ(render_raw(p),
            "<|begin_of_text|><|start_header_id|>user<|end_header_id|>\nhi<|eot_id|>"
            "<|start_header_id|>assistant<|end_header_id|>\nyo<|eot_id|>"
            "<|start_header_id|>assistant<|end_header_id|>");
}

TEST(Budget, RejectsOversizedPrompts) {
  const auto p = render_ralm("Q?", fixtures::carol_documents());
  const auto size = render_raw(p).size();
  EXPECT_NO_THROW(check_budget(p, 0));
  EXPECT_NO_THROW(check_budget(p, size));
  EXPECT_THROW(check_budget(p, size - 1), ArgumentError);
}

TEST(Resources, DumpListsEveryTemplate) {
  const auto dump = dump_templates();
  for (const auto& r : resources::all()) EXPECT_NE(dump.find("=== " + std::string(r.name) + " ==="), std::string::npos);
  EXPECT_EQ(resources::all().size(), 14u);
  EXPECT_THROW(resources::get("missing"), std::out_of_range);
}

TEST(Resources, TemplateRationaleTextsVerbatim) {
  EXPECT_EQ(resources::get("rationale_template_positive"),
            "After reviewing the provided document, I found that only documents {documents} contain relevant "
            "information to answer the question. Based on my knowledge and the provided contents, the answer is: "
            "{answer}.");
  EXPECT_EQ(resources::get("rationale_template_negative"),
            "After reviewing the provided document, I found that none of them contain relevant information to "
            "answer the question. Based on my knowledge and the provided contents, the answer is: {answer}.");
}
