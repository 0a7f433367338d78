#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rrag/corpus.hpp"
#include "rrag/prompting.hpp"

namespace rrag::fixtures {

inline std::filesystem::path golden_dir() { return std::filesystem::path(RRAG_TEST_DATA_DIR) / "golden"; }

inline corpus::QASample carol_sample() {
  return {"carol", "Who was the director of Carol?", {{"Todd Haynes", "Todd Haynes Jr."}}, corpus::TaskTag::kPopQA};
}

inline std::vector<corpus::Document> carol_documents() {
  return {{"c1", "Carol (film)", "Carol is a 2015 romantic drama film directed by Todd Haynes."},
          {"c2", "Patricia Highsmith", "Highsmith wrote the novel The Price of Salt in 1952."}};
}

inline prompting::Demonstration salt_demo() {
  return {"Who wrote The Price of Salt?",
          "Document [2] states that Highsmith wrote the novel, so the answer is Patricia Highsmith."};
}

inline const char* kTishemQuestion = "In what city was Catherine Tishem born?";
inline const char* kTishemAnswer = "Norwich, England";
inline const char* kTishemRationale =
    "The documents that are useful to answer the question are: Documents 4 and 5. Document 4 states that "
    "Catherine Tishem was from Breda, and her husband Wouter Gruter co-signed the Compromise of Nobles in 1566, "
    "and they moved to the Dutch Calvinist exile community of Norwich. This implies that Catherine Tishem was not "
    "born in Norwich. Document 5 provides more information about Catherine Tishem's life, stating that she was an "
    "erudite woman from Antwerp who educated her son, Jan Gruter, while in exile in England. This implies that "
    "Catherine Tishem was born in Antwerp. The other documents do not provide any information about Catherine "
    "Tishem's birthplace, so they are not useful for answering this question. Based on the above information, "
    "the answer is Norwich.";

struct GoldenCase {
  std::string file;
  prompting::ChatPrompt prompt;
};

/// Every template rendered for its fixture, paired with its transcript.
inline std::vector<GoldenCase> golden_cases() {
  using namespace prompting;
  const auto sample = carol_sample();
  const auto docs = carol_documents();
  const auto instruction = builtin_instruction(corpus::TaskTag::kPopQA);
  const std::vector<Demonstration> demos{salt_demo()};
  return {
      {"rationale_with_both.txt", render_rationale_gen(sample, docs, RationaleVariant::kWithBoth, instruction)},
      {"rationale_no_answer.txt", render_rationale_gen(sample, docs, RationaleVariant::kNoAnswer, instruction)},
      {"rationale_no_docs.txt", render_rationale_gen(sample, {}, RationaleVariant::kNoDocs, instruction)},
      {"ralm.txt", render_ralm(sample.question, docs)},
      {"icl.txt", render_icl(sample.question, docs, demos)},
      {"ft.txt", render_ft(sample.question, docs)},
      {"judge.txt", render_judge(kTishemQuestion, kTishemAnswer, kTishemRationale, {false})},
      {"judge_verbatim.txt", render_judge(kTishemQuestion, kTishemAnswer, kTishemRationale, {true})},
  };
}

}  // namespace rrag::fixtures
