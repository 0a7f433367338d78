#include "rrag/prompting.hpp"

#include <algorithm>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "rrag/error.hpp"
#include "rrag/template_resources.hpp"

namespace rrag::prompting {

namespace resources {

std::string_view get(std::string_view name) {
  const auto& all_resources = all();
  auto it = std::find_if(all_resources.begin(), all_resources.end(),
                         [&](const TemplateResource& r) { return r.name == name; });
  if (it == all_resources.end()) throw std::out_of_range("no template named " + std::string(name));
  return it->text;
}

}  // namespace resources

namespace {

constexpr std::string_view kBeginOfText = "<|begin_of_text|>";
constexpr std::string_view kStartHeader = "<|start_header_id|>";
constexpr std::string_view kEndHeader = "<|end_header_id|>";
constexpr std::string_view kEndOfTurn = "<|eot_id|>";

bool is_marker_char(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }

ChatPrompt single_user(std::string content, TemplateTag tag) {
  return ChatPrompt{{Message{Role::kUser, std::move(content)}}, tag};
}

std::string documents_block(std::span<const corpus::Document> docs) {
  return docs.empty() ? std::string() : format_documents(docs) + "\n";
}

std::string json_string(std::string_view value) {
  return nlohmann::json(std::string(value)).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
}

}  // namespace

std::string_view to_string(Role role) { return role == Role::kUser ? "user" : "assistant"; }

std::string_view to_string(TemplateTag tag) {
  switch (tag) {
    case TemplateTag::kRationaleGen: return "rationale_gen";
    case TemplateTag::kRALM: return "ralm";
    case TemplateTag::kICL: return "icl";
    case TemplateTag::kFTInference: return "ft_inference";
    case TemplateTag::kJudge: return "judge";
  }
  return "unknown";
}

TaskInstruction builtin_instruction(corpus::TaskTag task) {
  using corpus::TaskTag;
  switch (task) {
    case TaskTag::kASQA:
      return {task, std::string(resources::get("instruction_asqa"))};
    case TaskTag::kPopQA:
      return {task, std::string(resources::get("instruction_popqa"))};
    case TaskTag::kTriviaQA:
    case TaskTag::kNQ:
    case TaskTag::kTwoWikiMultiHop:
      return {task, std::string(resources::get("instruction_compositional"))};
    case TaskTag::kCustom:
      break;
  }
  throw ArgumentError("custom tasks need an explicit task instruction");
}

TaskInstruction custom_instruction(std::string text) {
  if (text.empty()) throw ArgumentError("task instruction must not be empty");
  return {corpus::TaskTag::kCustom, std::move(text)};
}

std::string_view to_string(RationaleVariant variant) {
  switch (variant) {
    case RationaleVariant::kWithBoth: return "with-both";
    case RationaleVariant::kNoAnswer: return "no-answer";
    case RationaleVariant::kNoDocs: return "no-docs";
  }
  return "unknown";
}

RationaleVariant parse_rationale_variant(std::string_view text) {
  for (const auto v : {RationaleVariant::kWithBoth, RationaleVariant::kNoAnswer, RationaleVariant::kNoDocs}) {
    if (text == to_string(v)) return v;
  }
  throw ArgumentError("unknown rationale variant '" + std::string(text) +
                      "' (with-both, no-answer, no-docs)");
}

std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size() + 256);
  std::size_t i = 0;
  while (i < tmpl.size()) {
    if (tmpl[i] == '{') {
      std::size_t j = i + 1;
      while (j < tmpl.size() && is_marker_char(tmpl[j])) ++j;
      if (j > i + 1 && j < tmpl.size() && tmpl[j] == '}') {
        const std::string_view name = tmpl.substr(i + 1, j - i - 1);
        auto it = values.find(name);
        if (it == values.end()) {
          throw ArgumentError("template marker {" + std::string(name) + "} has no value");
        }
        out += it->second;
        i = j + 1;
        continue;
      }
    }
    out.push_back(tmpl[i]);
    ++i;
  }
  return out;
}

std::string format_documents(std::span<const corpus::Document> docs) {
  const auto tmpl = resources::get("document");
  std::string out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += fill(tmpl, {{"index", std::to_string(i + 1)}, {"title", docs[i].title}, {"body", docs[i].body}});
  }
  return out;
}

ChatPrompt render_rationale_gen(const corpus::QASample& sample,
                                std::span<const corpus::Document> docs,
                                RationaleVariant variant, const TaskInstruction& instruction) {
  if (instruction.text.empty()) throw ArgumentError("task instruction must not be empty");
  if (variant != RationaleVariant::kNoDocs && docs.empty()) {
    throw ArgumentError("rationale variant " + std::string(to_string(variant)) +
                        " needs retrieved documents for sample '" + sample.sample_id + "'");
  }
  std::string_view tmpl;
  switch (variant) {
    case RationaleVariant::kWithBoth: tmpl = resources::get("rationale_gen"); break;
    case RationaleVariant::kNoAnswer: tmpl = resources::get("rationale_gen_no_answer"); break;
    case RationaleVariant::kNoDocs: tmpl = resources::get("rationale_gen_no_docs"); break;
  }
  std::map<std::string, std::string, std::less<>> values{
      {"question", sample.question},
      {"instruction", instruction.text},
  };
  if (variant != RationaleVariant::kNoAnswer) values["answer"] = corpus::answer_text(sample);
  if (variant != RationaleVariant::kNoDocs) values["documents"] = format_documents(docs);
  return single_user(fill(tmpl, values), TemplateTag::kRationaleGen);
}

ChatPrompt render_ralm(std::string_view question, std::span<const corpus::Document> docs) {
  return single_user(fill(resources::get("ralm"), {{"documents_block", documents_block(docs)},
                                                   {"question", std::string(question)}}),
                     TemplateTag::kRALM);
}

ChatPrompt render_icl(std::string_view question, std::span<const corpus::Document> docs,
                      std::span<const Demonstration> demos) {
  std::string demonstrations;
  if (!demos.empty()) {
    demonstrations = std::string(resources::get("icl_demo_header")) + "\n";
    for (const auto& demo : demos) demonstrations += demo.question + "\n" + demo.response + "\n";
  }
  return single_user(fill(resources::get("icl"), {{"demonstrations", demonstrations},
                                                  {"documents_block", documents_block(docs)},
                                                  {"question", std::string(question)}}),
                     TemplateTag::kICL);
}

ChatPrompt render_ft(std::string_view question, std::span<const corpus::Document> docs) {
  ChatPrompt prompt = render_ralm(question, docs);
  prompt.tag = TemplateTag::kFTInference;
  return prompt;
}

ChatPrompt render_judge(std::string_view question, std::string_view gold_answer,
                        std::string_view rationale, const JudgeOptions& options) {
  if (question.empty() || gold_answer.empty() || rationale.empty()) {
    throw ArgumentError("judge prompt needs a question, a true answer and a rationale");
  }
  std::string content = fill(resources::get("judge"), {{"question_json", json_string(question)},
                                                       {"true_answer_json", json_string(gold_answer)},
                                                       {"rationale_json", json_string(rationale)}});
  if (!options.verbatim) content += resources::get("judge_verdict_suffix");
  return single_user(std::move(content), TemplateTag::kJudge);
}

std::string render_raw(const ChatPrompt& prompt) {
  std::string out(kBeginOfText);
  for (const auto& message : prompt.messages) {
    out += kStartHeader;
    out += to_string(message.role);
    out += kEndHeader;
    out += '\n';
    out += message.content;
    out += kEndOfTurn;
  }
  out += kStartHeader;
  out += "assistant";
  out += kEndHeader;
  return out;
}

void check_budget(const ChatPrompt& prompt, std::size_t max_chars) {
  if (max_chars == 0) return;
  const auto size = render_raw(prompt).size();
  if (size > max_chars) {
    throw ArgumentError("prompt of " + std::to_string(size) + " characters exceeds the budget of " +
                        std::to_string(max_chars));
  }
}

std::string dump_templates() {
  std::string out;
  for (const auto& resource : resources::all()) {
    out += "=== ";
    out += resource.name;
    out += " ===\n";
    out += resource.text;
    out += "\n\n";
  }
  return out;
}

}  // namespace rrag::prompting
