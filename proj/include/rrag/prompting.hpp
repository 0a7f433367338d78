#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rrag/corpus.hpp"

namespace rrag::prompting {

enum class Role { kUser, kAssistant };

std::string_view to_string(Role role);

struct Message {
  Role role = Role::kUser;
  std::string content;

  bool operator==(const Message&) const = default;
};

enum class TemplateTag { kRationaleGen, kRALM, kICL, kFTInference, kJudge };

std::string_view to_string(TemplateTag tag);

struct ChatPrompt {
  std::vector<Message> messages;
  TemplateTag tag = TemplateTag::kRALM;

  bool operator==(const ChatPrompt&) const = default;
};

/// Task-specific instruction appended to rationale generation prompts.
struct TaskInstruction {
  corpus::TaskTag task = corpus::TaskTag::kCustom;
  std::string text;
};

/// Built-in instruction for the five benchmark tasks. Custom tasks have none
/// and throw ArgumentError; build them with custom_instruction().
TaskInstruction builtin_instruction(corpus::TaskTag task);
TaskInstruction custom_instruction(std::string text);

enum class RationaleVariant { kWithBoth, kNoAnswer, kNoDocs };

std::string_view to_string(RationaleVariant variant);
RationaleVariant parse_rationale_variant(std::string_view text);

/// `Document [i] (Title: t): body` per document, i from 1, newline-joined.
std::string format_documents(std::span<const corpus::Document> docs);

/// Fills `{name}` markers from the map in one pass; substituted values are
/// not rescanned. Throws ArgumentError for a marker with no value.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

ChatPrompt render_rationale_gen(const corpus::QASample& sample,
                                std::span<const corpus::Document> docs,
                                RationaleVariant variant, const TaskInstruction& instruction);

ChatPrompt render_ralm(std::string_view question, std::span<const corpus::Document> docs);

struct Demonstration {
  std::string question;
  std::string response;  // plain answer or rationale

  bool operator==(const Demonstration&) const = default;
};

/// Demonstrations contribute their question and response only, never their
/// documents.
ChatPrompt render_icl(std::string_view question, std::span<const corpus::Document> docs,
                      std::span<const Demonstration> demos);

/// Same body as render_ralm; only the tag differs.
ChatPrompt render_ft(std::string_view question, std::span<const corpus::Document> docs);

struct JudgeOptions {
  /// Omit the machine-parseable verdict request.
  bool verbatim = false;
};

ChatPrompt render_judge(std::string_view question, std::string_view gold_answer,
                        std::string_view rationale, const JudgeOptions& options = {});

/// Llama-3 chat-token form, ending with the assistant header.
std::string render_raw(const ChatPrompt& prompt);

/// Throws ArgumentError when the raw form exceeds max_chars (0 disables).
void check_budget(const ChatPrompt& prompt, std::size_t max_chars);

/// Every canonical template, labelled, for auditing.
std::string dump_templates();

}  // namespace rrag::prompting
