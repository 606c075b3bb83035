#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpkit/core.hpp"
#include "dpkit/knowledge.hpp"

namespace dpkit::serializer {

struct UnsupportedMode : Error {
  using Error::Error;
};
struct MissingGold : Error {
  using Error::Error;
};
struct PromptTooLong : Error {
  using Error::Error;
};

enum class PromptMode { Task, Reasoning };

// Per-dataset wording used by the task templates. Only the fields a task
// reads matter: ED uses attribute_phrase, DI uses record_noun/target wording,
// SM/EM use pair_noun. Defaults give a generic but well-formed prompt.
struct PromptProfile {
  // ED: spelled-out attribute list for the task description ("age, workclass,
  // ..., and income"). Empty drops the sentence.
  std::string attribute_phrase;
  // DI: the kind of record ("restaurant", "product"); also used in the
  // question ("Based on the provided restaurant record, ...").
  std::string record_noun = "data";
  // DI: target attribute as written in the task description ("city") and in
  // the question ("City").
  std::string target_noun;
  std::string target_display;
  // DI: fields enumeration for "You may be provided with fields like ...".
  std::string field_hint;
  // DI/AVE: the output-format sentence ("Answer the name of the city.").
  std::string answer_instruction;
  // SM/EM: entity noun for pair headings and the question ("Product").
  std::string pair_noun = "Entity";
};

struct FewShotExample {
  std::string instance_block;
  std::string question;
  std::string output_format;
  std::string response;
};

// The six prompt sections plus optional few-shot and hint blocks. render()
// joins the non-empty sections with single newlines; an empty knowledge set
// contributes nothing (no blank line).
struct PromptBundle {
  std::string system;
  std::string task_description;
  std::vector<std::string> knowledge;
  std::string instance_block;
  std::string question;
  std::string output_format;
  std::string fewshot_block;  // rendered examples, empty when zero-shot
  std::string hint_block;     // hinted ground-truth prompts only
  PromptMode mode = PromptMode::Task;

  std::string render() const;
  // The shared group key for prefix batching: system + task description +
  // knowledge, rendered exactly as they appear at the head of render().
  std::string prefix() const;
};

// "[name1: "v1", name2: "v2"]"; Missing cells render as "nan".
std::string serialize_fields(
    std::span<const std::pair<std::string, AttributeValue>> attributes);

// "<heading>: [name1: "v1", ...]" over all attributes of the record.
std::string serialize_record(const RecordInstance& record, std::string_view heading);

// Reads back a serialize_fields()-shaped span into (name, rendered value)
// pairs. Values containing the exact sequence '", <name>: "' are ambiguous
// and parse at the earliest boundary; real tabular values do not hit this.
std::vector<std::pair<std::string, std::string>> parse_record(std::string_view serialized);

// Builds the full prompt for one ED/DI/SM/EM instance. Throws
// UnsupportedMode for CTA/AVE (those prompts are composed in pipelines).
// A non-empty fewshot list renders between knowledge and the live instance,
// and the prompt gains a trailing open "### Response:" line.
PromptBundle build_prompt(const LabeledInstance& labeled,
                          const std::vector<knowledge::Rule>& rules, PromptMode mode,
                          const std::vector<FewShotExample>& fewshot,
                          const PromptProfile& profile);

// Teacher-side prompt: reasoning mode plus extra (dataset-scope) rules and a
// trailing hint block naming the gold answer. Throws MissingGold when the
// instance has no gold label.
PromptBundle build_hinted_groundtruth_prompt(const LabeledInstance& labeled,
                                             const std::vector<knowledge::Rule>& rules,
                                             const std::vector<knowledge::Rule>& teacher_extra,
                                             const PromptProfile& profile);

// "### Instruction:"/"### Response:" blocks for the given examples, each
// response closed. Zero examples yield an empty string.
std::string render_fewshot_block(const std::vector<FewShotExample>& examples);

// Hard length guard; throws PromptTooLong when render() exceeds max_chars
// (0 disables the check).
void ensure_max_length(const PromptBundle& bundle, std::size_t max_chars);

inline constexpr char kSystemMessage[] =
    "You are an AI assistant that follows instruction extremely well. User will give you a "
    "question. Your task is to answer as faithfully as you can.";
inline constexpr char kReasoningSuffix[] =
    " While answering, provide detailed explanation and justify your answer.";
inline constexpr char kBinaryOutputFormat[] = "Choose your answer from: [Yes, No]";
inline constexpr char kBinaryReasoningOutputFormat[] =
    "After your reasoning, finish your response in a separate line with and ONLY with your "
    "final answer. Choose your final answer from [Yes, No].";
inline constexpr char kValueReasoningPrefix[] =
    "After your reasoning, finish your response in a separate line with and ONLY with your "
    "final answer. ";
inline constexpr char kHintPreamble[] =
    "You can use the \"Hint\" below, but your response cannot contain any information from it.";

}  // namespace dpkit::serializer
