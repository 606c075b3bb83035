#include "dpkit/serializer.hpp"

#include "dpkit/util.hpp"

namespace dpkit::serializer {

std::string serialize_fields(
    std::span<const std::pair<std::string, AttributeValue>> attributes) {
  std::string out = "[";
  bool first = true;
  for (const auto& [name, value] : attributes) {
    if (!first) out += ", ";
    first = false;
    out += name;
    out += ": \"";
    out += value.rendered();
    out += '"';
  }
  out += ']';
  return out;
}

std::string serialize_record(const RecordInstance& record, std::string_view heading) {
  std::string out(heading);
  out += ": ";
  out += serialize_fields(record.attributes);
  return out;
}

std::vector<std::pair<std::string, std::string>> parse_record(std::string_view serialized) {
  std::vector<std::pair<std::string, std::string>> out;
  std::size_t open = serialized.find('[');
  std::size_t close = serialized.rfind(']');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open)
    throw Error("not a serialized record: missing brackets");
  std::string_view body = serialized.substr(open + 1, close - open - 1);

  std::size_t pos = 0;
  while (pos < body.size()) {
    std::size_t colon = body.find(": \"", pos);
    if (colon == std::string_view::npos) throw Error("malformed record field");
    std::string name(util::trim(body.substr(pos, colon - pos)));
    std::size_t vstart = colon + 3;
    // The value ends at a quote followed by ", <next name>: "" or at the
    // closing quote that ends the body.
    std::size_t vend = vstart;
    while (true) {
      std::size_t q = body.find('"', vend);
      if (q == std::string_view::npos) throw Error("unterminated record value");
      if (q + 1 == body.size()) {  // final field
        out.emplace_back(std::move(name), std::string(body.substr(vstart, q - vstart)));
        return out;
      }
      if (body.compare(q, 3, "\", ") == 0 &&
          body.find(": \"", q + 3) != std::string_view::npos) {
        out.emplace_back(std::move(name), std::string(body.substr(vstart, q - vstart)));
        pos = q + 3;
        break;
      }
      vend = q + 1;
    }
  }
  return out;
}

namespace {

std::string fields_range(const RecordInstance& rec, std::size_t begin, std::size_t end) {
  std::span<const std::pair<std::string, AttributeValue>> all(rec.attributes);
  return serialize_fields(all.subspan(begin, end - begin));
}

std::string ed_instance_block(const LabeledInstance& labeled) {
  const auto* target = labeled.instance.find(*labeled.target_attribute);
  std::string block = "Record ";
  block += serialize_fields(labeled.instance.attributes);
  block += "\nAttribute for Verification: [";
  block += *labeled.target_attribute;
  block += ": \"";
  block += target->rendered();
  block += "\"]";
  return block;
}

std::string di_instance_block(const LabeledInstance& labeled) {
  return serialize_record(labeled.instance, "Record") + ".";
}

std::string sm_instance_block(const LabeledInstance& labeled) {
  const RecordInstance& rec = labeled.instance;
  std::string block = "Attribute A is ";
  block += fields_range(rec, 0, rec.pair_split);
  block += ".\nAttribute B is ";
  block += fields_range(rec, rec.pair_split, rec.attributes.size());
  block += '.';
  return block;
}

std::string em_instance_block(const LabeledInstance& labeled, const PromptProfile& profile) {
  const RecordInstance& rec = labeled.instance;
  std::string block = profile.pair_noun + " A: ";
  block += fields_range(rec, 0, rec.pair_split);
  block += '\n';
  block += profile.pair_noun + " B: ";
  block += fields_range(rec, rec.pair_split, rec.attributes.size());
  return block;
}

std::string task_description(const LabeledInstance& labeled, const PromptProfile& profile) {
  switch (labeled.task) {
    case TaskKind::ED: {
      std::string desc =
          "Your task is to determine if there is an error in the value of a specific "
          "attribute within the whole record provided.";
      if (!profile.attribute_phrase.empty()) {
        desc += " The attributes may include " + profile.attribute_phrase + ".";
      }
      return desc;
    }
    case TaskKind::DI: {
      std::string target =
          profile.target_noun.empty() ? *labeled.target_attribute : profile.target_noun;
      std::string desc = "You are presented with a " + profile.record_noun +
                         " record that is missing a specific attribute: the " + target +
                         ". Your task is to deduce or infer the " + target + " of the " +
                         profile.record_noun +
                         " using the available information in the record.";
      if (!profile.field_hint.empty()) {
        desc += " You may be provided with fields like " + profile.field_hint +
                " to help you in the inference.";
      }
      return desc;
    }
    case TaskKind::SM:
      return "Your task is to determine if the two attributes (columns) are semantically "
             "equivalent in the context of merging two tables. Each attribute will be "
             "described by its name and a brief description. Your goal is to assess if they "
             "refer to the same information based on these names and descriptions provided.";
    case TaskKind::EM:
      return "You are tasked with determining whether two " + profile.pair_noun +
             "s listed below are the same based on the information provided. Carefully "
             "compare all the attributes before making your decision.";
    default:
      throw UnsupportedMode("no task description template for this task");
  }
}

std::string question(const LabeledInstance& labeled, const PromptProfile& profile) {
  switch (labeled.task) {
    case TaskKind::ED:
      return "Is there an error in the value of the \"" + *labeled.target_attribute +
             "\" attribute?";
    case TaskKind::DI: {
      std::string target = profile.target_display.empty() ? *labeled.target_attribute
                                                          : profile.target_display;
      return "Based on the provided " + profile.record_noun +
             " record, what would you infer is the value for the missing attribute \"" +
             target + "\"?";
    }
    case TaskKind::SM:
      return "Are Attribute A and Attribute B semantically equivalent?";
    case TaskKind::EM:
      return "Are " + profile.pair_noun + " A and " + profile.pair_noun + " B the same " +
             profile.pair_noun + "?";
    default:
      throw UnsupportedMode("no question template for this task");
  }
}

std::string value_answer_instruction(const LabeledInstance& labeled,
                                     const PromptProfile& profile) {
  if (!profile.answer_instruction.empty()) return profile.answer_instruction;
  std::string target =
      profile.target_noun.empty() ? *labeled.target_attribute : profile.target_noun;
  return "Answer the value of the missing attribute \"" + target + "\".";
}

std::string output_format(const LabeledInstance& labeled, const PromptProfile& profile,
                          PromptMode mode) {
  if (task_is_binary(labeled.task)) {
    return mode == PromptMode::Task ? kBinaryOutputFormat : kBinaryReasoningOutputFormat;
  }
  std::string instruction = value_answer_instruction(labeled, profile);
  if (mode == PromptMode::Task) return instruction;
  return kValueReasoningPrefix + instruction;
}

}  // namespace

std::string PromptBundle::render() const {
  std::string out = prefix();
  if (!fewshot_block.empty()) {
    out += '\n';
    out += fewshot_block;
  }
  out += '\n';
  out += instance_block;
  out += '\n';
  out += question;
  out += '\n';
  out += output_format;
  if (!hint_block.empty()) {
    out += '\n';
    out += hint_block;
  }
  if (!fewshot_block.empty()) out += "\n### Response:";
  return out;
}

std::string PromptBundle::prefix() const {
  std::string out = system;
  out += '\n';
  out += task_description;
  for (const std::string& line : knowledge) {
    out += '\n';
    out += line;
  }
  return out;
}

std::string render_fewshot_block(const std::vector<FewShotExample>& examples) {
  std::string out;
  for (const FewShotExample& ex : examples) {
    if (!out.empty()) out += '\n';
    out += "### Instruction:\n";
    out += ex.instance_block;
    out += '\n';
    out += ex.question;
    out += '\n';
    out += ex.output_format;
    out += "\n### Response:\n";
    out += ex.response;
  }
  return out;
}

PromptBundle build_prompt(const LabeledInstance& labeled,
                          const std::vector<knowledge::Rule>& rules, PromptMode mode,
                          const std::vector<FewShotExample>& fewshot,
                          const PromptProfile& profile) {
  if (labeled.task == TaskKind::CTA || labeled.task == TaskKind::AVE) {
    throw UnsupportedMode(std::string("build_prompt does not handle ") +
                          to_string(labeled.task));
  }
  validate_labeled(labeled);

  PromptBundle bundle;
  bundle.mode = mode;
  bundle.system = kSystemMessage;
  if (mode == PromptMode::Reasoning) bundle.system += kReasoningSuffix;
  bundle.task_description = task_description(labeled, profile);
  for (const knowledge::Rule& rule : rules) bundle.knowledge.push_back(rule.text);

  switch (labeled.task) {
    case TaskKind::ED: bundle.instance_block = ed_instance_block(labeled); break;
    case TaskKind::DI: bundle.instance_block = di_instance_block(labeled); break;
    case TaskKind::SM: bundle.instance_block = sm_instance_block(labeled); break;
    case TaskKind::EM: bundle.instance_block = em_instance_block(labeled, profile); break;
    default: break;
  }
  bundle.question = question(labeled, profile);
  bundle.output_format = output_format(labeled, profile, mode);
  bundle.fewshot_block = render_fewshot_block(fewshot);
  return bundle;
}

PromptBundle build_hinted_groundtruth_prompt(const LabeledInstance& labeled,
                                             const std::vector<knowledge::Rule>& rules,
                                             const std::vector<knowledge::Rule>& teacher_extra,
                                             const PromptProfile& profile) {
  if (!labeled.gold) throw MissingGold("hinted prompt requires a gold label: " + labeled.id);
  PromptBundle bundle = build_prompt(labeled, rules, PromptMode::Reasoning, {}, profile);
  for (const knowledge::Rule& rule : teacher_extra) bundle.knowledge.push_back(rule.text);
  bundle.hint_block = std::string(kHintPreamble) + "\nHint: the final answer is \"" +
                      labeled.gold->rendered() + "\"";
  return bundle;
}

void ensure_max_length(const PromptBundle& bundle, std::size_t max_chars) {
  if (max_chars == 0) return;
  std::size_t n = bundle.render().size();
  if (n > max_chars) {
    throw PromptTooLong("prompt length " + std::to_string(n) + " exceeds limit " +
                        std::to_string(max_chars));
  }
}

}  // namespace dpkit::serializer
