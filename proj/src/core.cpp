#include "dpkit/core.hpp"

#include <set>

#include "dpkit/util.hpp"

namespace dpkit {

const char* to_string(TaskKind task) {
  switch (task) {
    case TaskKind::ED: return "ed";
    case TaskKind::DI: return "di";
    case TaskKind::SM: return "sm";
    case TaskKind::EM: return "em";
    case TaskKind::CTA: return "cta";
    case TaskKind::AVE: return "ave";
  }
  return "?";
}

std::optional<TaskKind> task_from_string(std::string_view name) {
  std::string n = util::lower(util::trim(name));
  if (n == "ed") return TaskKind::ED;
  if (n == "di") return TaskKind::DI;
  if (n == "sm") return TaskKind::SM;
  if (n == "em") return TaskKind::EM;
  if (n == "cta") return TaskKind::CTA;
  if (n == "ave") return TaskKind::AVE;
  return std::nullopt;
}

bool task_is_binary(TaskKind task) {
  return task == TaskKind::ED || task == TaskKind::SM || task == TaskKind::EM;
}

LabelKind task_label_kind(TaskKind task) {
  switch (task) {
    case TaskKind::ED:
    case TaskKind::SM:
    case TaskKind::EM: return LabelKind::Binary;
    case TaskKind::DI:
    case TaskKind::AVE: return LabelKind::Value;
    case TaskKind::CTA: return LabelKind::Category;
  }
  return LabelKind::Binary;
}

const AttributeValue* RecordInstance::find(std::string_view name) const {
  for (const auto& [n, v] : attributes) {
    if (n == name) return &v;
  }
  return nullptr;
}

std::string Label::rendered() const {
  if (kind == LabelKind::Binary) return yes ? "Yes" : "No";
  return text;
}

AttributeValue normalize_value(std::string_view raw, const NormalizeOptions& opts) {
  std::string_view trimmed = util::trim(raw);
  std::string folded = util::lower(trimmed);
  if (opts.missing_spellings.count(folded)) return AttributeValue::missing();
  return AttributeValue::text(std::string(trimmed));
}

namespace {

void check_unique_names(const RecordInstance& rec, std::size_t begin, std::size_t end,
                        const char* side) {
  std::set<std::string_view> seen;
  for (std::size_t i = begin; i < end; ++i) {
    if (!seen.insert(rec.attributes[i].first).second) {
      throw InvalidInstance(std::string("duplicate attribute name '") +
                            std::string(rec.attributes[i].first) + "' in " + side);
    }
  }
}

}  // namespace

const LabeledInstance& validate_labeled(const LabeledInstance& labeled) {
  const RecordInstance& rec = labeled.instance;
  const TaskKind task = labeled.task;

  if (rec.attributes.empty()) throw InvalidInstance("instance has no attributes");

  bool needs_target = task == TaskKind::ED || task == TaskKind::DI;
  if (needs_target && !labeled.target_attribute) {
    throw InvalidInstance(std::string(to_string(task)) + " instance requires target_attribute");
  }
  if (!needs_target && labeled.target_attribute) {
    throw InvalidInstance(std::string(to_string(task)) + " instance forbids target_attribute");
  }

  switch (task) {
    case TaskKind::ED:
      if (rec.role != RecordRole::SingleRecord)
        throw InvalidInstance("ed expects a single record");
      if (!rec.find(*labeled.target_attribute))
        throw InvalidInstance("ed target_attribute '" + *labeled.target_attribute +
                              "' not present in record");
      check_unique_names(rec, 0, rec.attributes.size(), "record");
      break;
    case TaskKind::DI:
      if (rec.role != RecordRole::SingleRecord)
        throw InvalidInstance("di expects a single record");
      if (rec.find(*labeled.target_attribute))
        throw InvalidInstance("di target_attribute '" + *labeled.target_attribute +
                              "' must be absent from the record");
      check_unique_names(rec, 0, rec.attributes.size(), "record");
      break;
    case TaskKind::SM:
    case TaskKind::EM:
      if (rec.role != RecordRole::Pair)
        throw InvalidInstance(std::string(to_string(task)) + " expects a pair");
      if (rec.pair_split == 0 || rec.pair_split >= rec.attributes.size())
        throw InvalidInstance("pair must have attributes on both sides");
      check_unique_names(rec, 0, rec.pair_split, "left side");
      check_unique_names(rec, rec.pair_split, rec.attributes.size(), "right side");
      break;
    case TaskKind::CTA:
      if (rec.role != RecordRole::ColumnSample)
        throw InvalidInstance("cta expects a column sample");
      break;
    case TaskKind::AVE:
      if (rec.role != RecordRole::TextDescription)
        throw InvalidInstance("ave expects a text description");
      break;
  }

  if (labeled.gold && labeled.gold->kind != task_label_kind(task)) {
    throw InvalidInstance(std::string("gold label kind does not match task ") + to_string(task));
  }
  return labeled;
}

}  // namespace dpkit
