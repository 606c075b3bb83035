#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dpkit {

// Base class for every error this library throws.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidInstance : Error {
  using Error::Error;
};

enum class TaskKind { ED, DI, SM, EM, CTA, AVE };

enum class LabelKind { Binary, Value, Category };

const char* to_string(TaskKind task);
std::optional<TaskKind> task_from_string(std::string_view name);

// ED/SM/EM answer Yes/No, DI/AVE answer free-form values, CTA answers a
// category from a candidate set.
bool task_is_binary(TaskKind task);
LabelKind task_label_kind(TaskKind task);

// A cell value: either real text or a missing marker. Missing renders as
// "nan" when serialized into prompts.
class AttributeValue {
 public:
  AttributeValue() = default;

  static AttributeValue missing() { return AttributeValue(); }
  static AttributeValue text(std::string value) {
    AttributeValue v;
    v.text_ = std::move(value);
    return v;
  }

  bool is_missing() const { return !text_.has_value(); }
  const std::string& text() const { return *text_; }
  std::string rendered() const { return text_.value_or("nan"); }

  bool operator==(const AttributeValue&) const = default;

 private:
  std::optional<std::string> text_;
};

enum class RecordRole { SingleRecord, Pair, ColumnSample, TextDescription };

// One instance of tabular content: an ordered attribute list. For Pair roles
// the list holds the left side first, then the right side starting at
// pair_split (attribute names were already stripped of their side prefixes
// at load time).
struct RecordInstance {
  std::vector<std::pair<std::string, AttributeValue>> attributes;
  RecordRole role = RecordRole::SingleRecord;
  std::size_t pair_split = 0;

  const AttributeValue* find(std::string_view name) const;
  void add(std::string name, AttributeValue value) {
    attributes.emplace_back(std::move(name), std::move(value));
  }

  std::size_t left_size() const { return pair_split; }
  std::size_t right_size() const { return attributes.size() - pair_split; }
};

struct Label {
  LabelKind kind = LabelKind::Binary;
  bool yes = false;        // Binary
  std::string text;        // Value / Category

  static Label binary(bool y) {
    Label l;
    l.kind = LabelKind::Binary;
    l.yes = y;
    return l;
  }
  static Label value(std::string v) {
    Label l;
    l.kind = LabelKind::Value;
    l.text = std::move(v);
    return l;
  }
  static Label category(std::string c) {
    Label l;
    l.kind = LabelKind::Category;
    l.text = std::move(c);
    return l;
  }

  std::string rendered() const;

  bool operator==(const Label&) const = default;
};

// A record plus everything needed to pose one task question about it.
struct LabeledInstance {
  std::string id;
  std::string dataset;
  RecordInstance instance;
  TaskKind task = TaskKind::ED;
  // Required for ED (attribute under verification) and DI (attribute to
  // impute, absent from the record); forbidden for the other tasks.
  std::optional<std::string> target_attribute;
  std::optional<Label> gold;
};

struct NormalizeOptions {
  // Spellings (after trim + casefold) that count as missing.
  std::set<std::string, std::less<>> missing_spellings = {"nan", "n/a", "na", ""};
};

// Canonical missing-value detection. Trims outer whitespace; if the
// casefolded remainder is a missing spelling the cell is Missing, otherwise
// the trimmed text survives unchanged.
AttributeValue normalize_value(std::string_view raw, const NormalizeOptions& opts = {});

// Checks the structural invariants of a LabeledInstance and returns it.
// Throws InvalidInstance with a reason on violation.
const LabeledInstance& validate_labeled(const LabeledInstance& labeled);

}  // namespace dpkit
