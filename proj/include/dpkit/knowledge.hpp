#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpkit/core.hpp"

namespace dpkit::knowledge {

struct DuplicateRuleId : Error {
  using Error::Error;
};

enum class Scope { General, Task, Dataset };

// The two ways a duplicated ED instance treats a missing target cell.
enum class MissingPolicy { MissingIsError, MissingNotError };

const char* to_string(Scope scope);
const char* to_string(MissingPolicy policy);
std::optional<MissingPolicy> missing_policy_from_string(std::string_view name);

// One injectable knowledge sentence. Scope drives ordering (general < task <
// dataset) and applicability:
//   General  - applies to every dataset; `tasks` narrows it to given tasks.
//   Task     - applies to one task (`task`).
//   Dataset  - applies to one dataset (`dataset`); only resolved on request.
// Rules sharing a variant_group are mutually exclusive; members carrying a
// `policy` tag are picked by the resolve-time MissingPolicy. Rules with
// default_on=false stay in the registry (available by id) but are not
// auto-resolved.
struct Rule {
  std::string id;
  Scope scope = Scope::General;
  std::optional<TaskKind> task;
  std::string dataset;
  std::string text;
  int rank = 0;
  std::string variant_group;
  std::optional<MissingPolicy> policy;
  std::vector<TaskKind> tasks;
  bool default_on = true;
};

class Registry {
 public:
  // Throws DuplicateRuleId if the id is already present.
  void register_rule(Rule rule);

  // Ordered injection set for one prompt: general rules first, then task,
  // then (when asked) dataset rules, each tier ordered by rank then id.
  // `policy` selects among missing-policy variants; with no policy the whole
  // variant group is omitted.
  std::vector<Rule> resolve(TaskKind task, const std::string& dataset,
                            bool include_dataset_specific,
                            std::optional<MissingPolicy> policy) const;

  // Dataset-scope rules only, in rank order. Hinted teacher prompts append
  // these after the student-visible rules.
  std::vector<Rule> dataset_rules(const std::string& dataset) const;

  const Rule* find(const std::string& id) const;
  const std::vector<Rule>& all() const { return rules_; }
  std::size_t size() const { return rules_.size(); }

  static Registry from_json_text(const std::string& text);
  static Registry load_file(const std::filesystem::path& path);
  // Compiled-in copy of the shipped default knowledge file.
  static const Registry& builtin();
  // The JSON the builtin registry is built from (byte-identical to the
  // shipped data/knowledge/default.json).
  static const char* builtin_json();

 private:
  std::vector<Rule> rules_;
  std::map<std::string, std::size_t> by_id_;
};

}  // namespace dpkit::knowledge
