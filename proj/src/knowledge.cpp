#include "dpkit/knowledge.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "dpkit/util.hpp"

namespace dpkit::knowledge {

const char* to_string(Scope scope) {
  switch (scope) {
    case Scope::General: return "general";
    case Scope::Task: return "task";
    case Scope::Dataset: return "dataset";
  }
  return "?";
}

const char* to_string(MissingPolicy policy) {
  return policy == MissingPolicy::MissingIsError ? "missing-is-error" : "missing-not-error";
}

std::optional<MissingPolicy> missing_policy_from_string(std::string_view name) {
  std::string n = util::lower(util::trim(name));
  if (n == "missing-is-error" || n == "is-error") return MissingPolicy::MissingIsError;
  if (n == "missing-not-error" || n == "not-error") return MissingPolicy::MissingNotError;
  return std::nullopt;
}

void Registry::register_rule(Rule rule) {
  if (rule.id.empty()) throw Error("knowledge rule without id");
  if (rule.text.empty()) throw Error("knowledge rule '" + rule.id + "' has empty text");
  if (rule.scope == Scope::Task && !rule.task)
    throw Error("task-scope rule '" + rule.id + "' missing task");
  if (rule.scope == Scope::Dataset && rule.dataset.empty())
    throw Error("dataset-scope rule '" + rule.id + "' missing dataset");
  if (by_id_.count(rule.id)) throw DuplicateRuleId("duplicate knowledge rule id: " + rule.id);
  by_id_[rule.id] = rules_.size();
  rules_.push_back(std::move(rule));
}

namespace {

int scope_order(Scope s) {
  switch (s) {
    case Scope::General: return 0;
    case Scope::Task: return 1;
    case Scope::Dataset: return 2;
  }
  return 3;
}

void sort_rules(std::vector<Rule>& rules) {
  std::stable_sort(rules.begin(), rules.end(), [](const Rule& a, const Rule& b) {
    int sa = scope_order(a.scope), sb = scope_order(b.scope);
    if (sa != sb) return sa < sb;
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.id < b.id;
  });
}

}  // namespace

std::vector<Rule> Registry::resolve(TaskKind task, const std::string& dataset,
                                    bool include_dataset_specific,
                                    std::optional<MissingPolicy> policy) const {
  std::vector<Rule> out;
  for (const Rule& rule : rules_) {
    if (!rule.default_on) continue;
    if (rule.policy) {
      if (!policy || *policy != *rule.policy) continue;
    }
    switch (rule.scope) {
      case Scope::General: {
        if (!rule.tasks.empty() &&
            std::find(rule.tasks.begin(), rule.tasks.end(), task) == rule.tasks.end())
          continue;
        break;
      }
      case Scope::Task:
        if (*rule.task != task) continue;
        break;
      case Scope::Dataset:
        if (!include_dataset_specific || rule.dataset != dataset) continue;
        break;
    }
    out.push_back(rule);
  }
  sort_rules(out);
  return out;
}

std::vector<Rule> Registry::dataset_rules(const std::string& dataset) const {
  std::vector<Rule> out;
  for (const Rule& rule : rules_) {
    if (rule.scope == Scope::Dataset && rule.dataset == dataset && rule.default_on)
      out.push_back(rule);
  }
  sort_rules(out);
  return out;
}

const Rule* Registry::find(const std::string& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &rules_[it->second];
}

Registry Registry::from_json_text(const std::string& text) {
  nlohmann::json doc = nlohmann::json::parse(text);
  Registry reg;
  for (const auto& item : doc.at("rules")) {
    Rule rule;
    rule.id = item.at("id").get<std::string>();
    std::string scope = item.at("scope").get<std::string>();
    if (scope == "general") {
      rule.scope = Scope::General;
    } else if (scope == "task") {
      rule.scope = Scope::Task;
    } else if (scope == "dataset") {
      rule.scope = Scope::Dataset;
    } else {
      throw Error("unknown knowledge scope: " + scope);
    }
    if (item.contains("task")) {
      auto task = task_from_string(item["task"].get<std::string>());
      if (!task) throw Error("unknown task in rule " + rule.id);
      rule.task = *task;
    }
    rule.dataset = item.value("dataset", std::string());
    rule.text = item.at("text").get<std::string>();
    rule.rank = item.value("rank", 0);
    rule.variant_group = item.value("variant_group", std::string());
    if (item.contains("policy")) {
      rule.policy = missing_policy_from_string(item["policy"].get<std::string>());
      if (!rule.policy) throw Error("unknown policy in rule " + rule.id);
    }
    if (item.contains("tasks")) {
      for (const auto& t : item["tasks"]) {
        auto task = task_from_string(t.get<std::string>());
        if (!task) throw Error("unknown task filter in rule " + rule.id);
        rule.tasks.push_back(*task);
      }
    }
    rule.default_on = item.value("default", true);
    reg.register_rule(std::move(rule));
  }
  return reg;
}

Registry Registry::load_file(const std::filesystem::path& path) {
  return from_json_text(util::read_file(path));
}

const Registry& Registry::builtin() {
  static const Registry reg = from_json_text(builtin_json());
  return reg;
}

}  // namespace dpkit::knowledge
