#include "dpkit/composer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <nlohmann/json.hpp>

#include "dpkit/parser.hpp"
#include "dpkit/util.hpp"

namespace dpkit::composer {

namespace {

using nlohmann::json;

std::mt19937_64 seeded(std::uint64_t seed) { return std::mt19937_64(seed); }

// Fisher-Yates with gen()%i, the same scheme apply_split uses, so shuffles
// are reproducible across the toolkit.
template <typename T>
void shuffle_indices(std::vector<T>& v, std::mt19937_64& gen) {
  for (std::size_t i = v.size(); i > 1; --i)
    std::swap(v[i - 1], v[gen() % i]);
}

bool is_positive(const LabeledInstance& inst) {
  return inst.gold && inst.gold->kind == LabelKind::Binary && inst.gold->yes;
}

// Pool = the splits that feed tuning (train + valid).
std::vector<std::size_t> pool_indices(const ingest::Dataset& ds) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < ds.instances.size(); ++i)
    if (ds.split_of[i] != ingest::Split::Test) out.push_back(i);
  return out;
}

// Keep-all-positives selection: every positive survives, negatives are
// sampled to fill the target. Returned indices are ascending.
std::vector<std::size_t> select_indices(const ingest::Dataset& ds,
                                        const std::vector<std::size_t>& pool, long target,
                                        bool keep_all_positives, std::uint64_t seed) {
  if (target >= long(pool.size())) return pool;
  std::vector<std::size_t> chosen;
  if (keep_all_positives) {
    std::vector<std::size_t> negatives;
    for (std::size_t idx : pool) {
      if (is_positive(ds.instances[idx]))
        chosen.push_back(idx);
      else
        negatives.push_back(idx);
    }
    if (long(chosen.size()) > target)
      throw QuotaUnattainable("dataset " + ds.descriptor.id + ": " +
                              std::to_string(chosen.size()) + " positives exceed target " +
                              std::to_string(target));
    auto gen = seeded(seed);
    shuffle_indices(negatives, gen);
    negatives.resize(std::size_t(target) - chosen.size());
    chosen.insert(chosen.end(), negatives.begin(), negatives.end());
  } else {
    chosen = pool;
    auto gen = seeded(seed);
    shuffle_indices(chosen, gen);
    chosen.resize(std::size_t(target));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

const ingest::Dataset& dataset_or_throw(const DatasetMap& datasets, const std::string& id) {
  auto it = datasets.find(id);
  if (it == datasets.end() || !it->second)
    throw Error("no dataset loaded for plan entry '" + id + "'");
  return *it->second;
}

std::string policy_suffix(knowledge::MissingPolicy policy) {
  return policy == knowledge::MissingPolicy::MissingIsError ? ":is-error" : ":not-error";
}

CorpusEntry make_entry(const LabeledInstance& inst, const ingest::Dataset& ds,
                       const serializer::PromptBundle& bundle, serializer::PromptMode mode,
                       std::optional<knowledge::MissingPolicy> policy, std::string id) {
  CorpusEntry entry;
  entry.id = std::move(id);
  entry.task = inst.task;
  entry.dataset = ds.descriptor.id;
  entry.mode = mode;
  entry.prompt = bundle.render();
  entry.instance_block = bundle.instance_block;
  entry.gold = *inst.gold;
  entry.policy = policy;
  if (mode == serializer::PromptMode::Task) entry.response = inst.gold->rendered();
  return entry;
}

std::vector<std::string> tokens_of(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  auto flush = [&] {
    // strip surrounding punctuation, keep inner hyphens etc.
    std::size_t b = 0, e = current.size();
    auto is_punct = [](char c) {
      return c == '"' || c == '\'' || c == '.' || c == ',' || c == ';' || c == ':' ||
             c == '!' || c == '?' || c == '(' || c == ')' || c == '[' || c == ']' ||
             c == '{' || c == '}';
    };
    while (b < e && is_punct(current[b])) ++b;
    while (e > b && is_punct(current[e - 1])) --e;
    if (e > b) out.push_back(current.substr(b, e - b));
    current.clear();
  };
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      flush();
    } else {
      current.push_back(char(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  flush();
  return out;
}

bool answers_match(const LabeledInstance& inst, const std::string& response) {
  if (!inst.gold) return false;
  if (task_is_binary(inst.task)) {
    auto parsed = parser::parse_binary(response);
    return parsed.ok() && parsed.answer->label.yes == inst.gold->yes;
  }
  auto parsed = parser::parse_value(response);
  return parsed.ok() &&
         util::fold_for_compare(parsed.answer->label.text) ==
             util::fold_for_compare(inst.gold->text);
}

}  // namespace

long CorpusPlan::total_entries() const {
  long sum = 0;
  for (const auto& e : entries) sum += e.planned_entries();
  return sum;
}

CorpusPlan plan_quotas(const std::vector<PoolStats>& pools,
                       const std::map<std::string, KeepRule>& rules, std::uint64_t seed) {
  CorpusPlan plan;
  for (const auto& pool : pools) {
    KeepRule rule = KeepRule::all();
    if (auto it = rules.find(pool.dataset); it != rules.end()) rule = it->second;
    PlanEntry entry;
    entry.task = pool.task;
    entry.dataset = pool.dataset;
    entry.duplicate_variants = pool.task == TaskKind::ED;
    entry.sampling_seed = seed ^ util::fnv1a64(pool.dataset);
    switch (rule.kind) {
      case KeepRule::Kind::All:
        entry.target_count = pool.instances;
        break;
      case KeepRule::Kind::Count:
        if (rule.count > pool.instances)
          throw QuotaUnattainable("dataset " + pool.dataset + ": rule asks " +
                                  std::to_string(rule.count) + " of " +
                                  std::to_string(pool.instances));
        entry.target_count = rule.count;
        break;
      case KeepRule::Kind::Fraction:
        entry.target_count = std::lround(double(pool.instances) * rule.fraction);
        break;
    }
    plan.entries.push_back(entry);
  }
  if (plan.total_entries() > plan.pool_cap)
    throw PoolExceeded("planned " + std::to_string(plan.total_entries()) +
                       " entries exceed the pool cap " + std::to_string(plan.pool_cap));
  return plan;
}

std::map<std::string, KeepRule> paper_plan_rules() {
  return {
      {"adult", KeepRule::all()},
      {"hospital", KeepRule::all()},
      {"buy", KeepRule::all()},
      {"restaurant", KeepRule::all()},
      {"mimic-iii", KeepRule::take(7000)},
      {"synthea", KeepRule::take(5000)},
      {"amazon-google", KeepRule::all()},
      {"beer", KeepRule::all()},
      {"dblp-acm", KeepRule::take(5000)},
      {"dblp-googlescholar", KeepRule::part(1.0 / 3.0)},
      {"fodors-zagats", KeepRule::all()},
      {"itunes-amazon", KeepRule::all()},
  };
}

std::vector<EdVariant> duplicate_ed(const std::vector<LabeledInstance>& instances) {
  std::vector<EdVariant> out;
  out.reserve(instances.size() * 2);
  for (const auto& inst : instances) {
    if (inst.task != TaskKind::ED || !inst.target_attribute || !inst.gold)
      throw InvalidInstance("duplicate_ed needs labeled ED instances with a target");
    const AttributeValue* target = inst.instance.find(*inst.target_attribute);
    if (!target) throw InvalidInstance("target attribute missing from record: " + inst.id);
    for (auto policy :
         {knowledge::MissingPolicy::MissingIsError, knowledge::MissingPolicy::MissingNotError}) {
      EdVariant variant{inst, policy};
      if (target->is_missing())
        variant.instance.gold =
            Label::binary(policy == knowledge::MissingPolicy::MissingIsError);
      out.push_back(std::move(variant));
    }
  }
  return out;
}

std::vector<CorpusEntry> build_task_corpus(const CorpusPlan& plan, const DatasetMap& datasets,
                                           const knowledge::Registry& registry,
                                           const BuildOptions& options) {
  std::vector<CorpusEntry> out;
  for (const auto& planned : plan.entries) {
    const ingest::Dataset& ds = dataset_or_throw(datasets, planned.dataset);
    auto pool = pool_indices(ds);
    auto chosen = select_indices(ds, pool, planned.target_count, planned.keep_all_positives,
                                 planned.sampling_seed ^ options.seed);

    if (planned.task == TaskKind::ED && planned.duplicate_variants) {
      std::vector<LabeledInstance> selected;
      selected.reserve(chosen.size());
      for (std::size_t idx : chosen) selected.push_back(ds.instances[idx]);
      for (auto& variant : duplicate_ed(selected)) {
        auto rules = registry.resolve(TaskKind::ED, ds.descriptor.id,
                                      options.include_dataset_knowledge, variant.policy);
        auto bundle = serializer::build_prompt(variant.instance, rules,
                                               serializer::PromptMode::Task, {},
                                               ds.descriptor.prompt);
        out.push_back(make_entry(variant.instance, ds, bundle, serializer::PromptMode::Task,
                                 variant.policy,
                                 variant.instance.id + policy_suffix(variant.policy)));
      }
      continue;
    }

    auto rules = registry.resolve(planned.task, ds.descriptor.id,
                                  options.include_dataset_knowledge, std::nullopt);
    for (std::size_t idx : chosen) {
      const LabeledInstance& inst = ds.instances[idx];
      auto bundle = serializer::build_prompt(inst, rules, serializer::PromptMode::Task, {},
                                             ds.descriptor.prompt);
      out.push_back(
          make_entry(inst, ds, bundle, serializer::PromptMode::Task, std::nullopt, inst.id));
    }
  }
  return out;
}

const char* to_string(ReasoningPlan plan) {
  switch (plan) {
    case ReasoningPlan::R8k:
      return "r8k";
    case ReasoningPlan::R11k:
      return "r11k";
    case ReasoningPlan::R14k:
      return "r14k";
    case ReasoningPlan::R20k:
      return "r20k";
  }
  return "r8k";
}

ReasoningPlan reasoning_plan_from_string(const std::string& name) {
  if (name == "r8k" || name == "reasoning-8k") return ReasoningPlan::R8k;
  if (name == "r11k" || name == "reasoning-11k") return ReasoningPlan::R11k;
  if (name == "r14k" || name == "reasoning-14k") return ReasoningPlan::R14k;
  if (name == "r20k" || name == "reasoning-20k") return ReasoningPlan::R20k;
  throw Error("unknown reasoning plan: " + name);
}

ReasoningTargets reasoning_targets(ReasoningPlan plan) {
  ReasoningTargets t;
  t.ed = 3056;
  t.di = 1364;
  switch (plan) {
    case ReasoningPlan::R8k:
      t.sm = 2000;
      t.em = 2000;
      break;
    case ReasoningPlan::R11k:
      t.sm = 3500;
      t.em = 3500;
      break;
    case ReasoningPlan::R14k:
      t.sm = 5000;
      t.em = 5000;
      break;
    case ReasoningPlan::R20k:
      t.sm = 8600;
      t.em = 7000;
      break;
  }
  return t;
}

std::vector<ReasoningPick> select_reasoning_instances(
    TaskKind task, const std::vector<const LabeledInstance*>& pool, long target,
    std::uint64_t seed) {
  std::vector<ReasoningPick> out;
  auto gen = seeded(seed);

  auto pick_plain = [](const LabeledInstance* inst) {
    return ReasoningPick{inst, std::nullopt, *inst->gold};
  };

  if (task == TaskKind::ED) {
    // Missing-target instances contribute both policy variants, others one
    // entry; the expanded count must land exactly on the target.
    auto expanded = [](const LabeledInstance* inst) {
      const AttributeValue* v = inst->instance.find(*inst->target_attribute);
      return v && v->is_missing() ? 2 : 1;
    };
    auto push = [&](const LabeledInstance* inst) {
      if (expanded(inst) == 2) {
        out.push_back({inst, knowledge::MissingPolicy::MissingIsError, Label::binary(true)});
        out.push_back({inst, knowledge::MissingPolicy::MissingNotError, Label::binary(false)});
      } else {
        out.push_back(pick_plain(inst));
      }
    };
    long count = 0;
    std::vector<const LabeledInstance*> negatives;
    for (const auto* inst : pool) {
      if (is_positive(*inst)) {
        count += expanded(inst);
        push(inst);
      } else {
        negatives.push_back(inst);
      }
    }
    if (count > target)
      throw QuotaUnattainable("ED positives already expand past the target");
    shuffle_indices(negatives, gen);
    for (const auto* inst : negatives) {
      if (count == target) break;
      int gain = expanded(inst);
      if (count + gain > target) continue;  // needs a single-entry filler
      count += gain;
      push(inst);
    }
    if (count != target)
      throw QuotaUnattainable("ED reasoning selection cannot reach " + std::to_string(target) +
                              " entries from a pool of " + std::to_string(pool.size()));
    return out;
  }

  if (task == TaskKind::SM) {
    std::vector<const LabeledInstance*> negatives;
    for (const auto* inst : pool) {
      if (is_positive(*inst))
        out.push_back(pick_plain(inst));
      else
        negatives.push_back(inst);
    }
    if (long(out.size()) > target)
      throw QuotaUnattainable("SM positives exceed the reasoning target");
    shuffle_indices(negatives, gen);
    for (const auto* inst : negatives) {
      if (long(out.size()) == target) break;
      out.push_back(pick_plain(inst));
    }
    if (long(out.size()) != target)
      throw QuotaUnattainable("SM pool smaller than the reasoning target");
    return out;
  }

  // DI and EM: uniform sample (all instances when the pool matches).
  if (long(pool.size()) < target)
    throw QuotaUnattainable(std::string(to_string(task)) + " pool smaller than target " +
                            std::to_string(target));
  std::vector<const LabeledInstance*> shuffled = pool;
  shuffle_indices(shuffled, gen);
  shuffled.resize(std::size_t(target));
  for (const auto* inst : shuffled) out.push_back(pick_plain(inst));
  return out;
}

double novelty_score(const std::string& response_body, const std::string& instance_block) {
  auto body = tokens_of(response_body);
  if (body.empty()) return 0.0;
  auto block = tokens_of(instance_block);
  std::set<std::string> vocabulary(block.begin(), block.end());
  long overlap = 0;
  for (const auto& token : body)
    if (vocabulary.count(token)) ++overlap;
  return 1.0 - double(overlap) / double(body.size());
}

FilterDecision filter_low_quality(const CorpusEntry& entry, double threshold) {
  if (entry.mode != serializer::PromptMode::Reasoning)
    throw Error("quality filter applies to reasoning entries only");
  if (util::trim(entry.response).empty()) return {false, "empty"};
  auto split = parser::parse_final(entry.response);
  std::string body = split.split && split.split->had_marker ? split.split->reason : entry.response;
  if (novelty_score(body, entry.instance_block) < threshold) return {false, "rephrase"};
  return {true, ""};
}

ReasoningBuild build_reasoning_corpus(ReasoningPlan plan, const DatasetMap& datasets,
                                      const knowledge::Registry& registry,
                                      const infer::Client& teacher,
                                      const ReasoningOptions& options) {
  ReasoningTargets targets = reasoning_targets(plan);

  struct Pending {
    CorpusEntry entry;
    infer::CompletionRequest teacher_request;
    const LabeledInstance* instance;
  };
  std::vector<Pending> pending;

  for (TaskKind task : {TaskKind::ED, TaskKind::DI, TaskKind::SM, TaskKind::EM}) {
    long target = task == TaskKind::ED   ? targets.ed
                  : task == TaskKind::DI ? targets.di
                  : task == TaskKind::SM ? targets.sm
                                         : targets.em;
    // Pool every loaded dataset of this task, deterministic by map order.
    std::vector<const LabeledInstance*> pool;
    std::map<std::string, const ingest::Dataset*> of_task;
    for (const auto& [id, ds] : datasets) {
      if (ds && ds->descriptor.task == task) {
        of_task.emplace(id, ds);
        for (std::size_t idx : pool_indices(*ds)) pool.push_back(&ds->instances[idx]);
      }
    }
    if (pool.empty() && target > 0)
      throw QuotaUnattainable(std::string("no ") + to_string(task) +
                              " datasets loaded for the reasoning plan");

    auto picks = select_reasoning_instances(task, pool, target,
                                            options.seed ^ util::fnv1a64(to_string(task)));
    for (const auto& pick : picks) {
      const ingest::Dataset& ds = dataset_or_throw(datasets, pick.instance->dataset);
      LabeledInstance adjusted = *pick.instance;
      adjusted.gold = pick.gold;

      auto rules = registry.resolve(task, ds.descriptor.id, options.include_dataset_knowledge,
                                    pick.policy);
      auto student = serializer::build_prompt(adjusted, rules, serializer::PromptMode::Reasoning,
                                              {}, ds.descriptor.prompt);
      auto teacher_extra = options.include_dataset_knowledge
                               ? std::vector<knowledge::Rule>{}
                               : registry.dataset_rules(ds.descriptor.id);
      auto hinted = serializer::build_hinted_groundtruth_prompt(adjusted, rules, teacher_extra,
                                                                ds.descriptor.prompt);

      Pending item;
      item.entry = make_entry(adjusted, ds, student, serializer::PromptMode::Reasoning,
                              pick.policy,
                              pick.policy ? adjusted.id + policy_suffix(*pick.policy)
                                          : adjusted.id);
      std::string rendered = hinted.render();
      std::size_t first_line = rendered.find('\n');
      item.teacher_request.system =
          first_line == std::string::npos ? rendered : rendered.substr(0, first_line);
      item.teacher_request.user_text =
          first_line == std::string::npos ? std::string() : rendered.substr(first_line + 1);
      item.teacher_request.prefix = hinted.prefix();
      item.instance = pick.instance;
      pending.push_back(std::move(item));
    }
  }

  std::vector<infer::CompletionRequest> requests;
  requests.reserve(pending.size());
  for (const auto& item : pending) requests.push_back(item.teacher_request);
  auto outcomes = teacher.complete_many(requests);

  ReasoningBuild build;
  long failures = 0;
  for (std::size_t i = 0; i < pending.size(); ++i) {
    auto& item = pending[i];
    std::optional<std::string> text;
    std::string fail_reason;
    if (outcomes[i].ok()) {
      text = outcomes[i].response->text;
    } else {
      ++failures;
      fail_reason = "teacher-error";
    }

    LabeledInstance adjusted = *item.instance;
    adjusted.gold = item.entry.gold;
    int budget = options.retry_budget;
    while (text && !answers_match(adjusted, *text)) {
      if (budget-- <= 0) {
        text.reset();
        fail_reason = "answer-mismatch";
        break;
      }
      try {
        text = teacher.complete(item.teacher_request).text;
      } catch (const std::exception&) {
        ++failures;
        text.reset();
        fail_reason = "teacher-error";
      }
    }

    if (!text) {
      build.drops.push_back({item.entry.id, fail_reason});
      continue;
    }
    item.entry.response = *text;
    auto decision = filter_low_quality(item.entry, options.novelty_threshold);
    if (!decision.keep) {
      build.drops.push_back({item.entry.id, decision.reason});
      continue;
    }
    build.entries.push_back(std::move(item.entry));
  }

  if (!pending.empty() && failures == long(pending.size()))
    throw TeacherUnavailable("every teacher call failed");
  return build;
}

void export_corpus(const std::vector<CorpusEntry>& entries, const std::string& path,
                   ExportFormat format) {
  std::vector<const CorpusEntry*> ordered;
  ordered.reserve(entries.size());
  for (const auto& e : entries) ordered.push_back(&e);
  std::sort(ordered.begin(), ordered.end(),
            [](const CorpusEntry* a, const CorpusEntry* b) { return a->id < b->id; });

  std::string out;
  for (const CorpusEntry* e : ordered) {
    json record;
    if (format == ExportFormat::Native) {
      record["id"] = e->id;
      record["task"] = to_string(e->task);
      record["dataset"] = e->dataset;
      record["split"] = e->split;
      record["mode"] = e->mode == serializer::PromptMode::Task ? "task" : "reasoning";
      record["prompt"] = e->prompt;
      record["instance_block"] = e->instance_block;
      record["response"] = e->response;
      json gold;
      switch (e->gold.kind) {
        case LabelKind::Binary:
          gold = {{"kind", "binary"}, {"yes", e->gold.yes}};
          break;
        case LabelKind::Value:
          gold = {{"kind", "value"}, {"text", e->gold.text}};
          break;
        case LabelKind::Category:
          gold = {{"kind", "category"}, {"text", e->gold.text}};
          break;
      }
      record["gold"] = gold;
      record["policy"] = e->policy ? json(to_string(*e->policy)) : json(nullptr);
    } else {
      std::size_t first_line = e->prompt.find('\n');
      record["system"] =
          first_line == std::string::npos ? e->prompt : e->prompt.substr(0, first_line);
      record["instruction"] =
          first_line == std::string::npos ? std::string() : e->prompt.substr(first_line + 1);
      record["output"] = e->response;
    }
    out += record.dump();
    out += '\n';
  }
  util::write_file(path, out);
}

std::vector<CorpusEntry> import_corpus(const std::string& path) {
  std::string text = util::read_file(path);
  std::vector<CorpusEntry> out;
  std::size_t line_no = 0;
  for (const auto& line : util::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
    CorpusEntry entry;
    entry.id = record.at("id").get<std::string>();
    auto task = task_from_string(record.at("task").get<std::string>());
    if (!task) throw Error("corpus line " + std::to_string(line_no) + ": unknown task");
    entry.task = *task;
    entry.dataset = record.at("dataset").get<std::string>();
    entry.split = record.value("split", "train");
    entry.mode = record.at("mode").get<std::string>() == "reasoning"
                     ? serializer::PromptMode::Reasoning
                     : serializer::PromptMode::Task;
    entry.prompt = record.at("prompt").get<std::string>();
    entry.instance_block = record.value("instance_block", "");
    entry.response = record.at("response").get<std::string>();
    const auto& gold = record.at("gold");
    std::string kind = gold.at("kind").get<std::string>();
    if (kind == "binary") {
      entry.gold = Label::binary(gold.at("yes").get<bool>());
    } else if (kind == "value") {
      entry.gold = Label::value(gold.at("text").get<std::string>());
    } else {
      entry.gold = Label::category(gold.at("text").get<std::string>());
    }
    if (record.contains("policy") && !record["policy"].is_null()) {
      auto policy = knowledge::missing_policy_from_string(record["policy"].get<std::string>());
      if (!policy) throw Error("corpus line " + std::to_string(line_no) + ": bad policy");
      entry.policy = *policy;
    }
    out.push_back(std::move(entry));
  }
  return out;
}

void emit_tuning_config(const std::string& path) {
  util::write_file(path,
                   "lora_target q_proj,k_proj,v_proj,o_proj\n"
                   "per_device_train_batch_size 2\n"
                   "gradient_accumulation_steps 2\n"
                   "learning_rate 3e-5\n"
                   "num_train_epochs 5\n"
                   "lora_rank 32\n"
                   "lora_alpha 32\n"
                   "temperature 0.35\n"
                   "top_p 0.9\n"
                   "top_k 20\n");
}

}  // namespace dpkit::composer
