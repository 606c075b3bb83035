#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dpkit/core.hpp"
#include "dpkit/inference.hpp"
#include "dpkit/ingest.hpp"
#include "dpkit/knowledge.hpp"
#include "dpkit/serializer.hpp"

namespace dpkit::composer {

struct PoolExceeded : Error {
  using Error::Error;
};
struct QuotaUnattainable : Error {
  using Error::Error;
};
struct TeacherUnavailable : Error {
  using Error::Error;
};

// How much of a dataset's pool the corpus takes.
struct KeepRule {
  enum class Kind { All, Count, Fraction } kind = Kind::All;
  long count = 0;        // Kind::Count
  double fraction = 0.0; // Kind::Fraction

  static KeepRule all() { return {Kind::All, 0, 0.0}; }
  static KeepRule take(long n) { return {Kind::Count, n, 0.0}; }
  static KeepRule part(double f) { return {Kind::Fraction, 0, f}; }
};

struct PoolStats {
  std::string dataset;
  TaskKind task = TaskKind::ED;
  long instances = 0;
  long positives = 0;
};

struct PlanEntry {
  TaskKind task = TaskKind::ED;
  std::string dataset;
  long target_count = 0;       // pre-duplication instance count
  bool keep_all_positives = true;
  bool duplicate_variants = false;  // ED missing-policy x2
  std::uint64_t sampling_seed = 0;

  long planned_entries() const { return duplicate_variants ? 2 * target_count : target_count; }
};

struct CorpusPlan {
  std::vector<PlanEntry> entries;
  long pool_cap = 115000;

  long total_entries() const;
};

// Resolves keep rules against pool sizes. ED entries always duplicate.
// Throws PoolExceeded when the planned total passes pool_cap and
// QuotaUnattainable when a count rule asks for more than the pool holds.
CorpusPlan plan_quotas(const std::vector<PoolStats>& pools,
                       const std::map<std::string, KeepRule>& rules, std::uint64_t seed);

// The keep rules that reproduce the published corpus statistics.
std::map<std::string, KeepRule> paper_plan_rules();

struct EdVariant {
  LabeledInstance instance;  // gold already adjusted for the policy
  knowledge::MissingPolicy policy;
};

// Expands every instance into its missing-is-error and missing-not-error
// versions, in input order. Missing targets flip gold per policy; others
// keep their gold in both copies.
std::vector<EdVariant> duplicate_ed(const std::vector<LabeledInstance>& instances);

struct CorpusEntry {
  std::string id;
  TaskKind task = TaskKind::ED;
  std::string dataset;
  std::string split = "train";
  serializer::PromptMode mode = serializer::PromptMode::Task;
  std::string prompt;          // full rendered text, system first line
  std::string instance_block;  // kept for the novelty filter
  std::string response;
  Label gold;
  std::optional<knowledge::MissingPolicy> policy;
};

using DatasetMap = std::map<std::string, const ingest::Dataset*>;

struct BuildOptions {
  std::uint64_t seed = 7;
  bool include_dataset_knowledge = false;
};

// Deterministic task-mode corpus per plan: every positive retained, seeded
// negative sampling, ED expanded into both policy variants.
std::vector<CorpusEntry> build_task_corpus(const CorpusPlan& plan, const DatasetMap& datasets,
                                           const knowledge::Registry& registry,
                                           const BuildOptions& options = {});

enum class ReasoningPlan { R8k, R11k, R14k, R20k };
const char* to_string(ReasoningPlan plan);
ReasoningPlan reasoning_plan_from_string(const std::string& name);

struct ReasoningTargets {
  long ed = 0, di = 0, sm = 0, em = 0;
  long total() const { return ed + di + sm + em; }
};
// ED/DI fixed (3056/1364), SM/EM by plan. Totals 8420/11420/14420/20020.
ReasoningTargets reasoning_targets(ReasoningPlan plan);

struct ReasoningPick {
  const LabeledInstance* instance = nullptr;
  std::optional<knowledge::MissingPolicy> policy;  // set for duplicated ED picks
  Label gold;
};

// Task-level selection for reasoning data. ED counts each missing-target
// instance twice (both policies) and must land on the target exactly; SM
// keeps positives then samples negatives; DI and EM sample uniformly.
std::vector<ReasoningPick> select_reasoning_instances(TaskKind task,
                                                      const std::vector<const LabeledInstance*>& pool,
                                                      long target, std::uint64_t seed);

struct FilterDecision {
  bool keep = true;
  std::string reason;  // "empty" | "rephrase" when dropped
};

// Novelty filter for reasoning responses: the share of response-body tokens
// not present in the instance block must reach the threshold.
FilterDecision filter_low_quality(const CorpusEntry& entry, double threshold = 0.35);
double novelty_score(const std::string& response_body, const std::string& instance_block);

struct ReasoningOptions {
  std::uint64_t seed = 7;
  bool include_dataset_knowledge = false;
  int retry_budget = 1;
  double novelty_threshold = 0.35;
};

struct ReasoningBuild {
  std::vector<CorpusEntry> entries;
  struct Drop {
    std::string id;
    std::string reason;
  };
  std::vector<Drop> drops;
};

// Distills reasoning responses from the teacher endpoint. Stored prompts are
// the student versions (never hinted); teacher answers that contradict gold
// are regenerated up to retry_budget then dropped; low-novelty answers are
// dropped. Throws TeacherUnavailable when every call fails.
ReasoningBuild build_reasoning_corpus(ReasoningPlan plan, const DatasetMap& datasets,
                                      const knowledge::Registry& registry,
                                      const infer::Client& teacher,
                                      const ReasoningOptions& options = {});

enum class ExportFormat { Native, Triplet };

// Line-delimited JSON sorted by id. Native keeps every field and round-trips
// through import_corpus; triplet emits {system, instruction, output}.
void export_corpus(const std::vector<CorpusEntry>& entries, const std::string& path,
                   ExportFormat format);
std::vector<CorpusEntry> import_corpus(const std::string& path);

// Training and inference hyperparameters, flat key/value lines.
void emit_tuning_config(const std::string& path);

}  // namespace dpkit::composer
