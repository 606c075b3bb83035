#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpkit/core.hpp"
#include "dpkit/eval.hpp"
#include "dpkit/inference.hpp"
#include "dpkit/ingest.hpp"
#include "dpkit/knowledge.hpp"
#include "dpkit/parser.hpp"
#include "dpkit/serializer.hpp"

namespace dpkit::pipelines {

struct StageFailure : Error {
  StageFailure(int stage_no, std::size_t column_no, const std::string& what)
      : Error("stage " + std::to_string(stage_no) + ", column " + std::to_string(column_no) +
              ": " + what),
        stage(stage_no),
        column(column_no) {}
  int stage;
  std::size_t column;
};
struct UnparseableVerdict : Error {
  using Error::Error;
};

struct RunSpec {
  serializer::PromptMode mode = serializer::PromptMode::Task;
  int shots = 0;  // requires that many few-shot examples when > 0
  bool include_dataset_knowledge = false;
  std::optional<knowledge::MissingPolicy> policy;  // ED knowledge variant
  ingest::Split split = ingest::Split::Test;
  std::string output_path;  // prediction records land here when non-empty
};

// One prediction record; `error` carries the transport or parse failure and
// leaves `parsed` empty. Serialized as line-delimited JSON.
struct Prediction {
  std::string instance_id;
  std::string prompt_hash;
  std::string raw_text;
  std::optional<Label> parsed;
  parser::Confidence source = parser::Confidence::Exact;
  std::string error;
};

void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

// Few-shot example sets, stored as JSON {"examples":[{instance_block,
// question, output_format, response}, ...]}.
std::vector<serializer::FewShotExample> load_fewshot(const std::filesystem::path& path);

// Runs one dataset split: serialize, group by shared prefix, complete with
// bounded concurrency, parse per task. Failures are recorded per instance,
// never thrown. Predictions come back in split order.
std::vector<Prediction> run_task(const ingest::Dataset& dataset,
                                 const knowledge::Registry& registry,
                                 const infer::Client& client, const RunSpec& spec,
                                 const std::vector<serializer::FewShotExample>& fewshot = {});

// Scores a finished run against the dataset's gold labels. Metric choice
// follows the task: P/R/F1 for binary tasks, accuracy for DI, micro-F1 for
// CTA, extraction P/R/F1 for AVE.
eval::DatasetMetrics score_run(const ingest::Dataset& dataset,
                               const std::vector<Prediction>& predictions,
                               ingest::Split split = ingest::Split::Test);

struct CtaSpec {
  std::vector<RecordInstance> columns;  // ColumnSample records
  std::vector<std::string> candidate_domains;
  std::vector<std::string> candidate_types;
  int samples_per_column = 5;
  bool two_stage = true;        // stage 1 predicts the table domain first
  bool chain_of_thought = true; // include the four-step instructions
};

// Wraps raw sample values as a ColumnSample record.
RecordInstance column_sample(const std::vector<std::string>& values);

struct CtaResult {
  std::string domain;  // empty in one-stage mode
  std::vector<Prediction> columns;
};

// Two-stage chain-of-thought column typing: 1 domain request (two-stage
// only) + one typing request per column. Throws StageFailure when a request
// or parse fails.
CtaResult run_cta(const CtaSpec& spec, const infer::Client& client);

// One request per attribute; "N/A" marks not-extractable.
std::vector<Prediction> run_ave(const std::string& description,
                                const std::vector<std::string>& attributes,
                                const infer::Client& client,
                                const std::string& entity_noun = "product");

struct JudgeCase {
  std::string id;       // stable identifier, also salts the position coin flip
  std::string dataset;
  std::string question;
  std::string answer_a;
  std::string answer_b;
};

enum class Verdict { A, B };

struct JudgeOutcome {
  Verdict verdict = Verdict::A;
  bool a_was_model1 = true;  // recorded position mapping
  std::string rationale;     // judge raw text
};

// Presents both answers as Model 1/Model 2 in seed-randomized order, asks
// for a "Winner: Model N" line, and maps the verdict back to A/B. Throws
// UnparseableVerdict when no winner marker is found.
JudgeOutcome judge_pair(const JudgeCase& judge_case, const infer::Client& judge,
                        std::uint64_t seed);

struct JudgeReport {
  struct Row {
    std::string dataset;
    long a_wins = 0;
    long b_wins = 0;
  };
  std::vector<Row> per_dataset;  // sorted by dataset
  long a_total = 0;
  long b_total = 0;
  // Winning rates on the 100 scale, truncated to two decimals; 0 when empty.
  double a_rate = 0.0;
  double b_rate = 0.0;
};

JudgeReport aggregate_judgments(const std::vector<std::pair<std::string, Verdict>>& verdicts);

}  // namespace dpkit::pipelines
