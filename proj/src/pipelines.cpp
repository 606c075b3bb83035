#include "dpkit/pipelines.hpp"

#include <algorithm>
#include <map>

#include <nlohmann/json.hpp>

#include "dpkit/util.hpp"

namespace dpkit::pipelines {

namespace {

using nlohmann::json;

// The wire protocol carries system and user text separately; the rendered
// prompt starts with the (single-line) system message.
infer::CompletionRequest to_request(const serializer::PromptBundle& bundle) {
  infer::CompletionRequest request;
  request.system = bundle.system;
  std::string rendered = bundle.render();
  if (rendered.size() > bundle.system.size())
    request.user_text = rendered.substr(bundle.system.size() + 1);
  request.prefix = bundle.prefix();
  return request;
}

Prediction parse_completion(TaskKind task, const std::string& text,
                            const std::vector<std::string>& cta_candidates = {}) {
  Prediction pred;
  pred.raw_text = text;
  parser::ParseResult result;
  switch (task) {
    case TaskKind::ED:
    case TaskKind::SM:
    case TaskKind::EM:
      result = parser::parse_binary(text);
      break;
    case TaskKind::DI:
      result = parser::parse_value(text);
      break;
    case TaskKind::CTA:
      result = parser::parse_cta(text, cta_candidates);
      break;
    case TaskKind::AVE:
      result = parser::parse_ave(text);
      break;
  }
  if (result.ok()) {
    pred.parsed = result.answer->label;
    pred.source = result.answer->source;
  } else {
    pred.error = to_string(result.failure);
  }
  return pred;
}

std::string quote_list(const std::vector<std::string>& items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += items[i];
  }
  out += "]";
  return out;
}

// The four chain-of-thought steps, with the subject (table/column) and the
// candidate set swapped per stage.
std::string cot_steps(const std::string& subject, const std::string& candidate_kind,
                      const std::vector<std::string>& candidates) {
  std::string list;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i) list += ", ";
    list += candidates[i];
  }
  return "Follow these steps: 1. look at the input and make a " + subject +
         " out of it. 2. look at the cell values in detail. 3. decide if the " + subject +
         " describes " + list + ". 4. answer with the " + candidate_kind + ".";
}

std::string serialize_samples(const RecordInstance& column, int samples_per_column) {
  std::string out = "[";
  int used = 0;
  for (const auto& [name, value] : column.attributes) {
    if (used == samples_per_column) break;
    if (used) out += ", ";
    out += "\"" + value.rendered() + "\"";
    ++used;
  }
  out += "]";
  return out;
}

}  // namespace

void write_predictions(const std::filesystem::path& path, const std::vector<Prediction>& preds) {
  std::string out;
  for (const auto& pred : preds) {
    json record;
    record["instance_id"] = pred.instance_id;
    record["prompt_hash"] = pred.prompt_hash;
    record["raw_text"] = pred.raw_text;
    record["parsed_label"] = pred.parsed ? json(pred.parsed->rendered()) : json(nullptr);
    record["confidence_source"] = to_string(pred.source);
    if (!pred.error.empty()) record["error"] = pred.error;
    out += record.dump();
    out += '\n';
  }
  util::write_file(path.string(), out);
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  std::vector<Prediction> out;
  std::size_t line_no = 0;
  const std::string text = util::read_file(path.string());
  for (const auto& line : util::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw Error("prediction line " + std::to_string(line_no) + ": " + e.what());
    }
    Prediction pred;
    pred.instance_id = record.at("instance_id").get<std::string>();
    pred.prompt_hash = record.value("prompt_hash", "");
    pred.raw_text = record.value("raw_text", "");
    if (record.contains("parsed_label") && !record["parsed_label"].is_null())
      pred.parsed = Label::value(record["parsed_label"].get<std::string>());
    std::string source = record.value("confidence_source", "exact");
    pred.source = source == "final-line" ? parser::Confidence::FinalLine
                  : source == "fuzzy"    ? parser::Confidence::Fuzzy
                                         : parser::Confidence::Exact;
    pred.error = record.value("error", "");
    out.push_back(std::move(pred));
  }
  return out;
}

std::vector<serializer::FewShotExample> load_fewshot(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(util::read_file(path.string()));
  } catch (const json::exception& e) {
    throw Error("few-shot file " + path.string() + ": " + e.what());
  }
  std::vector<serializer::FewShotExample> out;
  for (const auto& item : doc.at("examples")) {
    serializer::FewShotExample ex;
    ex.instance_block = item.at("instance_block").get<std::string>();
    ex.question = item.at("question").get<std::string>();
    ex.output_format = item.at("output_format").get<std::string>();
    ex.response = item.at("response").get<std::string>();
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Prediction> run_task(const ingest::Dataset& dataset,
                                 const knowledge::Registry& registry,
                                 const infer::Client& client, const RunSpec& spec,
                                 const std::vector<serializer::FewShotExample>& fewshot) {
  if (spec.shots > 0 && int(fewshot.size()) < spec.shots)
    throw Error("run asks for " + std::to_string(spec.shots) + " shots but only " +
                std::to_string(fewshot.size()) + " examples are available");
  std::vector<serializer::FewShotExample> shots(fewshot.begin(),
                                                fewshot.begin() + spec.shots);

  const TaskKind task = dataset.descriptor.task;
  auto rules = registry.resolve(task, dataset.descriptor.id, spec.include_dataset_knowledge,
                                spec.policy);
  auto indices = dataset.indices(spec.split);

  std::vector<infer::CompletionRequest> requests;
  std::vector<Prediction> predictions(indices.size());
  requests.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const LabeledInstance& inst = dataset.instances[indices[i]];
    auto bundle =
        serializer::build_prompt(inst, rules, spec.mode, shots, dataset.descriptor.prompt);
    auto request = to_request(bundle);
    predictions[i].instance_id = inst.id;
    predictions[i].prompt_hash = util::prompt_hash(request.system, request.user_text);
    requests.push_back(std::move(request));
  }

  // Group by shared prefix and send group by group, so a caching server sees
  // prefix-contiguous batches; answers are mapped back to instance order.
  auto groups = infer::batch_by_prefix(requests);
  std::vector<std::size_t> send_order;
  send_order.reserve(requests.size());
  for (const auto& group : groups)
    for (std::size_t idx : group) send_order.push_back(idx);
  std::vector<infer::CompletionRequest> ordered;
  ordered.reserve(requests.size());
  for (std::size_t idx : send_order) ordered.push_back(requests[idx]);

  auto outcomes = client.complete_many(ordered);
  for (std::size_t pos = 0; pos < send_order.size(); ++pos) {
    std::size_t i = send_order[pos];
    if (!outcomes[pos].ok()) {
      predictions[i].error = outcomes[pos].error;
      continue;
    }
    Prediction parsed = parse_completion(task, outcomes[pos].response->text);
    parsed.instance_id = predictions[i].instance_id;
    parsed.prompt_hash = predictions[i].prompt_hash;
    predictions[i] = std::move(parsed);
  }

  if (!spec.output_path.empty()) write_predictions(spec.output_path, predictions);
  return predictions;
}

eval::DatasetMetrics score_run(const ingest::Dataset& dataset,
                               const std::vector<Prediction>& predictions,
                               ingest::Split split) {
  std::map<std::string, const Prediction*> by_id;
  for (const auto& pred : predictions) by_id[pred.instance_id] = &pred;

  eval::DatasetMetrics metrics;
  const TaskKind task = dataset.descriptor.task;
  std::vector<eval::BinaryPred> bin_preds;
  std::vector<eval::BinaryGold> bin_gold;
  std::vector<eval::ValuePred> val_preds;
  std::vector<eval::ValueGold> val_gold;

  for (std::size_t idx : dataset.indices(split)) {
    const LabeledInstance& inst = dataset.instances[idx];
    if (!inst.gold) continue;
    auto it = by_id.find(inst.id);
    const Prediction* pred = it == by_id.end() ? nullptr : it->second;
    bool parsed = pred && pred->parsed;
    if (!parsed) ++metrics.unparseable;
    if (task_is_binary(task)) {
      bin_gold.push_back({inst.id, inst.gold->yes});
      // rendered() works for live labels and for ones read back from disk,
      // which come in as value-kind text.
      bin_preds.push_back({inst.id, parsed ? std::optional<bool>(pred->parsed->rendered() == "Yes")
                                           : std::nullopt});
    } else {
      val_gold.push_back({inst.id, inst.gold->text});
      val_preds.push_back({inst.id, parsed ? std::optional<std::string>(pred->parsed->rendered())
                                           : std::nullopt});
    }
  }

  if (task_is_binary(task)) {
    auto prf = eval::prf1(eval::score_binary(bin_preds, bin_gold));
    metrics.precision = prf.precision;
    metrics.recall = prf.recall;
    metrics.f1 = prf.f1;
  } else if (task == TaskKind::DI) {
    metrics.accuracy = eval::accuracy(val_preds, val_gold);
  } else if (task == TaskKind::CTA) {
    metrics.micro_f1 = eval::micro_f1(val_preds, val_gold);
  } else {
    auto prf = eval::ave_prf1(val_preds, val_gold);
    metrics.precision = prf.precision;
    metrics.recall = prf.recall;
    metrics.f1 = prf.f1;
  }
  return metrics;
}

RecordInstance column_sample(const std::vector<std::string>& values) {
  RecordInstance record;
  record.role = RecordRole::ColumnSample;
  for (std::size_t i = 0; i < values.size(); ++i)
    record.add("sample " + std::to_string(i + 1), AttributeValue::text(values[i]));
  return record;
}

CtaResult run_cta(const CtaSpec& spec, const infer::Client& client) {
  if (spec.candidate_types.empty()) throw Error("CTA needs a non-empty candidate type list");
  if (spec.two_stage && spec.candidate_domains.empty())
    throw Error("two-stage CTA needs candidate domains");
  if (spec.samples_per_column < 1) throw Error("samples_per_column must be at least 1");

  CtaResult result;

  if (spec.two_stage) {
    std::string description =
        "Your task is to predict the domain of a table. You will be given sample values from "
        "each column of the table.";
    std::string instance;
    for (std::size_t c = 0; c < spec.columns.size(); ++c) {
      if (c) instance += "\n";
      instance += "Column " + std::to_string(c + 1) + ": " +
                  serialize_samples(spec.columns[c], spec.samples_per_column);
    }
    serializer::PromptBundle bundle;
    bundle.system = serializer::kSystemMessage;
    bundle.task_description = description;
    if (spec.chain_of_thought)
      bundle.knowledge.push_back(cot_steps("table", "domain", spec.candidate_domains));
    bundle.instance_block = instance;
    bundle.question = "What is the domain of the table?";
    bundle.output_format = "Choose your answer from: " + quote_list(spec.candidate_domains);

    try {
      auto response = client.complete(to_request(bundle));
      auto parsed = parser::parse_cta(response.text, spec.candidate_domains);
      if (!parsed.ok()) throw Error(std::string("domain: ") + to_string(parsed.failure));
      result.domain = parsed.answer->label.text;
    } catch (const std::exception& e) {
      throw StageFailure(1, 0, e.what());
    }
  }

  for (std::size_t c = 0; c < spec.columns.size(); ++c) {
    std::string description =
        "Your task is to predict the type of a column. You will be given sample values from "
        "the column.";
    if (!result.domain.empty())
      description += " The column comes from a table about " + result.domain + ".";
    serializer::PromptBundle bundle;
    bundle.system = serializer::kSystemMessage;
    bundle.task_description = description;
    if (spec.chain_of_thought)
      bundle.knowledge.push_back(cot_steps("column", "type", spec.candidate_types));
    bundle.instance_block =
        "Column: " + serialize_samples(spec.columns[c], spec.samples_per_column);
    bundle.question = "What is the type of the column?";
    bundle.output_format = "Choose your answer from: " + quote_list(spec.candidate_types);

    try {
      auto request = to_request(bundle);
      auto response = client.complete(request);
      Prediction pred = parse_completion(TaskKind::CTA, response.text, spec.candidate_types);
      pred.instance_id = "column:" + std::to_string(c + 1);
      pred.prompt_hash = util::prompt_hash(request.system, request.user_text);
      if (!pred.parsed) throw Error("column type: " + pred.error);
      result.columns.push_back(std::move(pred));
    } catch (const StageFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw StageFailure(2, c + 1, e.what());
    }
  }
  return result;
}

std::vector<Prediction> run_ave(const std::string& description,
                                const std::vector<std::string>& attributes,
                                const infer::Client& client, const std::string& entity_noun) {
  std::vector<Prediction> out;
  for (const auto& attribute : attributes) {
    serializer::PromptBundle bundle;
    bundle.system = serializer::kSystemMessage;
    bundle.task_description = "Your task is to extract the value of a specific attribute from "
                              "the description of a " +
                              entity_noun + ".";
    bundle.instance_block =
        "Description: \"" + description + "\"\nAttribute: \"" + attribute + "\"";
    bundle.question = "What is the value of the attribute \"" + attribute + "\"?";
    bundle.output_format = "Answer the value of the attribute. If the attribute cannot be "
                           "extracted from the description, answer N/A.";
    auto request = to_request(bundle);
    Prediction pred;
    try {
      auto response = client.complete(request);
      pred = parse_completion(TaskKind::AVE, response.text);
    } catch (const std::exception& e) {
      pred.error = e.what();
    }
    pred.instance_id = attribute;
    pred.prompt_hash = util::prompt_hash(request.system, request.user_text);
    out.push_back(std::move(pred));
  }
  return out;
}

JudgeOutcome judge_pair(const JudgeCase& judge_case, const infer::Client& judge,
                        std::uint64_t seed) {
  if (judge_case.answer_a.empty() || judge_case.answer_b.empty())
    throw Error("judge case needs two non-empty answers");
  JudgeOutcome outcome;
  outcome.a_was_model1 = ((seed ^ util::fnv1a64(judge_case.id)) & 1) == 0;
  const std::string& first =
      outcome.a_was_model1 ? judge_case.answer_a : judge_case.answer_b;
  const std::string& second =
      outcome.a_was_model1 ? judge_case.answer_b : judge_case.answer_a;

  serializer::PromptBundle bundle;
  bundle.system = serializer::kSystemMessage;
  bundle.task_description =
      "Two models answered the same question. Your task is to decide which answer is better, "
      "judging by faithfulness to the instruction, justification of the conclusion, clarity "
      "and completeness. You are not given the correct answer, so you need to judge by your "
      "own analysis of the question as well.";
  bundle.instance_block = "Question:\n" + judge_case.question + "\nModel 1's answer:\n" + first +
                          "\nModel 2's answer:\n" + second;
  bundle.question = "Which model gave the better answer?";
  bundle.output_format =
      "Compare the two answers aspect by aspect, then finish your response in a separate line "
      "with and ONLY with your verdict, in the form \"Winner: Model 1\" or \"Winner: Model 2\".";

  auto response = judge.complete(to_request(bundle));
  outcome.rationale = response.text;

  std::string lowered = util::lower(response.text);
  std::size_t pos = lowered.rfind("winner");
  if (pos == std::string::npos)
    throw UnparseableVerdict("no winner marker in judge response");
  std::size_t one = lowered.find("model 1", pos);
  std::size_t two = lowered.find("model 2", pos);
  bool first_won;
  if (one != std::string::npos && (two == std::string::npos || one < two)) {
    first_won = true;
  } else if (two != std::string::npos) {
    first_won = false;
  } else {
    throw UnparseableVerdict("winner marker names no model index");
  }
  outcome.verdict = first_won == outcome.a_was_model1 ? Verdict::A : Verdict::B;
  return outcome;
}

JudgeReport aggregate_judgments(const std::vector<std::pair<std::string, Verdict>>& verdicts) {
  JudgeReport report;
  std::map<std::string, std::pair<long, long>> rows;
  for (const auto& [dataset, verdict] : verdicts) {
    auto& row = rows[dataset];
    if (verdict == Verdict::A) {
      ++row.first;
      ++report.a_total;
    } else {
      ++row.second;
      ++report.b_total;
    }
  }
  for (const auto& [dataset, counts] : rows)
    report.per_dataset.push_back({dataset, counts.first, counts.second});
  long total = report.a_total + report.b_total;
  if (total > 0) {
    report.a_rate = eval::winning_rate(report.a_total, total);
    report.b_rate = eval::winning_rate(report.b_total, total);
  }
  return report;
}

}  // namespace dpkit::pipelines
