#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpkit/composer.hpp"
#include "dpkit/core.hpp"
#include "dpkit/eval.hpp"
#include "dpkit/inference.hpp"
#include "dpkit/ingest.hpp"
#include "dpkit/knowledge.hpp"
#include "dpkit/mock_server.hpp"
#include "dpkit/pipelines.hpp"
#include "dpkit/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Distinguishes bad invocations (exit 2) from runtime failures (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::atomic<bool> g_stop{false};
void handle_stop(int) { g_stop.store(true); }

struct Common {
  std::uint64_t seed = 7;
  std::string data_root = "data";
  std::string config_path;

  // Optional defaults from a JSON config file ({"data_root", "seed",
  // "endpoint", "model"}); explicit flags win.
  json config;

  void load_config(bool seed_given, bool root_given) {
    if (config_path.empty()) {
      if (const char* env = std::getenv("DPKIT_CONFIG")) config_path = env;
    }
    if (config_path.empty()) return;
    if (!fs::exists(config_path))
      throw UsageError("config file not found: " + config_path);
    try {
      config = json::parse(dpkit::util::read_file(config_path));
    } catch (const json::exception& e) {
      throw UsageError("config file " + config_path + ": " + e.what());
    }
    if (!seed_given && config.contains("seed")) seed = config["seed"].get<std::uint64_t>();
    if (!root_given && config.contains("data_root"))
      data_root = config["data_root"].get<std::string>();
  }

  std::string config_default(const std::string& key, const std::string& fallback) const {
    if (config.contains(key)) return config[key].get<std::string>();
    return fallback;
  }
};

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string current;
  for (char c : csv) {
    if (c == ',') {
      if (!current.empty()) out.emplace_back(dpkit::util::trim(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) out.emplace_back(dpkit::util::trim(current));
  return out;
}

dpkit::ingest::Split split_from_name(const std::string& name) {
  if (name == "train") return dpkit::ingest::Split::Train;
  if (name == "valid") return dpkit::ingest::Split::Valid;
  return dpkit::ingest::Split::Test;
}

dpkit::infer::EndpointProfile make_profile(const std::string& url, const std::string& model,
                                           int max_in_flight, double timeout, int retries,
                                           int backoff_ms) {
  dpkit::infer::EndpointProfile profile;
  profile.base_url = url;
  profile.model_name = model;
  profile.max_in_flight = max_in_flight;
  profile.timeout_seconds = timeout;
  profile.max_retries = retries;
  profile.backoff_base_ms = backoff_ms;
  return dpkit::infer::apply_env(profile);
}

const std::vector<std::string>& corpus_dataset_ids() {
  static const std::vector<std::string> ids = {
      "adult",         "hospital",      "buy",
      "restaurant",    "mimic-iii",     "synthea",
      "amazon-google", "beer",          "dblp-acm",
      "dblp-googlescholar", "fodors-zagats", "itunes-amazon"};
  return ids;
}

// ---------------------------------------------------------------- build-data

struct BuildDataArgs {
  std::string out_dir;
  std::string plan = "paper";
  std::string datasets_csv;
  std::string reasoning;
  std::string teacher_url;
  std::string teacher_model = "teacher";
  bool dataset_knowledge = false;
  std::string format = "native";
  double novelty = 0.35;
};

int cmd_build_data(Common& common, const BuildDataArgs& args) {
  using namespace dpkit;

  std::vector<std::string> ids =
      args.datasets_csv.empty() ? corpus_dataset_ids() : split_list(args.datasets_csv);

  std::map<std::string, ingest::Dataset> loaded;
  composer::DatasetMap dataset_map;
  std::vector<composer::PoolStats> pools;
  for (const auto& id : ids) {
    fs::path manifest = fs::path(common.data_root) / id / "manifest.json";
    if (!fs::exists(manifest))
      throw UsageError("no dataset manifest at " + manifest.string());
    loaded.emplace(id, ingest::load_from_root(common.data_root, id));
  }
  for (auto& [id, ds] : loaded) {
    dataset_map[id] = &ds;
    composer::PoolStats stats;
    stats.dataset = id;
    stats.task = ds.descriptor.task;
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
      if (ds.split_of[i] == ingest::Split::Test) continue;
      ++stats.instances;
      const auto& gold = ds.instances[i].gold;
      if (gold && gold->kind == LabelKind::Binary && gold->yes) ++stats.positives;
    }
    pools.push_back(stats);
  }

  auto rules = args.plan == "paper" ? composer::paper_plan_rules()
                                    : std::map<std::string, composer::KeepRule>{};
  auto plan = composer::plan_quotas(pools, rules, common.seed);
  composer::BuildOptions options;
  options.seed = common.seed;
  options.include_dataset_knowledge = args.dataset_knowledge;
  auto corpus =
      composer::build_task_corpus(plan, dataset_map, knowledge::Registry::builtin(), options);

  fs::create_directories(args.out_dir);
  auto format = args.format == "triplet" ? composer::ExportFormat::Triplet
                                         : composer::ExportFormat::Native;
  composer::export_corpus(corpus, (fs::path(args.out_dir) / "task_corpus.jsonl").string(),
                          format);
  composer::emit_tuning_config((fs::path(args.out_dir) / "tuning_config.txt").string());

  std::map<std::string, long> counts;
  for (const auto& entry : corpus) ++counts[entry.dataset];
  std::printf("task corpus: %zu entries\n", corpus.size());
  for (const auto& [dataset, count] : counts)
    std::printf("  %-20s %ld\n", dataset.c_str(), count);

  if (!args.reasoning.empty()) {
    if (args.teacher_url.empty())
      throw UsageError("--reasoning requires --teacher <endpoint url>");
    auto plan_name = composer::reasoning_plan_from_string(args.reasoning);
    infer::Client teacher(make_profile(args.teacher_url, args.teacher_model, 8, 120.0, 2, 250));
    composer::ReasoningOptions reasoning_options;
    reasoning_options.seed = common.seed;
    reasoning_options.include_dataset_knowledge = args.dataset_knowledge;
    reasoning_options.novelty_threshold = args.novelty;
    auto build = composer::build_reasoning_corpus(plan_name, dataset_map,
                                                  knowledge::Registry::builtin(), teacher,
                                                  reasoning_options);
    std::string out_name = std::string("reasoning_") + composer::to_string(plan_name) + ".jsonl";
    composer::export_corpus(build.entries, (fs::path(args.out_dir) / out_name).string(), format);
    std::printf("reasoning corpus (%s): %zu kept, %zu dropped\n",
                composer::to_string(plan_name), build.entries.size(), build.drops.size());
    std::map<std::string, long> drop_reasons;
    for (const auto& drop : build.drops) ++drop_reasons[drop.reason];
    for (const auto& [reason, count] : drop_reasons)
      std::printf("  dropped (%s): %ld\n", reason.c_str(), count);
  }
  return 0;
}

// --------------------------------------------------------------------- infer

struct InferArgs {
  std::string task;
  std::string dataset;
  std::string endpoint;
  std::string model = "local";
  std::string mode = "task";
  int shots = 0;
  std::string knowledge = "general";
  std::string policy;
  std::string split = "test";
  std::string out_path;
  std::string fewshot_path;
  std::optional<double> temperature;
  int max_in_flight = 8;
  double timeout = 60.0;
  int retries = 2;
  int backoff_ms = 250;
  // CTA
  std::string table_path;
  bool table_has_header = false;
  std::string domains_csv;
  std::string types_csv;
  std::string stages = "two";
  std::string cot = "on";
  int samples_per_column = 5;
  // AVE
  std::string description;
  std::string attributes_csv;
  std::string entity_noun = "product";
};

int cmd_infer(Common& common, const InferArgs& args) {
  using namespace dpkit;
  auto task = task_from_string(args.task);
  if (!task) throw UsageError("unknown task: " + args.task);

  std::string endpoint = args.endpoint.empty()
                             ? common.config_default("endpoint", "")
                             : args.endpoint;
  if (endpoint.empty()) throw UsageError("--endpoint is required");
  std::string model = args.model == "local" ? common.config_default("model", args.model)
                                            : args.model;
  infer::Client client(
      make_profile(endpoint, model, args.max_in_flight, args.timeout, args.retries,
                   args.backoff_ms));

  if (*task == TaskKind::CTA) {
    if (args.table_path.empty()) throw UsageError("CTA needs --table <csv>");
    if (!fs::exists(args.table_path))
      throw UsageError("table file not found: " + args.table_path);
    if (args.types_csv.empty()) throw UsageError("CTA needs --types <candidate list>");
    pipelines::CtaSpec spec;
    for (const auto& column : ingest::read_csv_columns(args.table_path, ',',
                                                       args.table_has_header))
      spec.columns.push_back(pipelines::column_sample(column));
    spec.candidate_domains = split_list(args.domains_csv);
    spec.candidate_types = split_list(args.types_csv);
    spec.samples_per_column = args.samples_per_column;
    spec.two_stage = args.stages == "two";
    spec.chain_of_thought = args.cot == "on";
    if (spec.two_stage && spec.candidate_domains.empty())
      throw UsageError("two-stage CTA needs --domains <candidate list>");
    auto result = pipelines::run_cta(spec, client);
    if (!result.domain.empty()) std::printf("domain: %s\n", result.domain.c_str());
    for (const auto& pred : result.columns)
      std::printf("%s: %s\n", pred.instance_id.c_str(),
                  pred.parsed ? pred.parsed->rendered().c_str() : "<failed>");
    if (!args.out_path.empty()) pipelines::write_predictions(args.out_path, result.columns);
    return 0;
  }

  if (*task == TaskKind::AVE) {
    if (args.description.empty() || args.attributes_csv.empty())
      throw UsageError("AVE needs --description and --attributes");
    auto preds = pipelines::run_ave(args.description, split_list(args.attributes_csv), client,
                                    args.entity_noun);
    for (const auto& pred : preds)
      std::printf("%s: %s\n", pred.instance_id.c_str(),
                  pred.parsed ? pred.parsed->rendered().c_str() : "<failed>");
    if (!args.out_path.empty()) pipelines::write_predictions(args.out_path, preds);
    return 0;
  }

  if (args.dataset.empty()) throw UsageError("--dataset is required for this task");
  fs::path manifest = fs::path(common.data_root) / args.dataset / "manifest.json";
  if (!fs::exists(manifest)) throw UsageError("no dataset manifest at " + manifest.string());
  auto dataset = ingest::load_from_root(common.data_root, args.dataset);
  if (dataset.descriptor.task != *task)
    throw UsageError("dataset " + args.dataset + " is a " +
                     std::string(to_string(dataset.descriptor.task)) + " dataset");

  pipelines::RunSpec spec;
  spec.mode = args.mode == "reasoning" ? serializer::PromptMode::Reasoning
                                       : serializer::PromptMode::Task;
  spec.shots = args.shots;
  spec.include_dataset_knowledge = args.knowledge == "+dataset";
  if (!args.policy.empty()) {
    spec.policy = knowledge::missing_policy_from_string(args.policy);
    if (!spec.policy) throw UsageError("unknown --policy: " + args.policy);
  }
  spec.split = split_from_name(args.split);
  spec.output_path = args.out_path;

  std::vector<serializer::FewShotExample> fewshot;
  if (args.shots > 0) {
    fs::path path = args.fewshot_path.empty()
                        ? fs::path(common.data_root) / "fewshot" / (args.dataset + ".json")
                        : fs::path(args.fewshot_path);
    if (!fs::exists(path))
      throw UsageError("few-shot fixture file not found: " + path.string());
    fewshot = pipelines::load_fewshot(path);
  }

  auto preds = pipelines::run_task(dataset, knowledge::Registry::builtin(), client, spec,
                                   fewshot);
  long failed = 0;
  for (const auto& pred : preds)
    if (!pred.parsed) ++failed;
  std::printf("%zu predictions (%ld failed)\n", preds.size(), failed);
  if (!args.out_path.empty()) std::printf("wrote %s\n", args.out_path.c_str());
  return 0;
}

// ---------------------------------------------------------------------- eval

struct EvalArgs {
  std::string dataset;
  std::vector<std::string> pred_files;
  std::vector<std::string> names;
  std::string split = "test";
};

int cmd_eval(Common& common, const EvalArgs& args) {
  using namespace dpkit;
  fs::path manifest = fs::path(common.data_root) / args.dataset / "manifest.json";
  if (!fs::exists(manifest)) throw UsageError("no dataset manifest at " + manifest.string());
  auto dataset = ingest::load_from_root(common.data_root, args.dataset);

  for (const auto& file : args.pred_files)
    if (!fs::exists(file)) throw UsageError("prediction file not found: " + file);

  auto split = split_from_name(args.split);
  auto print_metrics = [](const eval::DatasetMetrics& m) {
    if (m.accuracy) std::printf("accuracy  %s\n", util::fmt2(*m.accuracy).c_str());
    if (m.precision) std::printf("precision %s\n", util::fmt2(*m.precision).c_str());
    if (m.recall) std::printf("recall    %s\n", util::fmt2(*m.recall).c_str());
    if (m.f1) std::printf("f1        %s\n", util::fmt2(*m.f1).c_str());
    if (m.micro_f1) std::printf("micro_f1  %s\n", util::fmt2(*m.micro_f1).c_str());
    std::printf("unparseable %ld\n", m.unparseable);
  };

  if (args.pred_files.size() == 1) {
    auto preds = pipelines::read_predictions(args.pred_files[0]);
    print_metrics(pipelines::score_run(dataset, preds, split));
    return 0;
  }

  std::vector<std::pair<std::string, eval::MetricReport>> reports;
  for (std::size_t i = 0; i < args.pred_files.size(); ++i) {
    std::string name = i < args.names.size()
                           ? args.names[i]
                           : fs::path(args.pred_files[i]).stem().string();
    auto preds = pipelines::read_predictions(args.pred_files[i]);
    eval::MetricReport report;
    report.per_dataset[args.dataset] = pipelines::score_run(dataset, preds, split);
    report.finalize();
    reports.emplace_back(name, report);
  }
  std::fputs(eval::render_compare(eval::compare_report(reports)).c_str(), stdout);
  return 0;
}

// --------------------------------------------------------------------- judge

struct JudgeArgs {
  std::string questions;
  std::string answers_a;
  std::string answers_b;
  std::string endpoint;
  std::string model = "judge";
  std::string out_path;
  double max_unparseable = 0.1;
};

std::map<std::string, std::string> load_answers(const std::string& path) {
  std::map<std::string, std::string> out;
  std::size_t line_no = 0;
  const std::string text = dpkit::util::read_file(path);
  for (const auto& line : dpkit::util::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw UsageError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    out[record.at("id").get<std::string>()] = record.at("text").get<std::string>();
  }
  return out;
}

int cmd_judge(Common& common, const JudgeArgs& args) {
  using namespace dpkit;
  for (const auto* path : {&args.questions, &args.answers_a, &args.answers_b})
    if (!fs::exists(*path)) throw UsageError("input file not found: " + *path);

  auto answers_a = load_answers(args.answers_a);
  auto answers_b = load_answers(args.answers_b);

  std::vector<pipelines::JudgeCase> cases;
  std::size_t line_no = 0;
  const std::string question_text = util::read_file(args.questions);
  for (const auto& line : util::split_lines(question_text)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw UsageError(args.questions + " line " + std::to_string(line_no) + ": " + e.what());
    }
    pipelines::JudgeCase judge_case;
    judge_case.id = record.at("id").get<std::string>();
    judge_case.dataset = record.value("dataset", "all");
    judge_case.question = record.at("question").get<std::string>();
    auto a = answers_a.find(judge_case.id);
    auto b = answers_b.find(judge_case.id);
    if (a == answers_a.end() || b == answers_b.end())
      throw UsageError("no answers for question id " + judge_case.id);
    judge_case.answer_a = a->second;
    judge_case.answer_b = b->second;
    cases.push_back(std::move(judge_case));
  }
  if (cases.empty()) throw UsageError("no judge cases in " + args.questions);

  std::string endpoint = args.endpoint.empty()
                             ? common.config_default("endpoint", "")
                             : args.endpoint;
  if (endpoint.empty()) throw UsageError("--endpoint is required");
  infer::Client judge(make_profile(endpoint, args.model, 8, 120.0, 2, 250));

  std::vector<std::pair<std::string, pipelines::Verdict>> verdicts;
  std::string transcript;
  long unparseable = 0;
  for (const auto& judge_case : cases) {
    try {
      auto outcome = pipelines::judge_pair(judge_case, judge, common.seed);
      verdicts.emplace_back(judge_case.dataset, outcome.verdict);
      json record = {{"id", judge_case.id},
                     {"dataset", judge_case.dataset},
                     {"verdict", outcome.verdict == pipelines::Verdict::A ? "A" : "B"},
                     {"a_was_model1", outcome.a_was_model1}};
      transcript += record.dump();
      transcript += '\n';
    } catch (const pipelines::UnparseableVerdict&) {
      ++unparseable;
    }
  }
  if (!args.out_path.empty()) util::write_file(args.out_path, transcript);

  auto report = pipelines::aggregate_judgments(verdicts);
  std::printf("%-24s %8s %8s\n", "dataset", "A wins", "B wins");
  for (const auto& row : report.per_dataset)
    std::printf("%-24s %8ld %8ld\n", row.dataset.c_str(), row.a_wins, row.b_wins);
  std::printf("%-24s %8ld %8ld\n", "Total", report.a_total, report.b_total);
  std::printf("%-24s %7s%% %7s%%\n", "Winning Rate", util::fmt2(report.a_rate).c_str(),
              util::fmt2(report.b_rate).c_str());
  if (unparseable > 0)
    std::printf("unparseable verdicts: %ld of %zu\n", unparseable, cases.size());

  double rate = double(unparseable) / double(cases.size());
  return rate > args.max_unparseable ? 1 : 0;
}

// ---------------------------------------------------------------- mock-serve

struct MockArgs {
  std::string mode = "echo";
  std::string map_path;
  std::string gold_path;
  int port = 0;
  bool fallback_no = false;
  int fail_first = 0;
  int delay_ms = 0;
};

std::unordered_map<std::string, std::string> load_response_map(const std::string& path) {
  std::string text = dpkit::util::read_file(path);
  std::unordered_map<std::string, std::string> map;
  // Either one JSON object {hash: text, ...} or JSONL records
  // {"hash","answer"} / {"system","user","answer"}.
  try {
    json doc = json::parse(text);
    if (doc.is_object()) {
      for (auto it = doc.begin(); it != doc.end(); ++it)
        map[it.key()] = it.value().get<std::string>();
      return map;
    }
  } catch (const json::exception&) {
    // fall through to JSONL
  }
  std::size_t line_no = 0;
  for (const auto& line : dpkit::util::split_lines(text)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw UsageError(path + " line " + std::to_string(line_no) + ": " + e.what());
    }
    std::string answer = record.at("answer").get<std::string>();
    if (record.contains("hash")) {
      map[record["hash"].get<std::string>()] = answer;
    } else {
      map[dpkit::util::prompt_hash(record.value("system", ""),
                                   record.at("user").get<std::string>())] = answer;
    }
  }
  return map;
}

int cmd_mock_serve(const MockArgs& args) {
  using namespace dpkit;
  mock::MockConfig config;
  if (args.mode == "echo") {
    config.mode = mock::Mode::Echo;
  } else if (args.mode == "replay") {
    if (args.map_path.empty()) throw UsageError("replay mode needs --map <file>");
    if (!fs::exists(args.map_path))
      throw UsageError("map file not found: " + args.map_path);
    config.mode = mock::Mode::Replay;
    config.responses = load_response_map(args.map_path);
  } else if (args.mode == "rule") {
    if (args.gold_path.empty()) throw UsageError("rule mode needs --gold <file>");
    if (!fs::exists(args.gold_path))
      throw UsageError("gold file not found: " + args.gold_path);
    config.mode = mock::Mode::Rule;
    config.responses = load_response_map(args.gold_path);
  } else {
    throw UsageError("unknown mode: " + args.mode);
  }
  config.fallback_no = args.fallback_no;
  config.fail_first = args.fail_first;
  config.delay_ms = args.delay_ms;

  mock::MockServer server(config);
  int port = server.start(args.port);
  std::printf("listening on http://127.0.0.1:%d\n", port);
  std::fflush(stdout);

  std::signal(SIGINT, handle_stop);
  std::signal(SIGTERM, handle_stop);
  while (!g_stop.load() && server.running())
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  std::printf("stopped\n");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-preprocessing toolkit: corpus building, inference and evaluation "
               "for tabular cleaning and integration tasks",
               "dpkit"};
  app.require_subcommand(1);

  Common common;
  auto* seed_opt = app.add_option("--seed", common.seed, "Global random seed")
                       ->capture_default_str();
  auto* root_opt =
      app.add_option("--data-root", common.data_root, "Directory holding dataset folders")
          ->capture_default_str();
  app.add_option("--config", common.config_path,
                 "JSON config with defaults (also via DPKIT_CONFIG)");

  BuildDataArgs build_args;
  auto* build = app.add_subcommand("build-data", "Build instruction corpora and tuning config");
  build->add_option("--out", build_args.out_dir, "Output directory")->required();
  build->add_option("--plan", build_args.plan, "Quota plan: paper|all")
      ->check(CLI::IsMember({"paper", "all"}))
      ->capture_default_str();
  build->add_option("--datasets", build_args.datasets_csv,
                    "Comma-separated dataset ids (default: the full corpus set)");
  build->add_option("--reasoning", build_args.reasoning,
                    "Also build a reasoning corpus: r8k|r11k|r14k|r20k")
      ->check(CLI::IsMember({"r8k", "r11k", "r14k", "r20k"}));
  build->add_option("--teacher", build_args.teacher_url, "Teacher endpoint URL");
  build->add_option("--teacher-model", build_args.teacher_model, "Teacher model name")
      ->capture_default_str();
  build->add_flag("--dataset-knowledge", build_args.dataset_knowledge,
                  "Inject dataset-specific knowledge into prompts");
  build->add_option("--format", build_args.format, "Corpus format: native|triplet")
      ->check(CLI::IsMember({"native", "triplet"}))
      ->capture_default_str();
  build->add_option("--novelty", build_args.novelty,
                    "Reasoning novelty threshold (drop below)")
      ->capture_default_str();

  InferArgs infer_args;
  auto* infer_cmd = app.add_subcommand("infer", "Run a task against a chat endpoint");
  infer_cmd->add_option("--task", infer_args.task, "Task: ed|di|sm|em|cta|ave")->required();
  infer_cmd->add_option("--dataset", infer_args.dataset, "Dataset id under --data-root");
  infer_cmd->add_option("--endpoint", infer_args.endpoint, "Chat-completion endpoint URL");
  infer_cmd->add_option("--model", infer_args.model, "Model name sent on the wire")
      ->capture_default_str();
  infer_cmd->add_option("--mode", infer_args.mode, "Prompt mode: task|reasoning")
      ->check(CLI::IsMember({"task", "reasoning"}))
      ->capture_default_str();
  infer_cmd->add_option("--shots", infer_args.shots, "Few-shot examples per prompt (0 or 3)")
      ->check(CLI::Range(0, 3))
      ->capture_default_str();
  infer_cmd->add_option("--knowledge", infer_args.knowledge,
                        "Knowledge set: general|+dataset")
      ->check(CLI::IsMember({"general", "+dataset"}))
      ->capture_default_str();
  infer_cmd->add_option("--policy", infer_args.policy,
                        "Missing-value policy knowledge: is-error|not-error");
  infer_cmd->add_option("--split", infer_args.split, "Dataset split: train|valid|test")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();
  infer_cmd->add_option("--out", infer_args.out_path, "Prediction output file (JSONL)");
  infer_cmd->add_option("--fewshot", infer_args.fewshot_path,
                        "Few-shot fixture file (default <data-root>/fewshot/<dataset>.json)");
  infer_cmd->add_option("--max-in-flight", infer_args.max_in_flight,
                        "Concurrent request bound")
      ->capture_default_str();
  infer_cmd->add_option("--timeout", infer_args.timeout, "Per-request timeout in seconds")
      ->capture_default_str();
  infer_cmd->add_option("--retries", infer_args.retries, "Retries per request")
      ->capture_default_str();
  infer_cmd->add_option("--backoff-ms", infer_args.backoff_ms, "Base retry backoff")
      ->capture_default_str();
  infer_cmd->add_option("--table", infer_args.table_path, "CTA: headerless CSV table");
  infer_cmd->add_flag("--has-header", infer_args.table_has_header,
                      "CTA: drop the first CSV row");
  infer_cmd->add_option("--domains", infer_args.domains_csv,
                        "CTA: comma-separated candidate domains");
  infer_cmd->add_option("--types", infer_args.types_csv,
                        "CTA: comma-separated candidate types");
  infer_cmd->add_option("--stages", infer_args.stages, "CTA: one|two")
      ->check(CLI::IsMember({"one", "two"}))
      ->capture_default_str();
  infer_cmd->add_option("--cot", infer_args.cot, "CTA: chain-of-thought on|off")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  infer_cmd->add_option("--samples-per-column", infer_args.samples_per_column,
                        "CTA: sample values shown per column")
      ->capture_default_str();
  infer_cmd->add_option("--description", infer_args.description, "AVE: entity description");
  infer_cmd->add_option("--attributes", infer_args.attributes_csv,
                        "AVE: comma-separated attributes to extract");
  infer_cmd->add_option("--entity-noun", infer_args.entity_noun, "AVE: entity noun")
      ->capture_default_str();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "Score prediction files against gold labels");
  eval_cmd->add_option("--dataset", eval_args.dataset, "Dataset id under --data-root")
      ->required();
  eval_cmd->add_option("--pred", eval_args.pred_files,
                       "Prediction file (repeat to compare systems)")
      ->required();
  eval_cmd->add_option("--name", eval_args.names, "System name per --pred (optional)");
  eval_cmd->add_option("--split", eval_args.split, "Dataset split: train|valid|test")
      ->check(CLI::IsMember({"train", "valid", "test"}))
      ->capture_default_str();

  JudgeArgs judge_args;
  auto* judge_cmd =
      app.add_subcommand("judge", "Head-to-head answer comparison via a judge endpoint");
  judge_cmd->add_option("--questions", judge_args.questions,
                        "JSONL {id, dataset, question}")
      ->required();
  judge_cmd->add_option("--answers-a", judge_args.answers_a, "JSONL {id, text} for system A")
      ->required();
  judge_cmd->add_option("--answers-b", judge_args.answers_b, "JSONL {id, text} for system B")
      ->required();
  judge_cmd->add_option("--endpoint", judge_args.endpoint, "Judge endpoint URL");
  judge_cmd->add_option("--model", judge_args.model, "Judge model name")
      ->capture_default_str();
  judge_cmd->add_option("--out", judge_args.out_path, "Verdict transcript output (JSONL)");
  judge_cmd->add_option("--max-unparseable", judge_args.max_unparseable,
                        "Fail when the unparseable-verdict rate passes this")
      ->capture_default_str();

  MockArgs mock_args;
  auto* mock_cmd = app.add_subcommand("mock-serve", "Run the deterministic mock backend");
  mock_cmd->add_option("--mode", mock_args.mode, "echo|replay|rule")
      ->check(CLI::IsMember({"echo", "replay", "rule"}))
      ->capture_default_str();
  mock_cmd->add_option("--map", mock_args.map_path, "Replay map file (JSON or JSONL)");
  mock_cmd->add_option("--gold", mock_args.gold_path, "Gold answer file (JSON or JSONL)");
  mock_cmd->add_option("--port", mock_args.port, "Port to bind (0 picks a free one)")
      ->capture_default_str();
  mock_cmd->add_flag("--fallback-no", mock_args.fallback_no,
                     "Answer \"No\" for unknown prompts instead of 404");
  mock_cmd->add_option("--fail-first", mock_args.fail_first,
                       "Serve this many 500s before behaving")
      ->capture_default_str();
  mock_cmd->add_option("--delay-ms", mock_args.delay_ms, "Per-request handler delay")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    common.load_config(seed_opt->count() > 0, root_opt->count() > 0);
    if (build->parsed()) return cmd_build_data(common, build_args);
    if (infer_cmd->parsed()) return cmd_infer(common, infer_args);
    if (eval_cmd->parsed()) return cmd_eval(common, eval_args);
    if (judge_cmd->parsed()) return cmd_judge(common, judge_args);
    if (mock_cmd->parsed()) return cmd_mock_serve(mock_args);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
