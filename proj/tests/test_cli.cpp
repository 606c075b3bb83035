#include <doctest.h>

#include <sys/wait.h>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dpkit/eval.hpp"
#include "dpkit/inference.hpp"
#include "dpkit/ingest.hpp"
#include "dpkit/knowledge.hpp"
#include "dpkit/mock_server.hpp"
#include "dpkit/pipelines.hpp"
#include "dpkit/serializer.hpp"
#include "dpkit/util.hpp"
#include "helpers.hpp"
#include "synthetic.hpp"

using namespace dpkit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

// Runs the installed binary through the shell with stdout/stderr captured in
// scratch files. Endpoint/model/config environment variables are cleared so
// the ambient environment cannot leak into a test; `extra_env` assignments
// come last and therefore win.
CliResult run_cli(const std::string& args, const std::string& extra_env = "") {
  static std::atomic<int> counter{0};
  const int n = counter.fetch_add(1);
  const fs::path out_path = testutil::scratch_file("cli_stdout_" + std::to_string(n) + ".txt");
  const fs::path err_path = testutil::scratch_file("cli_stderr_" + std::to_string(n) + ".txt");
  std::string cmd = "DPKIT_BASE_URL= DPKIT_AUTH_TOKEN= DPKIT_MODEL= DPKIT_CONFIG= ";
  if (!extra_env.empty()) cmd += extra_env + " ";
  cmd += testutil::cli_path() + " " + args + " > " + out_path.string() + " 2> " +
         err_path.string();
  const int status = std::system(cmd.c_str());
  CliResult result;
  result.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  result.out = util::read_file(out_path.string());
  result.err = util::read_file(err_path.string());
  return result;
}

std::string quoted(const std::string& text) { return "'" + text + "'"; }

std::string data_root_arg() { return "--data-root " + testutil::data_dir().string(); }

// Mirrors the request construction inside run_task so rule-mode mock maps can
// be keyed without going over the wire first.
std::pair<std::string, std::string> request_parts(
    const LabeledInstance& inst, const std::vector<knowledge::Rule>& rules,
    const pipelines::RunSpec& spec, const serializer::PromptProfile& profile,
    const std::vector<serializer::FewShotExample>& shots = {}) {
  auto bundle = serializer::build_prompt(inst, rules, spec.mode, shots, profile);
  std::string rendered = bundle.render();
  return {bundle.system, rendered.substr(bundle.system.size() + 1)};
}

long count_lines(const std::string& text) {
  long lines = 0;
  for (char c : text)
    if (c == '\n') ++lines;
  return lines;
}

bool wait_for_text(const fs::path& file, const std::string& needle, int timeout_ms) {
  using namespace std::chrono_literals;
  for (int waited = 0; waited <= timeout_ms; waited += 25) {
    if (fs::exists(file) && util::read_file(file.string()).find(needle) != std::string::npos)
      return true;
    std::this_thread::sleep_for(25ms);
  }
  return false;
}

// Serves the beer test split from a rule map so CLI inference runs offline.
mock::MockConfig beer_rule_config(const ingest::Dataset& dataset,
                                  const std::vector<serializer::FewShotExample>& shots = {}) {
  pipelines::RunSpec spec;
  spec.shots = int(shots.size());
  auto rules = knowledge::Registry::builtin().resolve(TaskKind::EM, "beer", false, std::nullopt);
  mock::MockConfig config;
  config.mode = mock::Mode::Rule;
  for (std::size_t idx : dataset.indices(ingest::Split::Test)) {
    const auto& inst = dataset.instances[idx];
    auto [system, user] = request_parts(inst, rules, spec, dataset.descriptor.prompt, shots);
    mock::add_rule(config, system, user, inst.gold->rendered());
  }
  return config;
}

}  // namespace

TEST_CASE("cli help text matches the frozen snapshots") {
  const std::pair<std::string, std::string> entries[] = {
      {"--help", "help_root.txt"},
      {"build-data --help", "help_build_data.txt"},
      {"infer --help", "help_infer.txt"},
      {"eval --help", "help_eval.txt"},
      {"judge --help", "help_judge.txt"},
      {"mock-serve --help", "help_mock_serve.txt"},
  };
  for (const auto& [args, snapshot] : entries) {
    CAPTURE(args);
    auto result = run_cli(args);
    CHECK(result.code == 0);
    CHECK(result.err.empty());
    CHECK(result.out == util::read_file((testutil::snapshot_dir() / snapshot).string()));
  }
}

TEST_CASE("bad invocations exit with code 2") {
  const fs::path empty_root = testutil::scratch_file("empty_root");
  fs::create_directories(empty_root);

  SUBCASE("parse errors") {
    CHECK(run_cli("").code == 2);                      // a subcommand is required
    CHECK(run_cli("frobnicate").code == 2);            // unknown subcommand
    CHECK(run_cli("eval --bogus x").code == 2);        // unknown flag
    CHECK(run_cli("infer").code == 2);                 // --task missing
    CHECK(run_cli("infer --task ed --shots 9").code == 2);  // out of range
    auto missing_pred = run_cli("eval --dataset beer");
    CHECK(missing_pred.code == 2);
    CHECK(missing_pred.err.find("--pred") != std::string::npos);
    CHECK(run_cli("build-data --out x --plan bogus").code == 2);
    CHECK(run_cli("mock-serve --mode bogus").code == 2);
  }

  SUBCASE("usage errors carry an error: line") {
    auto unknown_task = run_cli("infer --task xyz --endpoint http://127.0.0.1:1");
    CHECK(unknown_task.code == 2);
    CHECK(unknown_task.err == "error: unknown task: xyz\n");

    auto task_mismatch =
        run_cli(data_root_arg() + " infer --task ed --dataset beer --endpoint http://127.0.0.1:1");
    CHECK(task_mismatch.code == 2);
    CHECK(task_mismatch.err == "error: dataset beer is a em dataset\n");

    auto no_endpoint = run_cli(data_root_arg() + " infer --task em --dataset beer");
    CHECK(no_endpoint.code == 2);
    CHECK(no_endpoint.err == "error: --endpoint is required\n");

    auto no_manifest =
        run_cli("--data-root " + empty_root.string() + " eval --dataset mystery --pred x.jsonl");
    CHECK(no_manifest.code == 2);
    CHECK(no_manifest.err.find("error: no dataset manifest at ") == 0);

    auto no_pred = run_cli(data_root_arg() + " eval --dataset beer --pred missing_preds.jsonl");
    CHECK(no_pred.code == 2);
    CHECK(no_pred.err == "error: prediction file not found: missing_preds.jsonl\n");

    auto replay_no_map = run_cli("mock-serve --mode replay");
    CHECK(replay_no_map.code == 2);
    CHECK(replay_no_map.err == "error: replay mode needs --map <file>\n");

    auto cta_no_table = run_cli("infer --task cta --endpoint http://127.0.0.1:1");
    CHECK(cta_no_table.code == 2);
    CHECK(cta_no_table.err == "error: CTA needs --table <csv>\n");

    auto ave_bare = run_cli("infer --task ave --endpoint http://127.0.0.1:1");
    CHECK(ave_bare.code == 2);
    CHECK(ave_bare.err == "error: AVE needs --description and --attributes\n");

    auto no_fixture = run_cli(data_root_arg() + " infer --task em --dataset beer --shots 3 "
                              "--endpoint http://127.0.0.1:1");
    CHECK(no_fixture.code == 2);
    CHECK(no_fixture.err.find("error: few-shot fixture file not found: ") == 0);
    CHECK(no_fixture.err.find("fewshot") != std::string::npos);

    auto no_config = run_cli("--config does_not_exist.json eval --dataset beer --pred x");
    CHECK(no_config.code == 2);
    CHECK(no_config.err == "error: config file not found: does_not_exist.json\n");
  }
}

TEST_CASE("runtime failures exit with code 1") {
  auto bad = testutil::scratch_file("cli_bad_preds.jsonl");
  util::write_file(bad.string(), "{not json\n");
  auto result = run_cli(data_root_arg() + " eval --dataset beer --pred " + bad.string());
  CHECK(result.code == 1);
  CHECK(result.err.find("error: ") == 0);

  auto qfile = testutil::scratch_file("cli_unreachable_q.jsonl");
  auto afile = testutil::scratch_file("cli_unreachable_a.jsonl");
  util::write_file(qfile.string(),
                   json{{"id", "q0"}, {"dataset", "d"}, {"question", "left or right?"}}.dump() +
                       "\n");
  util::write_file(afile.string(), json{{"id", "q0"}, {"text", "left"}}.dump() + "\n");
  auto judge = run_cli("judge --questions " + qfile.string() + " --answers-a " + afile.string() +
                       " --answers-b " + afile.string() + " --endpoint http://127.0.0.1:1");
  CHECK(judge.code == 1);
  CHECK(judge.err.find("error: ") == 0);
}

TEST_CASE("build-data writes corpora and a tuning config") {
  const fs::path out_dir = testutil::scratch_file("cli_corpus");
  fs::remove_all(out_dir);

  auto result = run_cli(data_root_arg() + " build-data --out " + out_dir.string() +
                        " --plan all --datasets beer");
  REQUIRE(result.code == 0);

  // The beer pool is every non-test instance; EM entries are not duplicated.
  auto dataset = ingest::load_from_root(testutil::data_dir().string(), "beer");
  long pool = 0;
  for (auto split : {ingest::Split::Train, ingest::Split::Valid})
    pool += long(dataset.indices(split).size());
  char line[64];
  std::snprintf(line, sizeof line, "  %-20s %ld\n", "beer", pool);
  CHECK(result.out ==
        "task corpus: " + std::to_string(pool) + " entries\n" + std::string(line));

  const std::string corpus_text =
      util::read_file((out_dir / "task_corpus.jsonl").string());
  CHECK(count_lines(corpus_text) == pool);
  json first = json::parse(corpus_text.substr(0, corpus_text.find('\n')));
  for (const char* key :
       {"id", "task", "dataset", "split", "mode", "prompt", "instance_block", "response",
        "gold", "policy"})
    CHECK(first.contains(key));
  CHECK(first["dataset"] == "beer");
  CHECK(first["task"] == "em");
  CHECK(count_lines(util::read_file((out_dir / "tuning_config.txt").string())) == 10);

  const fs::path triplet_dir = testutil::scratch_file("cli_corpus_triplet");
  fs::remove_all(triplet_dir);
  auto triplet = run_cli(data_root_arg() + " build-data --out " + triplet_dir.string() +
                         " --plan all --datasets beer --format triplet");
  REQUIRE(triplet.code == 0);
  const std::string triplet_text =
      util::read_file((triplet_dir / "task_corpus.jsonl").string());
  json trip = json::parse(triplet_text.substr(0, triplet_text.find('\n')));
  CHECK(trip.contains("system"));
  CHECK(trip.contains("instruction"));
  CHECK(trip.contains("output"));
  CHECK_FALSE(trip.contains("gold"));

  auto no_teacher = run_cli(data_root_arg() + " build-data --out " + out_dir.string() +
                            " --plan all --datasets beer --reasoning r8k");
  CHECK(no_teacher.code == 2);
  CHECK(no_teacher.err == "error: --reasoning requires --teacher <endpoint url>\n");
}

TEST_CASE("infer and eval round-trip against a rule-backed mock") {
  auto dataset = ingest::load_from_root(testutil::data_dir().string(), "beer");
  const auto test_ids = dataset.indices(ingest::Split::Test);
  mock::MockServer server(beer_rule_config(dataset));
  const int port = server.start();
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(port);

  const fs::path preds = testutil::scratch_file("cli_beer_preds.jsonl");
  auto infer = run_cli(data_root_arg() + " infer --task em --dataset beer --endpoint " + endpoint +
                       " --retries 0 --out " + preds.string());
  REQUIRE(infer.code == 0);
  CHECK(infer.out == std::to_string(test_ids.size()) + " predictions (0 failed)\nwrote " +
                         preds.string() + "\n");

  auto records = pipelines::read_predictions(preds);
  REQUIRE(records.size() == test_ids.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    CHECK(records[i].instance_id == dataset.instances[test_ids[i]].id);

  auto eval_run = run_cli(data_root_arg() + " eval --dataset beer --pred " + preds.string());
  CHECK(eval_run.code == 0);
  CHECK(eval_run.out ==
        "precision 100.00\n"
        "recall    100.00\n"
        "f1        100.00\n"
        "unparseable 0\n");
}

TEST_CASE("eval compares multiple prediction files side by side") {
  auto dataset = ingest::load_from_root(testutil::data_dir().string(), "beer");
  mock::MockServer server(beer_rule_config(dataset));
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(server.start());

  const fs::path preds_a = testutil::scratch_file("cli_compare_a.jsonl");
  REQUIRE(run_cli(data_root_arg() + " infer --task em --dataset beer --endpoint " + endpoint +
                  " --retries 0 --out " + preds_a.string())
              .code == 0);

  // Degrade one prediction so the two systems differ and a winner exists.
  auto records = pipelines::read_predictions(preds_a);
  REQUIRE(!records.empty());
  REQUIRE(records[0].parsed.has_value());
  records[0].parsed = Label::binary(records[0].parsed->rendered() != "Yes");
  const fs::path preds_b = testutil::scratch_file("cli_compare_b.jsonl");
  pipelines::write_predictions(preds_b, records);

  auto result = run_cli(data_root_arg() + " eval --dataset beer --pred " + preds_a.string() + " --pred " +
                        preds_b.string() + " --name base --name degraded");
  CHECK(result.code == 0);

  std::vector<std::pair<std::string, eval::MetricReport>> reports;
  for (const auto& [name, file] :
       {std::pair<std::string, fs::path>{"base", preds_a}, {"degraded", preds_b}}) {
    eval::MetricReport report;
    report.per_dataset["beer"] = pipelines::score_run(
        dataset, pipelines::read_predictions(file), ingest::Split::Test);
    report.finalize();
    reports.emplace_back(name, report);
  }
  CHECK(result.out == eval::render_compare(eval::compare_report(reports)));
  CHECK(result.out.find("base") != std::string::npos);
  CHECK(result.out.find("100.00*") != std::string::npos);
  CHECK(result.out.find("Average") != std::string::npos);
}

TEST_CASE("few-shot inference loads the fixture given by --fewshot") {
  std::vector<serializer::FewShotExample> shots(3);
  for (int i = 0; i < 3; ++i) {
    shots[i].instance_block = "Product A is [name: \"ale " + std::to_string(i) + "\"]";
    shots[i].question = "Question: Are Product A and Product B the same?";
    shots[i].output_format = "Choose your answer from: [Yes, No]";
    shots[i].response = i % 2 == 0 ? "Yes" : "No";
  }
  json fixture;
  fixture["examples"] = json::array();
  for (const auto& shot : shots)
    fixture["examples"].push_back({{"instance_block", shot.instance_block},
                                   {"question", shot.question},
                                   {"output_format", shot.output_format},
                                   {"response", shot.response}});
  const fs::path fixture_path = testutil::scratch_file("cli_beer_shots.json");
  util::write_file(fixture_path.string(), fixture.dump());

  auto dataset = ingest::load_from_root(testutil::data_dir().string(), "beer");
  mock::MockServer server(beer_rule_config(dataset, shots));
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(server.start());

  const fs::path preds = testutil::scratch_file("cli_fewshot_preds.jsonl");
  auto result = run_cli(data_root_arg() + " infer --task em --dataset beer --shots 3 --fewshot " +
                        fixture_path.string() + " --endpoint " + endpoint + " --retries 0 --out " +
                        preds.string());
  REQUIRE(result.code == 0);
  CHECK(result.out.find(" predictions (0 failed)\n") != std::string::npos);

  auto eval_run = run_cli(data_root_arg() + " eval --dataset beer --pred " + preds.string());
  CHECK(eval_run.out.find("f1        100.00\n") != std::string::npos);
}

TEST_CASE("judge prints the verdict table and honors the seed") {
  testutil::CannedServer judge_server(
      [](const std::string&) { return std::string("Winner: Model 1"); });
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(judge_server.start());

  // Twelve cases across two datasets; model 1 always wins, so the verdict per
  // case is decided purely by the salted coin.
  const int n = 12;
  std::string questions, answers_a, answers_b;
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    std::string id = "q" + std::to_string(i);
    ids.push_back(id);
    std::string ds = i % 2 == 0 ? "alpha" : "beta";
    questions += json{{"id", id}, {"dataset", ds}, {"question", "Pick the better answer."}}.dump();
    questions += '\n';
    answers_a += json{{"id", id}, {"text", "answer A for " + id}}.dump();
    answers_a += '\n';
    answers_b += json{{"id", id}, {"text", "answer B for " + id}}.dump();
    answers_b += '\n';
  }
  const fs::path qfile = testutil::scratch_file("cli_judge_q.jsonl");
  const fs::path afile = testutil::scratch_file("cli_judge_a.jsonl");
  const fs::path bfile = testutil::scratch_file("cli_judge_b.jsonl");
  util::write_file(qfile.string(), questions);
  util::write_file(afile.string(), answers_a);
  util::write_file(bfile.string(), answers_b);
  const std::string base_args = "judge --questions " + qfile.string() + " --answers-a " +
                                afile.string() + " --answers-b " + bfile.string() +
                                " --endpoint " + endpoint;

  auto coin = [](std::uint64_t seed, const std::string& id) {
    return ((seed ^ util::fnv1a64(id)) & 1) == 0;
  };

  const fs::path transcript = testutil::scratch_file("cli_judge_transcript.jsonl");
  auto result = run_cli(base_args + " --out " + transcript.string());
  REQUIRE(result.code == 0);

  // With "Winner: Model 1" fixed, verdict is A exactly when A was model 1.
  long alpha_a = 0, alpha_b = 0, beta_a = 0, beta_b = 0;
  for (int i = 0; i < n; ++i) {
    const bool a_wins = coin(7, ids[i]);  // default --seed
    if (i % 2 == 0)
      (a_wins ? alpha_a : alpha_b)++;
    else
      (a_wins ? beta_a : beta_b)++;
  }
  const long a_total = alpha_a + beta_a;
  const long b_total = alpha_b + beta_b;
  char buf[256];
  std::string expected;
  std::snprintf(buf, sizeof buf, "%-24s %8s %8s\n", "dataset", "A wins", "B wins");
  expected += buf;
  std::snprintf(buf, sizeof buf, "%-24s %8ld %8ld\n", "alpha", alpha_a, alpha_b);
  expected += buf;
  std::snprintf(buf, sizeof buf, "%-24s %8ld %8ld\n", "beta", beta_a, beta_b);
  expected += buf;
  std::snprintf(buf, sizeof buf, "%-24s %8ld %8ld\n", "Total", a_total, b_total);
  expected += buf;
  std::snprintf(buf, sizeof buf, "%-24s %7s%% %7s%%\n", "Winning Rate",
                util::fmt2(eval::winning_rate(a_total, n)).c_str(),
                util::fmt2(eval::winning_rate(b_total, n)).c_str());
  expected += buf;
  CHECK(result.out == expected);

  const std::string transcript_seed7 = util::read_file(transcript.string());
  CHECK(count_lines(transcript_seed7) == n);
  {
    long line_idx = 0;
    const std::string text = transcript_seed7;
    for (const auto& line : util::split_lines(text)) {
      if (line.empty()) continue;
      json record = json::parse(line);
      const std::string id = record.at("id");
      CHECK(record.at("a_was_model1") == coin(7, id));
      CHECK(record.at("verdict") == (coin(7, id) ? "A" : "B"));
      ++line_idx;
    }
    CHECK(line_idx == n);
  }

  // Changing the seed flips the coin's low bit for every id.
  auto flipped = run_cli("--seed 8 " + base_args + " --out " + transcript.string());
  REQUIRE(flipped.code == 0);
  {
    const std::string text = util::read_file(transcript.string());
    for (const auto& line : util::split_lines(text)) {
      if (line.empty()) continue;
      json record = json::parse(line);
      CHECK(record.at("a_was_model1") == !coin(7, record.at("id").get<std::string>()));
    }
  }

  // The config file supplies seed and endpoint when flags are absent; an
  // explicit --seed beats the config value.
  const fs::path config = testutil::scratch_file("cli_judge_config.json");
  util::write_file(config.string(), json{{"seed", 8}, {"endpoint", endpoint}}.dump());
  const std::string no_endpoint_args = "judge --questions " + qfile.string() + " --answers-a " +
                                       afile.string() + " --answers-b " + bfile.string();
  auto via_config = run_cli("--config " + config.string() + " " + no_endpoint_args + " --out " +
                            transcript.string());
  REQUIRE(via_config.code == 0);
  CHECK(util::read_file(transcript.string()) != transcript_seed7);

  auto flag_wins = run_cli("--seed 7 " + no_endpoint_args + " --out " + transcript.string(),
                           "DPKIT_CONFIG=" + config.string());
  REQUIRE(flag_wins.code == 0);
  CHECK(util::read_file(transcript.string()) == transcript_seed7);
}

TEST_CASE("judge fails when too many verdicts are unparseable") {
  testutil::CannedServer vague([](const std::string&) { return std::string("hard to say"); });
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(vague.start());

  std::string questions, answers;
  for (int i = 0; i < 4; ++i) {
    std::string id = "u" + std::to_string(i);
    questions += json{{"id", id}, {"dataset", "d"}, {"question", "which?"}}.dump();
    questions += '\n';
    answers += json{{"id", id}, {"text", "text " + id}}.dump();
    answers += '\n';
  }
  const fs::path qfile = testutil::scratch_file("cli_vague_q.jsonl");
  const fs::path afile = testutil::scratch_file("cli_vague_a.jsonl");
  util::write_file(qfile.string(), questions);
  util::write_file(afile.string(), answers);
  const std::string args = "judge --questions " + qfile.string() + " --answers-a " +
                           afile.string() + " --answers-b " + afile.string() + " --endpoint " +
                           endpoint;

  auto result = run_cli(args);
  CHECK(result.code == 1);  // 100% unparseable > default 0.1
  CHECK(result.out.find("unparseable verdicts: 4 of 4\n") != std::string::npos);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%-24s %8ld %8ld\n", "Total", 0L, 0L);
  CHECK(result.out.find(buf) != std::string::npos);
  CHECK(result.out.find("   0.00%    0.00%") != std::string::npos);

  CHECK(run_cli(args + " --max-unparseable 1.0").code == 0);
}

TEST_CASE("cta inference runs through the cli against an echo endpoint") {
  mock::MockConfig config;
  config.mode = mock::Mode::Echo;
  mock::MockServer server(config);
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(server.start());

  const fs::path table = testutil::scratch_file("cli_table.csv");
  util::write_file(table.string(), "a1,b1\na2,b2\na3,b3\n");
  const fs::path preds = testutil::scratch_file("cli_cta_preds.jsonl");

  // The echoed prompt ends with the candidate list, so the parser lands on
  // the rightmost candidate: the last domain and the last type.
  auto result = run_cli("infer --task cta --endpoint " + endpoint + " --table " + table.string() +
                        " --domains Sports,Music --types Name,Duration --out " + preds.string());
  REQUIRE(result.code == 0);
  CHECK(result.out ==
        "domain: Music\n"
        "column:1: Duration\n"
        "column:2: Duration\n");

  auto records = pipelines::read_predictions(preds);
  REQUIRE(records.size() == 2);
  CHECK(records[0].instance_id == "column:1");
  CHECK(records[1].instance_id == "column:2");
  for (const auto& record : records) {
    REQUIRE(record.parsed.has_value());
    CHECK(record.parsed->rendered() == "Duration");
  }
}

TEST_CASE("config file supplies endpoint and data root for inference") {
  auto dataset = ingest::load_from_root(testutil::data_dir().string(), "beer");
  const auto n = dataset.indices(ingest::Split::Test).size();
  mock::MockServer server(beer_rule_config(dataset));
  const std::string endpoint = "http://127.0.0.1:" + std::to_string(server.start());

  const fs::path config = testutil::scratch_file("cli_infer_config.json");
  util::write_file(config.string(),
                   json{{"endpoint", endpoint}, {"data_root", testutil::data_dir().string()}}
                       .dump());

  auto via_env = run_cli("infer --task em --dataset beer --retries 0",
                         "DPKIT_CONFIG=" + config.string());
  REQUIRE(via_env.code == 0);
  CHECK(via_env.out == std::to_string(n) + " predictions (0 failed)\n");

  // An explicit --endpoint must beat the config value: the config now points
  // at a dead port, and only the flag keeps the run healthy.
  util::write_file(config.string(),
                   json{{"endpoint", "http://127.0.0.1:1"},
                        {"data_root", testutil::data_dir().string()}}
                       .dump());
  auto flag_wins = run_cli("infer --task em --dataset beer --retries 0 --endpoint " + endpoint,
                           "DPKIT_CONFIG=" + config.string());
  REQUIRE(flag_wins.code == 0);
  CHECK(flag_wins.out == std::to_string(n) + " predictions (0 failed)\n");

  // Without the flag the dead config endpoint fails every request, but
  // per-item transport errors never abort the run.
  auto dead = run_cli("infer --task em --dataset beer --retries 0",
                      "DPKIT_CONFIG=" + config.string());
  REQUIRE(dead.code == 0);
  CHECK(dead.out == std::to_string(n) + " predictions (" + std::to_string(n) + " failed)\n");
}

TEST_CASE("mock-serve answers over http until terminated") {
  const fs::path log = testutil::scratch_file("cli_mock_log.txt");
  const fs::path pidfile = testutil::scratch_file("cli_mock_pid.txt");
  fs::remove(log);
  fs::remove(pidfile);

  struct Reaper {
    fs::path pidfile;
    ~Reaper() {
      if (!fs::exists(pidfile)) return;
      if (std::system(("kill -9 $(cat " + pidfile.string() + ") 2>/dev/null").c_str()) != 0) {
        // already gone; nothing to reap
      }
    }
  } reaper{pidfile};

  const std::string launch = testutil::cli_path() + " mock-serve --mode echo --port 0 > " +
                             log.string() + " 2>&1 & echo $! > " + pidfile.string();
  REQUIRE(std::system(launch.c_str()) == 0);
  REQUIRE(wait_for_text(log, "listening on http://127.0.0.1:", 5000));

  const std::string text = util::read_file(log.string());
  const std::string marker = "listening on http://127.0.0.1:";
  const auto start = text.find(marker) + marker.size();
  const auto end = text.find('\n', start);
  REQUIRE(end != std::string::npos);
  const int port = std::stoi(text.substr(start, end - start));

  httplib::Client probe("127.0.0.1", port);
  auto health = probe.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->body == "ok");

  infer::EndpointProfile profile;
  profile.base_url = "http://127.0.0.1:" + std::to_string(port);
  profile.model_name = "probe";
  profile.max_retries = 0;
  infer::Client client(profile);
  infer::CompletionRequest request;
  request.user_text = "ping pong";
  auto response = client.complete(request);
  CHECK(response.text == "ping pong");

  REQUIRE(std::system(("kill -TERM $(cat " + pidfile.string() + ")").c_str()) == 0);
  CHECK(wait_for_text(log, "stopped", 5000));
}
