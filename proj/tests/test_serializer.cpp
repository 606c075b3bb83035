#include <doctest.h>

#include <string>

#include "dpkit/ingest.hpp"
#include "dpkit/knowledge.hpp"
#include "dpkit/serializer.hpp"
#include "dpkit/util.hpp"
#include "helpers.hpp"

using namespace dpkit;
using namespace dpkit::serializer;

namespace {

std::string golden(const std::string& name) {
  return util::read_file(testutil::data_dir() / "golden" / name);
}

std::vector<knowledge::Rule> resolve_for(const LabeledInstance& inst) {
  return knowledge::Registry::builtin().resolve(inst.task, inst.dataset, false, std::nullopt);
}

LabeledInstance restaurant_record() {
  LabeledInstance inst;
  inst.id = "restaurant:test:0";
  inst.dataset = "restaurant";
  inst.task = TaskKind::DI;
  inst.instance.add("name", AttributeValue::text("darbar"));
  inst.instance.add("addr", AttributeValue::text("44 w. 56th st."));
  inst.instance.add("phone", AttributeValue::text("212-432-7227"));
  inst.instance.add("type", AttributeValue::text("indian"));
  inst.target_attribute = "city";
  inst.gold = Label::value("new york");
  return inst;
}

LabeledInstance mimic_pair() {
  LabeledInstance inst;
  inst.id = "mimic-iii:test:0";
  inst.dataset = "mimic-iii";
  inst.task = TaskKind::SM;
  inst.instance.role = RecordRole::Pair;
  inst.instance.add("name", AttributeValue::text("visit_occurrence-visit_end_date"));
  inst.instance.add(
      "description",
      AttributeValue::text("the end date of the visit. if this is a one-day visit the end "
                           "date should match the start date."));
  inst.instance.pair_split = 2;
  inst.instance.add("name", AttributeValue::text("admissions-dischtime"));
  inst.instance.add("description",
                    AttributeValue::text("dischtime provides the date and time the patient "
                                         "was discharged from the hospital."));
  inst.gold = Label::binary(false);
  return inst;
}

int count_occurrences(const std::string& text, const std::string& needle) {
  int n = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size()))
    ++n;
  return n;
}

}  // namespace

TEST_CASE("golden prompt: error detection (adult)") {
  auto inst = testutil::adult_record();
  auto bundle = build_prompt(inst, resolve_for(inst), PromptMode::Task, {},
                             testutil::adult_profile());
  CHECK(bundle.render() == golden("ed_adult.txt"));
}

TEST_CASE("golden prompt: data imputation (restaurant)") {
  auto inst = restaurant_record();
  auto bundle = build_prompt(inst, resolve_for(inst), PromptMode::Task, {},
                             ingest::registry_lookup("restaurant").prompt);
  CHECK(bundle.render() == golden("di_restaurant.txt"));
}

TEST_CASE("golden prompt: schema matching (mimic-iii)") {
  auto inst = mimic_pair();
  auto bundle = build_prompt(inst, resolve_for(inst), PromptMode::Task, {},
                             ingest::registry_lookup("mimic-iii").prompt);
  CHECK(bundle.render() == golden("sm_mimic_iii.txt"));
}

TEST_CASE("golden prompt: entity matching (beer)") {
  auto inst = testutil::beer_pair();
  auto bundle = build_prompt(inst, resolve_for(inst), PromptMode::Task, {},
                             testutil::beer_profile());
  CHECK(bundle.render() == golden("em_beer.txt"));
}

TEST_CASE("render joins sections with single newlines, empty knowledge omitted") {
  auto inst = restaurant_record();
  auto bundle = build_prompt(inst, {}, PromptMode::Task, {},
                             ingest::registry_lookup("restaurant").prompt);
  CHECK(bundle.knowledge.empty());
  auto text = bundle.render();
  CHECK(text.find("\n\n") == std::string::npos);
  CHECK(text.front() != '\n');
  CHECK(text.back() != '\n');
}

TEST_CASE("prefix covers system, description and knowledge") {
  auto inst = testutil::adult_record();
  auto rules =
      knowledge::Registry::builtin().resolve(inst.task, inst.dataset, false,
                                             knowledge::MissingPolicy::MissingIsError);
  auto bundle = build_prompt(inst, rules, PromptMode::Task, {}, testutil::adult_profile());
  auto prefix = bundle.prefix();
  CHECK(bundle.render().rfind(prefix, 0) == 0);
  CHECK(prefix.find(bundle.task_description) != std::string::npos);
  for (const auto& line : bundle.knowledge) CHECK(prefix.find(line) != std::string::npos);
  CHECK(prefix.find(bundle.instance_block) == std::string::npos);
}

TEST_CASE("reasoning mode swaps system suffix and output format") {
  auto inst = testutil::beer_pair();
  auto task_bundle = build_prompt(inst, {}, PromptMode::Task, {}, testutil::beer_profile());
  auto reason_bundle =
      build_prompt(inst, {}, PromptMode::Reasoning, {}, testutil::beer_profile());

  CHECK(task_bundle.system == kSystemMessage);
  CHECK(reason_bundle.system == std::string(kSystemMessage) + kReasoningSuffix);
  CHECK(task_bundle.output_format == kBinaryOutputFormat);
  CHECK(reason_bundle.output_format == kBinaryReasoningOutputFormat);
  // Same live question either way.
  CHECK(task_bundle.question == reason_bundle.question);
}

TEST_CASE("reasoning output format for value tasks") {
  auto inst = restaurant_record();
  auto bundle = build_prompt(inst, {}, PromptMode::Reasoning, {},
                             ingest::registry_lookup("restaurant").prompt);
  CHECK(bundle.output_format ==
        std::string(kValueReasoningPrefix) + "Answer the name of the city.");
}

TEST_CASE("few-shot block shape") {
  auto inst = testutil::beer_pair();
  std::vector<FewShotExample> shots(3);
  for (int i = 0; i < 3; ++i) {
    shots[i].instance_block = "Product A: [name: \"x" + std::to_string(i) + "\"]\n"
                              "Product B: [name: \"y\"]";
    shots[i].question = "Are Product A and Product B the same Product?";
    shots[i].output_format = kBinaryOutputFormat;
    shots[i].response = i == 1 ? "Yes" : "No";
  }
  auto bundle = build_prompt(inst, {}, PromptMode::Task, shots, testutil::beer_profile());
  auto text = bundle.render();

  CHECK(count_occurrences(text, "### Instruction:") == 3);
  CHECK(count_occurrences(text, "### Response:") == 4);
  // The live instance has no header and the prompt ends with an open response.
  CHECK(text.ends_with("### Response:"));
  auto live_pos = text.find(bundle.instance_block);
  auto last_shot = text.rfind("x2");
  REQUIRE(live_pos != std::string::npos);
  REQUIRE(last_shot != std::string::npos);
  CHECK(live_pos > last_shot);
  auto after_shots = text.substr(text.rfind("### Instruction:"));
  // Exactly one instruction header remains after the last one (no header on
  // the live instance).
  CHECK(count_occurrences(after_shots, "### Instruction:") == 1);

  // Zero-shot prompts carry neither marker.
  auto zero = build_prompt(inst, {}, PromptMode::Task, {}, testutil::beer_profile()).render();
  CHECK(count_occurrences(zero, "### Instruction:") == 0);
  CHECK(count_occurrences(zero, "### Response:") == 0);
}

TEST_CASE("few-shot examples sit between knowledge and live instance") {
  auto inst = testutil::beer_pair();
  auto rules = resolve_for(inst);
  std::vector<FewShotExample> shots(1);
  shots[0].instance_block = "Product A: [name: \"a\"]\nProduct B: [name: \"b\"]";
  shots[0].question = "Are Product A and Product B the same Product?";
  shots[0].output_format = kBinaryOutputFormat;
  shots[0].response = "No";
  auto text = build_prompt(inst, rules, PromptMode::Task, shots, testutil::beer_profile())
                  .render();
  auto knowledge_pos = text.find(rules[0].text);
  auto shot_pos = text.find("### Instruction:");
  auto live_pos = text.find("Sequoia American Amber Ale");
  REQUIRE(knowledge_pos != std::string::npos);
  REQUIRE(shot_pos != std::string::npos);
  REQUIRE(live_pos != std::string::npos);
  CHECK(knowledge_pos < shot_pos);
  CHECK(shot_pos < live_pos);
}

TEST_CASE("hinted teacher prompt carries the hint, student never does") {
  auto inst = testutil::beer_pair(true);
  auto rules = resolve_for(inst);
  auto extras = knowledge::Registry::builtin().dataset_rules("beer");

  auto teacher = build_hinted_groundtruth_prompt(inst, rules, extras,
                                                 testutil::beer_profile());
  auto teacher_text = teacher.render();
  CHECK(teacher_text.find(kHintPreamble) != std::string::npos);
  CHECK(teacher_text.find("Hint: the final answer is \"Yes\"") != std::string::npos);
  CHECK(teacher_text.ends_with("Hint: the final answer is \"Yes\""));
  for (const auto& extra : extras)
    CHECK(teacher_text.find(extra.text) != std::string::npos);

  auto student = build_prompt(inst, rules, PromptMode::Reasoning, {},
                              testutil::beer_profile());
  auto student_text = student.render();
  CHECK(student_text.find("Hint") == std::string::npos);
  for (const auto& extra : extras)
    CHECK(student_text.find(extra.text) == std::string::npos);

  // Hint names the gold answer exactly.
  auto no_inst = testutil::beer_pair(false);
  auto no_teacher =
      build_hinted_groundtruth_prompt(no_inst, rules, extras, testutil::beer_profile());
  CHECK(no_teacher.render().ends_with("Hint: the final answer is \"No\""));

  no_inst.gold.reset();
  CHECK_THROWS_AS(
      build_hinted_groundtruth_prompt(no_inst, rules, extras, testutil::beer_profile()),
      MissingGold);
}

TEST_CASE("serialize_fields renders missing as nan and keeps order") {
  RecordInstance rec;
  rec.add("name", AttributeValue::text("Bell's Oberon"));
  rec.add("factory", AttributeValue::missing());
  CHECK(serialize_fields(rec.attributes) ==
        "[name: \"Bell's Oberon\", factory: \"nan\"]");
  CHECK(serialize_record(rec, "Product A") ==
        "Product A: [name: \"Bell's Oberon\", factory: \"nan\"]");
}

TEST_CASE("parse_record round-trips serialize_fields") {
  RecordInstance rec;
  rec.add("name", AttributeValue::text("value with, comma"));
  rec.add("note", AttributeValue::text("quote \" inside"));
  rec.add("empty", AttributeValue::missing());
  auto serialized = serialize_fields(rec.attributes);
  auto parsed = parse_record(serialized);
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0].first == "name");
  CHECK(parsed[0].second == "value with, comma");
  CHECK(parsed[1].first == "note");
  CHECK(parsed[1].second == "quote \" inside");
  CHECK(parsed[2].second == "nan");
}

TEST_CASE("CTA and AVE are rejected by build_prompt") {
  LabeledInstance cta;
  cta.id = "x";
  cta.task = TaskKind::CTA;
  cta.instance.role = RecordRole::ColumnSample;
  cta.instance.add("sample 1", AttributeValue::text("a"));
  cta.gold = Label::category("Album");
  CHECK_THROWS_AS(build_prompt(cta, {}, PromptMode::Task, {}, PromptProfile{}),
                  UnsupportedMode);
}

TEST_CASE("ensure_max_length") {
  auto inst = testutil::beer_pair();
  auto bundle = build_prompt(inst, {}, PromptMode::Task, {}, testutil::beer_profile());
  CHECK_NOTHROW(ensure_max_length(bundle, 0));
  CHECK_NOTHROW(ensure_max_length(bundle, bundle.render().size()));
  CHECK_THROWS_AS(ensure_max_length(bundle, 10), PromptTooLong);
}
