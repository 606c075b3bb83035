#include <doctest.h>

#include "dpkit/core.hpp"
#include "helpers.hpp"

using namespace dpkit;

TEST_CASE("task names round-trip") {
  for (TaskKind t : {TaskKind::ED, TaskKind::DI, TaskKind::SM, TaskKind::EM, TaskKind::CTA,
                     TaskKind::AVE}) {
    auto back = task_from_string(to_string(t));
    REQUIRE(back.has_value());
    CHECK(*back == t);
  }
  CHECK(task_from_string("ED") == TaskKind::ED);  // case-insensitive
  CHECK_FALSE(task_from_string("nope").has_value());
}

TEST_CASE("label kinds per task") {
  CHECK(task_is_binary(TaskKind::ED));
  CHECK(task_is_binary(TaskKind::SM));
  CHECK(task_is_binary(TaskKind::EM));
  CHECK_FALSE(task_is_binary(TaskKind::DI));
  CHECK(task_label_kind(TaskKind::DI) == LabelKind::Value);
  CHECK(task_label_kind(TaskKind::AVE) == LabelKind::Value);
  CHECK(task_label_kind(TaskKind::CTA) == LabelKind::Category);
  CHECK(task_label_kind(TaskKind::EM) == LabelKind::Binary);
}

TEST_CASE("missing values render as nan") {
  auto missing = AttributeValue::missing();
  CHECK(missing.is_missing());
  CHECK(missing.rendered() == "nan");
  auto text = AttributeValue::text("Wig And Pen");
  CHECK_FALSE(text.is_missing());
  CHECK(text.rendered() == "Wig And Pen");
  CHECK(text.text() == "Wig And Pen");
}

TEST_CASE("normalize_value canonical missing spellings") {
  CHECK(normalize_value("nan").is_missing());
  CHECK(normalize_value("NaN").is_missing());
  CHECK(normalize_value("  N/A ").is_missing());
  CHECK(normalize_value("NA").is_missing());
  CHECK(normalize_value("").is_missing());
  CHECK(normalize_value("   ").is_missing());
  CHECK_FALSE(normalize_value("0").is_missing());
  CHECK_FALSE(normalize_value("none").is_missing());
  CHECK(normalize_value("  padded  ").rendered() == "padded");

  NormalizeOptions opts;
  opts.missing_spellings = {"-"};
  CHECK(normalize_value("-", opts).is_missing());
  CHECK_FALSE(normalize_value("nan", opts).is_missing());
}

TEST_CASE("label rendering") {
  CHECK(Label::binary(true).rendered() == "Yes");
  CHECK(Label::binary(false).rendered() == "No");
  CHECK(Label::value("Pittsburgh").rendered() == "Pittsburgh");
  CHECK(Label::category("Album").rendered() == "Album");
}

TEST_CASE("pair bookkeeping") {
  auto inst = testutil::beer_pair();
  CHECK(inst.instance.left_size() == 2);
  CHECK(inst.instance.right_size() == 2);
  const auto* found = inst.instance.find("factory");
  REQUIRE(found != nullptr);
  CHECK(found->text() == "Wig And Pen");  // first match wins (left side)
  CHECK(inst.instance.find("missing-name") == nullptr);
}

TEST_CASE("validate_labeled enforces target rules") {
  auto ed = testutil::adult_record();
  CHECK_NOTHROW(validate_labeled(ed));

  SUBCASE("ED without target") {
    ed.target_attribute.reset();
    CHECK_THROWS_AS(validate_labeled(ed), InvalidInstance);
  }
  SUBCASE("ED target not in record") {
    ed.target_attribute = "salary";
    CHECK_THROWS_AS(validate_labeled(ed), InvalidInstance);
  }
  SUBCASE("EM with a target") {
    auto em = testutil::beer_pair();
    em.target_attribute = "name";
    CHECK_THROWS_AS(validate_labeled(em), InvalidInstance);
  }
  SUBCASE("pair without split") {
    auto em = testutil::beer_pair();
    em.instance.pair_split = 0;
    CHECK_THROWS_AS(validate_labeled(em), InvalidInstance);
  }
  SUBCASE("gold kind must match task") {
    auto em = testutil::beer_pair();
    em.gold = Label::value("Yes");
    CHECK_THROWS_AS(validate_labeled(em), InvalidInstance);
  }
  SUBCASE("empty record") {
    LabeledInstance empty;
    empty.id = "x";
    empty.task = TaskKind::EM;
    CHECK_THROWS_AS(validate_labeled(empty), InvalidInstance);
  }
}

TEST_CASE("DI target must stay out of the record") {
  LabeledInstance di;
  di.id = "restaurant:0";
  di.dataset = "restaurant";
  di.task = TaskKind::DI;
  di.instance.add("name", AttributeValue::text("carmine's"));
  di.target_attribute = "city";
  di.gold = Label::value("new york");
  CHECK_NOTHROW(validate_labeled(di));
  di.instance.add("city", AttributeValue::text("new york"));
  CHECK_THROWS_AS(validate_labeled(di), InvalidInstance);
}
