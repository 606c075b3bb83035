#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "dpkit/core.hpp"
#include "dpkit/ingest.hpp"

namespace testutil {

inline std::filesystem::path data_dir() { return DPKIT_DATA_DIR; }
inline std::filesystem::path snapshot_dir() { return DPKIT_SNAPSHOT_DIR; }
inline std::string cli_path() { return DPKIT_CLI_PATH; }

// Per-process scratch space under the build tree.
inline std::filesystem::path scratch_dir() {
  std::filesystem::path dir = DPKIT_SCRATCH_DIR;
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path scratch_file(const std::string& name) {
  return scratch_dir() / name;
}

// The Appendix-style beer pair used across serializer and pipeline tests.
inline dpkit::LabeledInstance beer_pair(bool same = false) {
  dpkit::LabeledInstance inst;
  inst.id = "beer:test:0";
  inst.dataset = "beer";
  inst.task = dpkit::TaskKind::EM;
  inst.instance.role = dpkit::RecordRole::Pair;
  inst.instance.add("name", dpkit::AttributeValue::text("Sequoia American Amber Ale"));
  inst.instance.add("factory", dpkit::AttributeValue::text("Wig And Pen"));
  inst.instance.pair_split = 2;
  inst.instance.add("name",
                    dpkit::AttributeValue::text("Aarhus Cains Triple A American Amber Ale"));
  inst.instance.add("factory", dpkit::AttributeValue::text("Aarhus Bryghus"));
  inst.gold = dpkit::Label::binary(same);
  return inst;
}

inline dpkit::LabeledInstance adult_record(bool error = true) {
  dpkit::LabeledInstance inst;
  inst.id = "adult:test:0";
  inst.dataset = "adult";
  inst.task = dpkit::TaskKind::ED;
  inst.instance.role = dpkit::RecordRole::SingleRecord;
  inst.instance.add("age", dpkit::AttributeValue::text("18-21"));
  inst.instance.add("workclass", dpkit::AttributeValue::text("Private"));
  inst.instance.add("education", dpkit::AttributeValue::text("Some-college"));
  inst.instance.add("maritalstatus", dpkit::AttributeValue::text("Never-married"));
  inst.instance.add("occupation", dpkit::AttributeValue::text("Other-service"));
  inst.instance.add("relationship", dpkit::AttributeValue::text("Own-child"));
  inst.instance.add("race", dpkit::AttributeValue::text("White"));
  inst.instance.add("sex", dpkit::AttributeValue::text("Male"));
  inst.instance.add("hoursperweek", dpkit::AttributeValue::text("30"));
  inst.instance.add("country", dpkit::AttributeValue::text("United-States"));
  inst.instance.add("income", dpkit::AttributeValue::text("eLssThan50K"));
  inst.target_attribute = "income";
  inst.gold = dpkit::Label::binary(error);
  return inst;
}

inline dpkit::serializer::PromptProfile adult_profile() {
  return dpkit::ingest::registry_lookup("adult").prompt;
}

inline dpkit::serializer::PromptProfile beer_profile() {
  return dpkit::ingest::registry_lookup("beer").prompt;
}

}  // namespace testutil
